"""Seeded synthetic rule sets.

Header specs are drawn from small pools of the value kinds real rule sets
use (``any``, ``$HOME_NET``/``$EXTERNAL_NET``, addresses, CIDRs, ranges,
named/single/ranged ports), so generated sets share prefixes the way
published rule files do.  Content patterns are partly drawn from a shared
pool so that rules overlap in payload as well.
"""

from __future__ import annotations

import ipaddress
import random

from .matching import NetConfig
from .rules import (
    Action, ContentSpec, ExternalNet, HomeNet, IpAddr, IpAny, IpCidr, IpRange,
    PortAny, PortNamed, PortRange, PortSingle, Protocol, Reference, Rule,
)

DEFAULT_NET = NetConfig.from_strings(
    ["192.168.0.0/16", "10.0.0.0/8"],
    {"HTTP_PORTS": "80", "SMTP_PORTS": "25", "HIGH_PORTS": "1024:65535"},
)

_ADDRS = ["192.168.1.10", "10.1.2.3", "203.0.113.7", "198.51.100.20"]
_CIDRS = ["192.168.1.0/24", "10.0.0.0/16", "203.0.113.0/24"]
_RANGES = [("10.0.0.1", "10.0.0.200"), ("198.51.100.1", "198.51.100.99")]
_PORTS = [21, 23, 25, 53, 80, 110, 139, 143, 443, 445, 1433, 3306, 8080]
_PORT_RANGES = [(40001, 56000), (1024, 65535), (6000, 6063)]
_NAMED = ["HTTP_PORTS", "SMTP_PORTS", "HIGH_PORTS"]
_ACTIONS = [Action.ALERT] * 5 + [Action.DROP] * 4 + [Action.LOG, Action.PASS]
_WORDS = [b"GET ", b"POST ", b"USER ", b"PASS ", b"/etc/passwd", b"cmd.exe", b"HELO",
          b"\x00\x01\x86\xa0", b"SELECT ", b"../..", b"%c0%af", b"\x90\x90\x90\x90"]


def _ip(rng: random.Random):
    r = rng.random()
    if r < 0.35:
        return ExternalNet()
    if r < 0.6:
        return IpAny()
    if r < 0.75:
        return HomeNet()
    if r < 0.85:
        return IpAddr(ipaddress.IPv4Address(rng.choice(_ADDRS)))
    if r < 0.93:
        return IpCidr(ipaddress.IPv4Network(rng.choice(_CIDRS)))
    lo, hi = rng.choice(_RANGES)
    return IpRange(ipaddress.IPv4Address(lo), ipaddress.IPv4Address(hi))


def _port(rng: random.Random, any_weight: float):
    r = rng.random()
    if r < any_weight:
        return PortAny()
    r = (r - any_weight) / (1 - any_weight)
    if r < 0.5:
        return PortSingle(rng.choice(_PORTS))
    if r < 0.75:
        return PortNamed(rng.choice(_NAMED))
    if r < 0.9:
        return PortRange(*rng.choice(_PORT_RANGES))
    lo = rng.randint(1, 60000)
    return PortSingle(lo)


def _pattern(rng: random.Random, pool: list[bytes]) -> bytes:
    if pool and rng.random() < 0.4:
        return rng.choice(pool)
    length = rng.randint(4, 16)
    if rng.random() < 0.5:
        alphabet = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 /.-_=?&"
        pat = bytes(rng.choice(alphabet) for _ in range(length))
    else:
        pat = rng.randbytes(length)
    pool.append(pat)
    return pat


def _contents(rng: random.Random, pool: list[bytes]) -> tuple[ContentSpec, ...]:
    n = rng.choice([0, 1, 1, 2, 2, 3])
    out = []
    for i in range(n):
        pat = rng.choice(_WORDS) if rng.random() < 0.25 else _pattern(rng, pool)
        kw: dict = {"nocase": rng.random() < 0.25, "is_uri": rng.random() < 0.1}
        if i == 0:
            if rng.random() < 0.3:
                kw["offset"] = rng.randint(0, 8)
            if rng.random() < 0.3:
                kw["depth"] = len(pat) + rng.randint(0, 24)
        else:
            if rng.random() < 0.4:
                kw["distance"] = rng.randint(0, 8)
            if rng.random() < 0.3:
                kw["within"] = len(pat) + rng.randint(0, 24)
        out.append(ContentSpec(pat, **kw))
    return tuple(out)


def _references(rng: random.Random) -> tuple[Reference, ...]:
    refs = []
    for _ in range(rng.choice([0, 1, 1, 2, 3])):
        r = rng.random()
        if r < 0.7:
            refs.append(Reference("cve", f"{rng.randint(1998, 2008)}-{rng.randint(1, 9999):04d}"))
        elif r < 0.85:
            refs.append(Reference("bugtraq", str(rng.randint(100, 30000))))
        else:
            refs.append(Reference("nessus", str(rng.randint(10000, 40000))))
    return tuple(refs)


def generate_rules(protocol: Protocol, count: int, seed: int, sid_start: int = 1000000,
                   extras: bool = False) -> list[Rule]:
    """``count`` rules for ``protocol`` with sids ``sid_start, sid_start+1, ...``.

    With ``extras`` the rules also carry flow/metadata/rev/unknown options,
    which the matcher ignores but the serializer must preserve.
    """
    rng = random.Random(seed)
    pool: list[bytes] = []
    icmp = protocol is Protocol.ICMP
    rules = []
    for i in range(count):
        kw: dict = {}
        if extras:
            if rng.random() < 0.5:
                kw["flow"] = rng.choice(["to_server,established", "from_server", "stateless"])
            if rng.random() < 0.5:
                kw["metadata"] = (("policy", "balanced-ips drop"), ("service", "http"))[: rng.randint(1, 2)]
            if rng.random() < 0.5:
                kw["rev"] = rng.randint(1, 12)
            if rng.random() < 0.3:
                kw["raw_options"] = (("classtype", "attempted-admin"), ("byte_jump", "4,12,relative"),
                                     ("fast_pattern", None))[: rng.randint(1, 3)]
        rules.append(Rule(
            action=rng.choice(_ACTIONS),
            protocol=protocol,
            src_ip=_ip(rng),
            src_port=PortAny() if icmp else _port(rng, 0.75),
            dst_ip=_ip(rng),
            dst_port=PortAny() if icmp else _port(rng, 0.2),
            sid=sid_start + i,
            msg=f"synthetic {protocol.value} rule {i}",
            contents=_contents(rng, pool),
            references=_references(rng),
            **kw,
        ))
    return rules


def generate_rule_sets(rules_per_protocol: int, seed: int,
                       protocols=(Protocol.ICMP, Protocol.TCP, Protocol.UDP),
                       extras: bool = False) -> dict[Protocol, list[Rule]]:
    """Disjoint-sid rule sets, one per protocol."""
    return {
        p: generate_rules(p, rules_per_protocol, seed * 31 + k, sid_start=1000000 * (k + 1),
                          extras=extras)
        for k, p in enumerate(protocols)
    }
