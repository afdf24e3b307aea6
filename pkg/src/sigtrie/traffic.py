"""Test traffic: packets crafted to hit one signature, and random packets."""

from __future__ import annotations

import ipaddress
import random
from typing import Iterator

from .matching import NetConfig, content_window, linear_match
from .packet import MAX_PAYLOAD, Packet
from .rules import (
    ExternalNet, HomeNet, IpAddr, IpAny, IpCidr, IpRange, IpSpec, MATCH_PROTOCOLS,
    PortAny, PortRange, PortSingle, PortSpec, Protocol, Rule,
)


class UnsatisfiableRule(ValueError):
    """No packet can satisfy the rule's constraints."""

    def __init__(self, message: str, content_index: int | None = None):
        super().__init__(message)
        self.content_index = content_index


def _pick_ip(spec: IpSpec, net: NetConfig, rng: random.Random) -> int:
    if isinstance(spec, IpAny):
        return rng.getrandbits(32)
    if isinstance(spec, HomeNet):
        first = net.home_net[0] if net.home_net else None
        if first is None:
            net.in_home(0)  # raises MissingHomeNet
        if first.num_addresses == 1:
            return int(first.network_address)
        return int(first.network_address) + 1
    if isinstance(spec, ExternalNet):
        for _ in range(64):
            addr = rng.getrandbits(32)
            if not net.in_home(addr):
                return addr
        # home net covers nearly everything; walk from 0
        for addr in range(0, 1 << 32, 1 << 16):
            if not net.in_home(addr):
                return addr
        raise UnsatisfiableRule("home net leaves no external address")
    if isinstance(spec, IpAddr):
        return spec.value
    if isinstance(spec, (IpCidr, IpRange)):
        return rng.randint(spec.lo, spec.hi)
    raise TypeError(f"not an ip spec: {spec!r}")


def _pick_port(spec: PortSpec, net: NetConfig, rng: random.Random, icmp: bool) -> int:
    spec = net.resolve_port(spec)
    if icmp:
        if isinstance(spec, PortAny) or (isinstance(spec, PortRange) and spec.lo == 0):
            return 0
        if isinstance(spec, PortSingle) and spec.port == 0:
            return 0
        raise UnsatisfiableRule(f"icmp rule demands port {spec}")
    if isinstance(spec, PortAny):
        return rng.randint(1, 65535)
    if isinstance(spec, PortSingle):
        return spec.port
    if isinstance(spec, PortRange):
        return rng.randint(spec.lo, spec.hi)
    raise TypeError(f"not a port spec: {spec!r}")


def _padding_alphabet(rule: Rule) -> bytes:
    used = set()
    for c in rule.contents:
        used.update(c.pattern.lower())
        used.update(c.pattern.upper())
    alphabet = bytes(b for b in range(256) if b not in used)
    return alphabet or bytes(range(256))


def _craft_payload(rule: Rule, rng: random.Random) -> bytes:
    """Lay the contents out left to right, simulating the matcher as we go.

    Each content is placed at the earliest legal position after the current
    end of the payload.  Because the matcher takes the leftmost occurrence,
    it may find a content earlier than where it was placed; the anchor is
    taken from that actual hit so later windows line up with the matcher.
    """
    alphabet = _padding_alphabet(rule)

    def pad(n: int) -> bytes:
        return bytes(rng.choice(alphabet) for _ in range(n))

    payload = bytearray()
    anchor = 0
    for i, spec in enumerate(rule.contents):
        n = len(spec.pattern)
        # window bounds come from the unbounded payload length
        start, end = content_window(spec, anchor, MAX_PAYLOAD)
        needle = spec.folded if spec.nocase else spec.pattern
        haystack = bytes(payload).lower() if spec.nocase else bytes(payload)
        hit = haystack.find(needle, start, min(end, len(payload)))
        if hit >= 0:
            # already present in the window; any later bytes can only match further right
            anchor = hit + n
            continue
        pos = max(start, len(payload))
        # leave a small random gap when the window allows it
        slack = end - n - pos
        if slack > 0:
            pos += rng.randint(0, min(slack, 4))
        if pos + n > end:
            raise UnsatisfiableRule(
                f"content {i} ({n} bytes) does not fit its window [{start}, {end})", i
            )
        payload += pad(pos - len(payload))
        payload += spec.pattern if not spec.nocase else _random_case(spec.pattern, rng)
        haystack = bytes(payload).lower() if spec.nocase else bytes(payload)
        hit = haystack.find(needle, start, min(end, len(payload)))
        anchor = hit + n
    payload += pad(rng.randint(0, 8))
    if len(payload) > MAX_PAYLOAD:
        raise UnsatisfiableRule("crafted payload exceeds the maximum packet size")
    return bytes(payload)


def _random_case(pattern: bytes, rng: random.Random) -> bytes:
    return bytes(
        b ^ 0x20 if (0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A) and rng.random() < 0.5 else b
        for b in pattern
    )


def craft_packet_for(rule: Rule, net: NetConfig, rng_seed: int) -> Packet:
    """A packet that ``rule`` matches; verified against the linear matcher."""
    if rule.protocol not in MATCH_PROTOCOLS:
        raise UnsatisfiableRule(f"cannot craft {rule.protocol.value} packets")
    rng = random.Random(rng_seed)
    icmp = rule.protocol is Protocol.ICMP
    packet = Packet(
        rule.protocol,
        ipaddress.IPv4Address(_pick_ip(rule.src_ip, net, rng)),
        _pick_port(rule.src_port, net, rng, icmp),
        ipaddress.IPv4Address(_pick_ip(rule.dst_ip, net, rng)),
        _pick_port(rule.dst_port, net, rng, icmp),
        _craft_payload(rule, rng),
    )
    if linear_match([rule], packet, net) != {rule.sid}:
        raise AssertionError(f"crafted packet does not match sid {rule.sid}: {packet}")
    return packet


def random_packet(protocol: Protocol, rng_seed: int, max_payload: int = 256) -> Packet:
    return next(random_packets(protocol, rng_seed, 1, max_payload))


def random_packets(protocol: Protocol, rng_seed: int, count: int,
                   max_payload: int = 256) -> Iterator[Packet]:
    """``count`` packets with uniform header fields and payload bytes."""
    if max_payload < 0:
        raise ValueError("max_payload must be >= 0")
    rng = random.Random(rng_seed)
    icmp = protocol is Protocol.ICMP
    for _ in range(count):
        src = rng.getrandbits(32)
        dst = rng.getrandbits(32)
        sport = 0 if icmp else rng.randint(0, 65535)
        dport = 0 if icmp else rng.randint(0, 65535)
        payload = rng.randbytes(rng.randint(0, max_payload))
        yield Packet(protocol, ipaddress.IPv4Address(src), sport,
                     ipaddress.IPv4Address(dst), dport, payload)


def traffic_for(rules: list[Rule], net: NetConfig, seed: int, crafted_ratio: float = 1.0,
                count: int | None = None, max_payload: int = 256) -> list[Packet]:
    """Crafted packets cycling over ``rules`` interleaved with random ones.

    ``crafted_ratio`` is crafted packets per random packet (1.0 means 1:1).
    Without ``count``, one crafted packet per rule is produced.
    """
    if not rules:
        return []
    protocol = rules[0].protocol
    rng = random.Random(seed)
    if count is None:
        n_crafted = len(rules)
        n_random = round(n_crafted / crafted_ratio) if crafted_ratio > 0 else 0
    else:
        n_crafted = round(count * crafted_ratio / (1 + crafted_ratio))
        n_random = count - n_crafted
    crafted = [
        craft_packet_for(rules[i % len(rules)], net, rng.getrandbits(32))
        for i in range(n_crafted)
    ]
    randoms = list(random_packets(protocol, rng.getrandbits(32), n_random, max_payload))
    packets = crafted + randoms
    rng.shuffle(packets)
    return packets
