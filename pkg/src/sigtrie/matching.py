"""Field-level match predicates and the rule-by-rule linear matcher.

The linear matcher is the reference the trie matcher is checked against,
so both share these predicates and the same content-window arithmetic.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .packet import Packet
from .rules import (
    ContentSpec, ExternalNet, HomeNet, IpAddr, IpAny, IpCidr, IpRange, IpSpec,
    PortAny, PortNamed, PortRange, PortSingle, PortSpec, Rule, parse_port_spec,
)


class NetConfigError(ValueError):
    """A rule refers to network configuration that is not defined."""


class MissingHomeNet(NetConfigError):
    def __init__(self):
        super().__init__("HOME_NET is not configured")
        self.variable = "HOME_NET"


class UnresolvedPortVariable(NetConfigError):
    def __init__(self, name: str):
        super().__init__(f"port variable ${name} is not defined")
        self.variable = name


@dataclass(frozen=True, eq=False)
class NetConfig:
    home_net: tuple[ipaddress.IPv4Network, ...] = ()
    port_vars: Mapping[str, PortSpec] = field(default_factory=dict)
    _home: tuple[tuple[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        nets = tuple(ipaddress.IPv4Network(n) for n in self.home_net)
        object.__setattr__(self, "home_net", nets)
        object.__setattr__(
            self, "_home",
            tuple((int(n.network_address), int(n.broadcast_address)) for n in nets),
        )
        for name, spec in self.port_vars.items():
            if isinstance(spec, PortNamed):
                raise ValueError(f"port variable {name} must resolve to a concrete port spec")
        object.__setattr__(self, "port_vars", dict(self.port_vars))

    def __eq__(self, other):
        if not isinstance(other, NetConfig):
            return NotImplemented
        return self.home_net == other.home_net and self.port_vars == other.port_vars

    @classmethod
    def from_strings(cls, home_net: Iterable[str] = (),
                     port_vars: Union[Mapping[str, str], Iterable[str]] = ()) -> "NetConfig":
        """Build from ``["10.0.0.0/8"]`` and ``{"HTTP_PORTS": "80"}`` or ``["HTTP_PORTS=80"]``."""
        if isinstance(port_vars, Mapping):
            items = port_vars.items()
        else:
            items = [tuple(p.split("=", 1)) for p in port_vars]
        resolved = {}
        for name, spec in items:
            resolved[name.lstrip("$")] = parse_port_spec(str(spec).strip())
        return cls(tuple(home_net), resolved)

    def in_home(self, addr: int) -> bool:
        if not self._home:
            raise MissingHomeNet()
        for lo, hi in self._home:
            if lo <= addr <= hi:
                return True
        return False

    def resolve_port(self, spec: PortSpec) -> PortSpec:
        if isinstance(spec, PortNamed):
            try:
                return self.port_vars[spec.name]
            except KeyError:
                raise UnresolvedPortVariable(spec.name) from None
        return spec

    def check_rules(self, rules: Iterable[Rule]) -> None:
        """Raise :class:`NetConfigError` if any rule cannot be evaluated."""
        for rule in rules:
            for ip in (rule.src_ip, rule.dst_ip):
                if isinstance(ip, (HomeNet, ExternalNet)) and not self._home:
                    raise MissingHomeNet()
            for port in (rule.src_port, rule.dst_port):
                self.resolve_port(port)


def _addr(addr) -> int:
    return addr if isinstance(addr, int) else int(ipaddress.IPv4Address(addr))


def ip_matches(spec: IpSpec, addr, net: NetConfig) -> bool:
    addr = _addr(addr)
    t = type(spec)
    if t is IpAny:
        return True
    if t is IpAddr:
        return addr == spec.value
    if t is IpCidr or t is IpRange:
        return spec.lo <= addr <= spec.hi
    if t is HomeNet:
        return net.in_home(addr)
    if t is ExternalNet:
        return not net.in_home(addr)
    raise TypeError(f"not an ip spec: {spec!r}")


def port_matches(spec: PortSpec, port: int, net: NetConfig) -> bool:
    t = type(spec)
    if t is PortAny:
        return True
    if t is PortSingle:
        return port == spec.port
    if t is PortRange:
        return spec.lo <= port <= spec.hi
    if t is PortNamed:
        return port_matches(net.resolve_port(spec), port, net)
    raise TypeError(f"not a port spec: {spec!r}")


def content_window(spec: ContentSpec, anchor: int, length: int) -> tuple[int, int]:
    """Half-open search window ``[start, end)`` for ``spec``.

    The first content of a rule is searched at ``[offset, offset+depth)``,
    later ones at ``[anchor+distance, anchor+distance+within)``.  Missing
    bounds extend to the payload end.
    """
    start = anchor + (spec.offset or 0) + (spec.distance or 0)
    limit = spec.depth if spec.depth is not None else spec.within
    end = length if limit is None else min(length, start + limit)
    return max(start, 0), end


def content_matches(payload: bytes, spec: ContentSpec, anchor: int = 0,
                    folded: Optional[bytes] = None) -> Optional[int]:
    """End offset of the leftmost occurrence of ``spec`` in its window, else None.

    ``folded`` may carry a precomputed ``payload.lower()`` for nocase specs.
    """
    start, end = content_window(spec, anchor, len(payload))
    if spec.nocase:
        if folded is None:
            folded = payload.lower()
        i = folded.find(spec.folded, start, end)
    else:
        i = payload.find(spec.pattern, start, end)
    return None if i < 0 else i + len(spec.pattern)


def contents_match(payload: bytes, contents: Iterable[ContentSpec],
                   folded: Optional[bytes] = None) -> bool:
    anchor = 0
    for spec in contents:
        found = content_matches(payload, spec, anchor, folded)
        if found is None:
            return False
        anchor = found
    return True


def rule_matches(rule: Rule, packet: Packet, net: NetConfig,
                 folded: Optional[bytes] = None) -> bool:
    return (
        rule.protocol is packet.protocol
        and ip_matches(rule.src_ip, packet.src, net)
        and port_matches(rule.src_port, packet.src_port, net)
        and ip_matches(rule.dst_ip, packet.dst, net)
        and port_matches(rule.dst_port, packet.dst_port, net)
        and contents_match(packet.payload, rule.contents, folded)
    )


def linear_match(rules: Iterable[Rule], packet: Packet, net: NetConfig) -> set[int]:
    """Check every rule in turn; the sids of all full matches."""
    folded = packet.payload.lower()
    return {r.sid for r in rules if rule_matches(r, packet, net, folded)}
