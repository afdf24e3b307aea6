"""Input coercion helpers shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Union

from .matching import NetConfig
from .packet import Packet
from .rules import ParseDiagnostic, PortSpec, Rule, parse_port_spec, parse_rule, parse_rules_text


class RuleSetError(ValueError):
    def __init__(self, message: str, diagnostics: Iterable[ParseDiagnostic] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


def check_rules(X) -> list[Rule]:
    """Coerce ``X`` into a list of rules with unique sids.

    ``X`` may be a ``.rules`` text blob, or an iterable mixing :class:`Rule`
    objects and single-rule strings.
    """
    if isinstance(X, str):
        rules, diagnostics = parse_rules_text(X)
        if diagnostics:
            raise RuleSetError(f"{len(diagnostics)} rule(s) failed to parse: {diagnostics[0]}",
                               diagnostics)
        return rules
    rules = []
    seen = set()
    for i, item in enumerate(X):
        if isinstance(item, str):
            item = parse_rule(item, line=i + 1)
            if isinstance(item, ParseDiagnostic):
                raise RuleSetError(f"rule {i} failed to parse: {item}", [item])
        if not isinstance(item, Rule):
            raise TypeError(f"expected Rule or rule text, got {type(item).__name__}")
        if item.sid in seen:
            raise RuleSetError(f"duplicate sid {item.sid}")
        seen.add(item.sid)
        rules.append(item)
    return rules


def check_packets(X) -> list[Packet]:
    """Accept packets, JSON-style dicts, or a single packet."""
    if isinstance(X, (Packet, dict)):
        X = [X]
    packets = []
    for item in X:
        if isinstance(item, dict):
            item = Packet.from_json(item)
        if not isinstance(item, Packet):
            raise TypeError(f"expected Packet, got {type(item).__name__}")
        packets.append(item)
    return packets


def check_net_config(home_net=None, port_vars: Optional[Mapping[str, Union[str, PortSpec]]] = None
                     ) -> NetConfig:
    if isinstance(home_net, NetConfig):
        return home_net
    if isinstance(home_net, str):
        home_net = [n for n in home_net.split(",") if n.strip()]
    resolved = {}
    for name, spec in (port_vars or {}).items():
        resolved[name.lstrip("$")] = parse_port_spec(spec) if isinstance(spec, str) else spec
    return NetConfig(tuple(n.strip() if isinstance(n, str) else n for n in (home_net or ())), resolved)
