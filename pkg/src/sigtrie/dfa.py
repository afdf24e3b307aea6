"""Per-protocol prefix-shared signature tries with fast elimination.

Each rule becomes one root-to-leaf path whose edges follow a fixed order::

    src ip, src port, dst ip, dst port, content*, end-of-contents, references, sid

Rules whose leading fields are written identically share the leading
edges.  Matching walks the trie depth first; when an edge is incompatible
with the packet, every signature below it is eliminated at once.

Several children of one node can accept the same packet (``any`` next to
``80``), so the walk branches -- this is a trie searched by DFS rather
than a DFA in the strict sense.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Optional

from .matching import NetConfig, content_matches, ip_matches, port_matches
from .packet import Packet
from .rules import (
    IpAddr, PortSingle, Protocol, Reference, Rule, serialize_content, serialize_reference,
)


class Level(enum.IntEnum):
    SRC_IP = 0
    SRC_PORT = 1
    DST_IP = 2
    DST_PORT = 3
    CONTENT = 4
    END_OF_CONTENTS = 5
    REF_SET = 6
    SID = 7


class EdgeLabel(NamedTuple):
    level: Level
    value: Any

    def text(self) -> str:
        lv, v = self.level, self.value
        if lv is Level.CONTENT:
            return serialize_content(v)
        if lv is Level.END_OF_CONTENTS:
            return "end"
        if lv is Level.REF_SET:
            return " ".join(serialize_reference(r) for r in v) or "-"
        if lv is Level.SID:
            return f"sid:{v}"
        return str(v)

    def sort_key(self) -> tuple:
        if self.level is Level.SID:
            return (self.level, "", self.value)
        return (self.level, self.text(), 0)


class DuplicateSidError(ValueError):
    pass


class ProtocolMismatch(ValueError):
    pass


def rule_path(rule: Rule) -> list[EdgeLabel]:
    """The edge labels a rule contributes, in trie order."""
    path = [
        EdgeLabel(Level.SRC_IP, rule.src_ip),
        EdgeLabel(Level.SRC_PORT, rule.src_port),
        EdgeLabel(Level.DST_IP, rule.dst_ip),
        EdgeLabel(Level.DST_PORT, rule.dst_port),
    ]
    path.extend(EdgeLabel(Level.CONTENT, c) for c in rule.contents)
    path.append(EdgeLabel(Level.END_OF_CONTENTS, None))
    path.append(EdgeLabel(Level.REF_SET, tuple(rule.references)))
    path.append(EdgeLabel(Level.SID, rule.sid))
    return path


@dataclass(eq=False)
class TrieNode:
    level: int = 0
    children: dict[EdgeLabel, "TrieNode"] = field(default_factory=dict)
    attached_sids: set[int] = field(default_factory=set)
    sid_count: int = 0
    # built by _compile(); cleared on insert
    _ordered: Optional[list[tuple[EdgeLabel, "TrieNode"]]] = field(default=None, repr=False)
    _exact: Optional[dict[int, "TrieNode"]] = field(default=None, repr=False)
    _scan: Optional[list[tuple[Any, "TrieNode"]]] = field(default=None, repr=False)
    _end_sids: Optional[frozenset[int]] = field(default=None, repr=False)

    def ordered_children(self) -> list[tuple[EdgeLabel, "TrieNode"]]:
        if self._ordered is None:
            self._ordered = sorted(self.children.items(), key=lambda kv: kv[0].sort_key())
        return self._ordered

    def subtree_sids(self) -> set[int]:
        out = set(self.attached_sids)
        for child in self.children.values():
            out |= child.subtree_sids()
        return out

    def node_count(self) -> int:
        return 1 + sum(c.node_count() for c in self.children.values())

    def structure(self) -> tuple:
        """Canonical nested-tuple form; equal tries have equal structures."""
        return (
            self.level,
            tuple(sorted(self.attached_sids)),
            tuple((label, child.structure()) for label, child in self.ordered_children()),
        )

    def __eq__(self, other):
        if not isinstance(other, TrieNode):
            return NotImplemented
        return (
            self.level == other.level
            and self.attached_sids == other.attached_sids
            and self.children == other.children
        )

    def _invalidate(self):
        self._ordered = self._exact = self._scan = self._end_sids = None


class SignatureTrieDfa:
    """Prefix-shared trie for the rules of a single protocol."""

    def __init__(self, protocol: Protocol):
        self.protocol = protocol
        self.root = TrieNode(level=0)
        self.sids: set[int] = set()
        # cumulative nodes entered by all match calls; used by isolation checks
        self.visit_count = 0
        self._compiled = False
        self._height: int | None = None

    @property
    def rule_count(self) -> int:
        return len(self.sids)

    def __eq__(self, other):
        if not isinstance(other, SignatureTrieDfa):
            return NotImplemented
        return self.protocol is other.protocol and self.root == other.root

    def __repr__(self) -> str:
        return f"SignatureTrieDfa({self.protocol.value}, rules={self.rule_count})"

    def insert(self, rule: Rule) -> "SignatureTrieDfa":
        if rule.protocol is not self.protocol:
            raise ProtocolMismatch(
                f"sid {rule.sid} is {rule.protocol.value}, trie is {self.protocol.value}"
            )
        if rule.sid in self.sids:
            raise DuplicateSidError(f"sid {rule.sid} already in the {self.protocol.value} trie")
        node = self.root
        node.sid_count += 1
        node._invalidate()
        for depth, label in enumerate(rule_path(rule), 1):
            child = node.children.get(label)
            if child is None:
                child = node.children[label] = TrieNode(level=depth)
            node = child
            node.sid_count += 1
            node._invalidate()
        node.attached_sids.add(rule.sid)
        self.sids.add(rule.sid)
        self._compiled = False
        self._height = None
        return self

    def node_count(self) -> int:
        return self.root.node_count()

    def height(self) -> int:
        if self._height is None:
            def h(node):
                return 1 + max((h(c) for c in node.children.values()), default=0)
            self._height = h(self.root)
        return self._height

    def levels(self) -> list[list[TrieNode]]:
        """Nodes grouped by depth, root first."""
        out: list[list[TrieNode]] = []
        frontier = [self.root]
        while frontier:
            out.append(frontier)
            frontier = [c for n in frontier for _, c in n.ordered_children()]
        return out

    def compile(self) -> "SignatureTrieDfa":
        """Precompute per-node dispatch tables used by :meth:`match_sids`."""
        if not self._compiled:
            _compile(self.root)
            self._compiled = True
        return self

    def match_sids(self, packet: Packet, net: NetConfig) -> set[int]:
        """Matched sids only, without tracing; the fast path."""
        if not self._compiled:
            self.compile()
        out: set[int] = set()
        src, dst = packet.src, packet.dst
        sport, dport = packet.src_port, packet.dst_port
        payload = packet.payload
        folded = payload.lower()
        visited = 1
        for n1 in _ip_step(self.root, src, net):
            visited += 1
            for n2 in _port_step(n1, sport, net):
                visited += 1
                for n3 in _ip_step(n2, dst, net):
                    visited += 1
                    for n4 in _port_step(n3, dport, net):
                        visited += _content_walk(n4, payload, folded, 0, out)
        self.visit_count += visited
        return out

    def dump(self) -> str:
        """Indented text, one node per line: ``level label sid-count``."""
        lines = [f"0 root {self.root.sid_count}"]

        def walk(node, depth):
            for label, child in node.ordered_children():
                lines.append(f"{'  ' * depth}{depth} {label.text()} {child.sid_count}")
                walk(child, depth + 1)

        walk(self.root, 1)
        return "\n".join(lines) + "\n"


def _compile(node: TrieNode) -> None:
    exact: dict[int, TrieNode] = {}
    scan: list[tuple[Any, TrieNode]] = []
    end_sids = None
    for label, child in node.ordered_children():
        lv = label.level
        if lv is Level.SRC_IP or lv is Level.DST_IP:
            if type(label.value) is IpAddr:
                exact[label.value.value] = child
            else:
                scan.append((label.value, child))
        elif lv is Level.SRC_PORT or lv is Level.DST_PORT:
            if type(label.value) is PortSingle:
                exact[label.value.port] = child
            else:
                scan.append((label.value, child))
        elif lv is Level.CONTENT:
            scan.append((label.value, child))
        elif lv is Level.END_OF_CONTENTS:
            end_sids = frozenset(child.subtree_sids())
        _compile(child)
    node._exact, node._scan, node._end_sids = exact, scan, end_sids


def _ip_step(node: TrieNode, addr: int, net: NetConfig) -> list[TrieNode]:
    hit = node._exact.get(addr)
    out = [hit] if hit is not None else []
    for spec, child in node._scan:
        if ip_matches(spec, addr, net):
            out.append(child)
    return out


def _port_step(node: TrieNode, port: int, net: NetConfig) -> list[TrieNode]:
    hit = node._exact.get(port)
    out = [hit] if hit is not None else []
    for spec, child in node._scan:
        if port_matches(spec, port, net):
            out.append(child)
    return out


def _content_walk(node: TrieNode, payload: bytes, folded: bytes, anchor: int,
                  out: set[int]) -> int:
    visited = 1
    if node._end_sids is not None:
        out |= node._end_sids
    for spec, child in node._scan:
        found = content_matches(payload, spec, anchor, folded)
        if found is not None:
            visited += _content_walk(child, payload, folded, found, out)
    return visited


@dataclass
class MatchTrace:
    nodes_visited: int = 0
    sids_eliminated_per_level: list[int] = field(default_factory=list)
    matched_sids: set[int] = field(default_factory=set)
    # sids still under a reached node, and sids matched, per depth
    live_per_level: list[int] = field(default_factory=list)
    matched_per_level: list[int] = field(default_factory=list)

    @property
    def eliminated(self) -> int:
        return sum(self.sids_eliminated_per_level)


def build_dfa(rules: Iterable[Rule], protocol: Protocol) -> SignatureTrieDfa:
    dfa = SignatureTrieDfa(protocol)
    for rule in rules:
        dfa.insert(rule)
    return dfa.compile()


def build_dfas(rules: Iterable[Rule],
               protocols: Iterable[Protocol] = (Protocol.TCP, Protocol.UDP, Protocol.ICMP),
               ) -> dict[Protocol, SignatureTrieDfa]:
    """One trie per protocol; rules of other protocols (``ip``) are skipped."""
    dfas = {p: SignatureTrieDfa(p) for p in protocols}
    for rule in rules:
        if rule.protocol in dfas:
            dfas[rule.protocol].insert(rule)
    for dfa in dfas.values():
        dfa.compile()
    return dfas


def insert_rule(dfa: SignatureTrieDfa, rule: Rule) -> SignatureTrieDfa:
    return dfa.insert(rule)


def _edge_accepts(label: EdgeLabel, packet: Packet, net: NetConfig, anchor: int,
                  folded: bytes) -> Optional[int]:
    """New anchor if the edge accepts the packet, else None."""
    lv = label.level
    if lv is Level.SRC_IP:
        return anchor if ip_matches(label.value, packet.src, net) else None
    if lv is Level.SRC_PORT:
        return anchor if port_matches(label.value, packet.src_port, net) else None
    if lv is Level.DST_IP:
        return anchor if ip_matches(label.value, packet.dst, net) else None
    if lv is Level.DST_PORT:
        return anchor if port_matches(label.value, packet.dst_port, net) else None
    if lv is Level.CONTENT:
        return content_matches(packet.payload, label.value, anchor, folded)
    # end-of-contents, references and sid carry nothing to compare
    return anchor


def match_packet(dfa: SignatureTrieDfa, packet: Packet, net: NetConfig) -> MatchTrace:
    """Depth-first walk recording visits and per-level eliminations."""
    if packet.protocol is not dfa.protocol:
        raise ProtocolMismatch(
            f"{packet.protocol.value} packet routed to the {dfa.protocol.value} trie"
        )
    height = dfa.height()
    trace = MatchTrace(
        sids_eliminated_per_level=[0] * height,
        live_per_level=[0] * height,
        matched_per_level=[0] * height,
    )
    folded = packet.payload.lower()

    def visit(node: TrieNode, depth: int, anchor: int) -> None:
        trace.nodes_visited += 1
        trace.live_per_level[depth] += node.sid_count
        if node.attached_sids:
            trace.matched_sids |= node.attached_sids
            trace.matched_per_level[depth] += len(node.attached_sids)
        for label, child in node.ordered_children():
            new_anchor = _edge_accepts(label, packet, net, anchor, folded)
            if new_anchor is None:
                trace.sids_eliminated_per_level[depth + 1] += child.sid_count
            else:
                visit(child, depth + 1, new_anchor)

    visit(dfa.root, 0, 0)
    dfa.visit_count += trace.nodes_visited
    return trace
