"""Rule curation and fast-elimination trie matching for Snort-style signatures."""

from .curation import CurationConfig, Outcome, PartitionedSets, run_pipeline
from .dfa import SignatureTrieDfa, build_dfa, build_dfas, insert_rule, match_packet
from .estimators import LinearMatcher, RuleCurator, TrieMatcher
from .matching import NetConfig, content_matches, ip_matches, linear_match, port_matches
from .packet import Packet, read_packets_jsonl, write_packets_jsonl
from .rules import (
    Action, ContentSpec, ParseDiagnostic, Protocol, Reference, Rule,
    parse_rule, parse_rules_text, serialize_rule,
)
from .severity import CveRecord, SeverityStore, ingest_feed, lookup
from .traffic import craft_packet_for, random_packet

__all__ = [
    "Action", "ContentSpec", "CurationConfig", "CveRecord", "LinearMatcher", "NetConfig",
    "Outcome", "Packet", "ParseDiagnostic", "PartitionedSets", "Protocol", "Reference", "Rule",
    "RuleCurator", "SeverityStore", "SignatureTrieDfa", "TrieMatcher", "build_dfa", "build_dfas",
    "content_matches", "craft_packet_for", "ingest_feed", "insert_rule", "ip_matches",
    "linear_match", "lookup", "match_packet", "parse_rule", "parse_rules_text", "port_matches",
    "random_packet", "read_packets_jsonl", "run_pipeline", "serialize_rule",
    "write_packets_jsonl",
]

__version__ = "0.1.0"
