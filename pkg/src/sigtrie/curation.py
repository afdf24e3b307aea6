"""Identification-phase filter chain for candidate IPS signatures.

Every rule ends up in exactly one of three sets:

* ``disable``   -- outside the timeline, irrelevant, or every CVE scored low
* ``candidate`` -- nothing decisive known (no CVE, or an unknown CVE)
* ``signature`` -- at least one CVE at or above the severity threshold

The signature set is then split by action into IPS-drop and IDS-alert rules.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .rules import Action, PortSpec, Rule, serialize_rules
from .severity import SeverityStore


class Outcome(enum.Enum):
    DISABLE = "Disable"
    CANDIDATE = "Candidate"
    SIGNATURE = "Signature"


@dataclass(frozen=True)
class CurationConfig:
    cutoff_year: int = 2000
    severity_threshold: float = 6.0
    relevance_ports: Mapping[str, frozenset[PortSpec]] = field(default_factory=dict)

    def __post_init__(self):
        if self.cutoff_year < 1999:
            raise ValueError("cutoff_year must be >= 1999")
        if not 0.0 <= self.severity_threshold <= 10.0:
            raise ValueError("severity_threshold must lie in [0, 10]")


@dataclass(frozen=True)
class CurationDecision:
    sid: int
    outcome: Outcome
    reason: str


@dataclass
class PartitionedSets:
    disable: list[Rule] = field(default_factory=list)
    candidate: list[Rule] = field(default_factory=list)
    signature: list[Rule] = field(default_factory=list)
    ips_drop: list[Rule] = field(default_factory=list)
    ids_alert: list[Rule] = field(default_factory=list)
    decisions: list[CurationDecision] = field(default_factory=list)

    def sizes(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in OUTPUT_FILES}


# output set -> file name
OUTPUT_FILES = {
    "disable": "disable.out",
    "candidate": "candidate.out",
    "signature": "signature.out",
    "ips_drop": "ips_drop.out",
    "ids_alert": "ids_alert.out",
}


def relevance_filter(rule: Rule, config: CurationConfig) -> tuple[bool, str]:
    if not config.relevance_ports:
        return True, ""
    for app, ports in sorted(config.relevance_ports.items()):
        if rule.dst_port in ports:
            return True, f"relevance: dst port {rule.dst_port} belongs to {app}"
    return False, f"relevance: dst port {rule.dst_port} matches no configured application"


def timeline_filter(rule: Rule, config: CurationConfig) -> tuple[bool, str]:
    """Keep a rule whose newest dated reference is no older than the cutoff.

    Only CVE ids carry a year.  Undated rules are kept.
    """
    dated = [(ref.year, ref.cve_id) for ref in rule.references if ref.year is not None]
    if not dated:
        return True, "timeline: no dated reference"
    year, cve_id = max(dated)
    if year >= config.cutoff_year:
        return True, f"timeline: {cve_id} ({year}) >= {config.cutoff_year}"
    return False, f"timeline: newest dated reference {cve_id} ({year}) < {config.cutoff_year}"


def severity_filter(rule: Rule, store: SeverityStore,
                    config: CurationConfig) -> tuple[Outcome, str]:
    cves = [ref.cve_id for ref in rule.references if ref.scheme == "cve"]
    if not cves:
        return Outcome.CANDIDATE, "severity: no CVE reference"
    unknown = []
    low = []
    for cve_id in cves:
        record = store.records.get(cve_id)
        if record is None:
            unknown.append(cve_id)
        elif record.base_score >= config.severity_threshold:
            return (
                Outcome.SIGNATURE,
                f"severity: {cve_id} score {record.base_score} >= {config.severity_threshold}",
            )
        else:
            low.append(f"{cve_id}={record.base_score}")
    if unknown:
        return Outcome.CANDIDATE, f"severity: unknown {', '.join(unknown)}"
    return Outcome.DISABLE, f"severity: all below {config.severity_threshold} ({', '.join(low)})"


def action_partition(signature_rules: Iterable[Rule]) -> tuple[list[Rule], list[Rule]]:
    """Split by action: drop goes to IPS, everything else is detect-only."""
    ips_drop, ids_alert = [], []
    for rule in signature_rules:
        (ips_drop if rule.action is Action.DROP else ids_alert).append(rule)
    return ips_drop, ids_alert


def classify(rule: Rule, store: SeverityStore, config: CurationConfig) -> CurationDecision:
    keep, reason = relevance_filter(rule, config)
    if not keep:
        return CurationDecision(rule.sid, Outcome.DISABLE, reason)
    keep, reason = timeline_filter(rule, config)
    if not keep:
        return CurationDecision(rule.sid, Outcome.DISABLE, reason)
    outcome, severity_reason = severity_filter(rule, store, config)
    return CurationDecision(rule.sid, outcome, f"{reason}; {severity_reason}")


def run_pipeline(rules: Iterable[Rule], store: SeverityStore,
                 config: CurationConfig | None = None) -> PartitionedSets:
    config = config or CurationConfig()
    result = PartitionedSets()
    buckets = {
        Outcome.DISABLE: result.disable,
        Outcome.CANDIDATE: result.candidate,
        Outcome.SIGNATURE: result.signature,
    }
    for rule in rules:
        decision = classify(rule, store, config)
        result.decisions.append(decision)
        buckets[decision.outcome].append(rule)
    result.ips_drop, result.ids_alert = action_partition(result.signature)
    return result


def decisions_csv(decisions: Iterable[CurationDecision]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sid", "outcome", "reason"])
    for d in decisions:
        writer.writerow([d.sid, d.outcome.value, d.reason])
    return buf.getvalue()


def write_outputs(result: PartitionedSets, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for attr, name in OUTPUT_FILES.items():
        path = out / name
        path.write_text(serialize_rules(getattr(result, attr)), encoding="utf-8")
        written.append(path)
    path = out / "decisions.csv"
    path.write_text(decisions_csv(result.decisions), encoding="utf-8")
    written.append(path)
    return written
