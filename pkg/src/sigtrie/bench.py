"""Timing harness: trie matching against the linear baseline."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Mapping, Optional

from .dfa import build_dfa
from .matching import NetConfig, linear_match
from .packet import Packet
from .rules import (
    Action, ContentSpec, ExternalNet, HomeNet, PortAny, PortSingle, Protocol, Rule,
)
from .synth import DEFAULT_NET, generate_rule_sets
from .traffic import traffic_for

PASS_SPEEDUP = 1.5
TARGET_SPEEDUP = 2.0


@dataclass
class BenchReport:
    protocol: Protocol
    rule_count: int
    packet_count: int
    repetitions: int
    mean_ns_dfa: float
    mean_ns_linear: float
    speedup: float
    equivalence_checked: bool
    mismatch_count: int

    @property
    def passed(self) -> bool:
        return self.equivalence_checked and self.mismatch_count == 0 and self.speedup >= PASS_SPEEDUP

    @property
    def meets_target(self) -> bool:
        return self.passed and self.speedup >= TARGET_SPEEDUP

    def to_json(self) -> dict:
        d = asdict(self)
        d["protocol"] = self.protocol.value
        for key in ("mean_ns_dfa", "mean_ns_linear", "speedup"):
            if math.isnan(d[key]):
                d[key] = None
        d["pass_threshold"] = PASS_SPEEDUP
        d["target_speedup"] = TARGET_SPEEDUP
        d["passed"] = self.passed
        d["meets_target"] = self.meets_target
        return d

    def summary(self) -> str:
        if self.mismatch_count:
            return (f"{self.protocol.value}: {self.mismatch_count} mismatches, "
                    f"timing suppressed")
        verdict = "PASS" if self.passed else "FAIL"
        target = "met" if self.meets_target else "not met"
        return (
            f"{self.protocol.value}: {self.rule_count} rules, {self.packet_count} packets, "
            f"trie {self.mean_ns_dfa:,.0f} ns/pkt, linear {self.mean_ns_linear:,.0f} ns/pkt, "
            f"speedup {self.speedup:.2f}x [{verdict} >= {PASS_SPEEDUP}; "
            f"target {TARGET_SPEEDUP}x {target}]"
        )


def _mean_ns(fn: Callable[[Packet], object], packets: list[Packet]) -> float:
    start = time.perf_counter_ns()
    for p in packets:
        fn(p)
    return (time.perf_counter_ns() - start) / len(packets)


def time_matchers(dfa_fn, linear_fn, packets: list[Packet],
                  repetitions: int) -> tuple[float, float]:
    """Median over repetitions of the mean per-packet time, after a warm-up."""
    _mean_ns(dfa_fn, packets)
    _mean_ns(linear_fn, packets)
    dfa_times, linear_times = [], []
    for _ in range(repetitions):
        dfa_times.append(_mean_ns(dfa_fn, packets))
        linear_times.append(_mean_ns(linear_fn, packets))
    return statistics.median(dfa_times), statistics.median(linear_times)


def bench_protocol(rules: list[Rule], packets: list[Packet], net: NetConfig,
                   repetitions: int = 5, protocol: Optional[Protocol] = None) -> BenchReport:
    protocol = protocol or (rules[0].protocol if rules else packets[0].protocol)
    dfa = build_dfa(rules, protocol)
    mismatches = sum(
        1 for p in packets if dfa.match_sids(p, net) != linear_match(rules, p, net)
    )
    if mismatches or not packets:
        nan = float("nan")
        return BenchReport(protocol, len(rules), len(packets), repetitions, nan, nan, nan,
                           True, mismatches)
    t_dfa, t_lin = time_matchers(
        lambda p: dfa.match_sids(p, net), lambda p: linear_match(rules, p, net),
        packets, repetitions,
    )
    return BenchReport(protocol, len(rules), len(packets), repetitions, t_dfa, t_lin,
                       t_lin / t_dfa, True, 0)


def run_benchmark(rules_per_protocol: int = 100, crafted_ratio: float = 1.0,
                  repetitions: int = 5, seed: int = 0,
                  packets_per_protocol: Optional[int] = None,
                  rule_sets: Optional[Mapping[Protocol, list[Rule]]] = None,
                  net: NetConfig = DEFAULT_NET, max_payload: int = 256) -> list[BenchReport]:
    """One report per protocol set (icmp, tcp, udp by default).

    Without ``packets_per_protocol`` each rule gets one crafted packet and
    random packets are added per ``crafted_ratio``.
    """
    if rules_per_protocol < 1:
        raise ValueError("rules_per_protocol must be >= 1")
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    if rule_sets is None:
        rule_sets = generate_rule_sets(rules_per_protocol, seed)
    reports = []
    for k, (protocol, rules) in enumerate(rule_sets.items()):
        if not rules:
            continue
        packets = traffic_for(rules, net, seed * 7919 + k, crafted_ratio,
                              count=packets_per_protocol, max_payload=max_payload)
        reports.append(bench_protocol(rules, packets, net, repetitions, protocol))
    return reports


def disjoint_port_rules(count: int, protocol: Protocol = Protocol.TCP,
                        sid_start: int = 1) -> list[Rule]:
    """Rules identical except for a distinct destination port and content."""
    return [
        Rule(Action.ALERT, protocol, ExternalNet(), PortAny(), HomeNet(), PortSingle(1000 + i),
             sid=sid_start + i, contents=(ContentSpec(b"probe-%05d" % i),))
        for i in range(count)
    ]


def scaling_trend(rule_counts: Iterable[int] = (100, 200, 400), packets: int = 2000,
                  repetitions: int = 5, seed: int = 0,
                  net: NetConfig = DEFAULT_NET) -> list[BenchReport]:
    reports = []
    for n in rule_counts:
        rules = disjoint_port_rules(n)
        pkts = traffic_for(rules, net, seed, 1.0, count=packets)
        reports.append(bench_protocol(rules, pkts, net, repetitions))
    return reports

