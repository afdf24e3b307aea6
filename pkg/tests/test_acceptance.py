"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed at the end of
the run by the terminal summary hook in conftest.py (and immediately with -s).
"""

import contextlib
import random
import time

from conftest import ACCEPTANCE_LINES, GOLDEN
from sigtrie.bench import TARGET_SPEEDUP, PASS_SPEEDUP, run_benchmark
from sigtrie.curation import CurationConfig, run_pipeline
from sigtrie.dfa import Level, build_dfa, match_packet, rule_path
from sigtrie.estimators import TrieMatcher
from sigtrie.matching import linear_match
from sigtrie.rules import (
    Action, ContentSpec, ExternalNet, HomeNet, PortAny, PortSingle, Protocol, Reference, Rule,
    parse_rule, serialize_rule,
)
from sigtrie.severity import ingest_feed
from sigtrie.synth import DEFAULT_NET, generate_rule_sets, generate_rules
from sigtrie.traffic import UnsatisfiableRule, craft_packet_for, traffic_for

PROTOCOLS = (Protocol.ICMP, Protocol.TCP, Protocol.UDP)


@contextlib.contextmanager
def criterion(number, title):
    details = []
    start = time.perf_counter()
    try:
        yield details
    except BaseException as exc:
        first = (str(exc).splitlines() or [""])[0]
        status, details = "FAIL", details + [f"{type(exc).__name__}: {first}"]
        raise
    else:
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        line = f"[{status}] criterion {number}: {title} ({elapsed:.1f}s)"
        if details:
            line += " | " + "; ".join(str(d) for d in details)
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_1_oracle_equivalence():
    with criterion(1, "trie == linear on 50 trials x 200 rules/protocol x 2000 packets") as info:
        start = time.perf_counter()
        mismatches = checked = 0
        for trial in range(50):
            sets = generate_rule_sets(200, seed=1000 + trial)
            for k, protocol in enumerate(PROTOCOLS):
                rules = sets[protocol]
                dfa = build_dfa(rules, protocol)
                # 2000 packets per trial, shared across the three protocols, 1:1 crafted:random
                count = 2000 // 3 + (1 if k < 2000 % 3 else 0)
                for p in traffic_for(rules, DEFAULT_NET, trial * 3 + k, 1.0, count=count):
                    checked += 1
                    if match_packet(dfa, p, DEFAULT_NET).matched_sids != linear_match(rules, p, DEFAULT_NET):
                        mismatches += 1
        elapsed = time.perf_counter() - start
        info += [f"{checked} packets", f"{mismatches} mismatches"]
        assert checked == 50 * 2000
        assert mismatches == 0
        assert elapsed < 60


def test_2_speedup():
    with criterion(2, f"speedup >= {PASS_SPEEDUP} at 100 rules/protocol, 2000 packets") as info:
        start = time.perf_counter()
        reports = run_benchmark(rules_per_protocol=100, crafted_ratio=1.0, repetitions=5,
                                seed=0, packets_per_protocol=2000)
        elapsed = time.perf_counter() - start
        for r in reports:
            info.append(f"{r.protocol.value} {r.speedup:.2f}x")
        target = all(r.meets_target for r in reports)
        info.append(f"{TARGET_SPEEDUP}x target {'met' if target else 'not met'}")
        assert all(r.mismatch_count == 0 for r in reports)
        assert all(r.packet_count >= 2000 for r in reports)
        assert all(r.speedup >= PASS_SPEEDUP for r in reports)
        assert elapsed < 120


def test_3_protocol_isolation():
    with criterion(3, "1000 tcp packets visit no udp/icmp trie node") as info:
        sets = generate_rule_sets(100, seed=3)
        rules = [r for rs in sets.values() for r in rs]
        matcher = TrieMatcher(home_net=DEFAULT_NET).fit(rules)
        packets = traffic_for(sets[Protocol.TCP], DEFAULT_NET, 3, 1.0, count=1000)
        matcher.predict(packets)
        visits = {p.value: d.visit_count for p, d in matcher.dfas_.items()}
        info.append(f"visits {visits}")
        assert len(packets) == 1000
        assert visits["tcp"] > 0
        assert visits["udp"] == 0 and visits["icmp"] == 0


def test_4_trie_structure():
    with criterion(4, "50 same-header rules share one node per header level; 20 shuffles equal") as info:
        rules = [
            Rule(Action.ALERT, Protocol.TCP, ExternalNet(), PortAny(), HomeNet(), PortSingle(80),
                 sid=100 + i, contents=(ContentSpec(b"payload-%03d" % i),),
                 references=(Reference("cve", f"2005-{i + 1:04d}"),))
            for i in range(50)
        ]
        dfa = build_dfa(rules, Protocol.TCP)
        levels = dfa.levels()
        header_counts = [len(levels[lv]) for lv in
                         (Level.SRC_IP, Level.SRC_PORT, Level.DST_IP, Level.DST_PORT)]
        # oracle: count distinct label prefixes
        prefixes = {tuple(rule_path(r))[:k] for r in rules for k in range(1, len(rule_path(r)) + 1)}
        info.append(f"header nodes per level {header_counts}")
        assert header_counts == [1, 1, 1, 1]
        assert dfa.node_count() == 1 + len(prefixes)
        rng = random.Random(4)
        reference = dfa.root.structure()
        for _ in range(20):
            shuffled = rules[:]
            rng.shuffle(shuffled)
            other = build_dfa(shuffled, Protocol.TCP)
            assert other == dfa and other.root.structure() == reference
        # the same check on a mixed synthetic corpus
        mixed = generate_rules(Protocol.UDP, 150, seed=44)
        base = build_dfa(mixed, Protocol.UDP)
        for _ in range(20):
            rng.shuffle(mixed)
            assert build_dfa(mixed, Protocol.UDP) == base


FEED = "CVE-2004-0001,7.5,2004\nCVE-2004-0003,3.1,2004\nCVE-1999-0001,9.0,1999\n"
FIXTURE = [
    'alert tcp any any -> any any (msg:"old"; reference:cve,1999-0001; sid:1;)',
    'drop tcp any any -> any 80 (msg:"hi drop"; reference:cve,2004-0001; sid:2;)',
    'alert tcp any any -> any 80 (msg:"hi alert"; reference:cve,2004-0001; sid:3;)',
    'alert udp any any -> any any (msg:"unknown"; reference:cve,2004-0002; sid:4;)',
]


def test_5_curation_partition():
    with criterion(5, "4-rule fixture exact; partition properties on 1000 random corpora") as info:
        start = time.perf_counter()
        store, _ = ingest_feed(FEED)
        result = run_pipeline([parse_rule(t) for t in FIXTURE], store, CurationConfig())
        sids = lambda rs: [r.sid for r in rs]
        assert (sids(result.disable), sids(result.candidate), sids(result.signature)) == ([1], [4], [2, 3])
        assert (sids(result.ips_drop), sids(result.ids_alert)) == ([2], [3])

        rng = random.Random(5)
        for n in range(1000):
            protocol = PROTOCOLS[n % 3]
            rules = generate_rules(protocol, rng.randint(0, 30), seed=rng.getrandbits(32))
            cves = sorted({ref.id for r in rules for ref in r.references if ref.scheme == "cve"})
            rows = [f"CVE-{c},{rng.randint(0, 100) / 10},{max(1999, int(c[:4]))}"
                    for c in cves if rng.random() < 0.7]
            store, errors = ingest_feed("\n".join(rows))
            assert errors == []
            cutoff = rng.randint(1999, 2009)
            threshold = rng.randint(0, 90) / 10
            config = CurationConfig(cutoff, threshold)
            result = run_pipeline(rules, store, config)
            parts = [set(sids(s)) for s in (result.disable, result.candidate, result.signature)]
            assert sum(map(len, parts)) == len(rules)
            assert set().union(*parts) == {r.sid for r in rules}
            drop, alert = set(sids(result.ips_drop)), set(sids(result.ids_alert))
            assert not drop & alert and drop | alert == parts[2]
            assert run_pipeline(rules, store, config) == result
            higher = run_pipeline(rules, store, CurationConfig(cutoff, threshold + 1.0))
            assert set(sids(higher.signature)) <= parts[2]
        elapsed = time.perf_counter() - start
        info.append("1000 corpora")
        assert elapsed < 30


def test_6_round_trip():
    with criterion(6, "parse(serialize(r)) == r on 1000 generated rules and the golden rule") as info:
        rules = [r for p in PROTOCOLS for r in generate_rules(p, 334, seed=6, extras=True)][:1000]
        failures = [r.sid for r in rules if parse_rule(serialize_rule(r)) != r]
        golden = parse_rule(GOLDEN)
        info.append(f"{len(rules)} rules, {len(failures)} failures")
        assert len(rules) == 1000 and failures == []
        assert isinstance(golden, Rule)
        assert serialize_rule(golden) == GOLDEN
        assert parse_rule(serialize_rule(golden)) == golden


def test_7_crafted_soundness():
    with criterion(7, "crafted packet matches exactly its rule, 1000 generated rules") as info:
        rules = [r for p in PROTOCOLS for r in generate_rules(p, 334, seed=7)][:1000]
        failures = []
        for i, rule in enumerate(rules):
            try:
                packet = craft_packet_for(rule, DEFAULT_NET, i)
            except (UnsatisfiableRule, AssertionError) as exc:
                failures.append((rule.sid, str(exc)))
                continue
            if linear_match([rule], packet, DEFAULT_NET) != {rule.sid}:
                failures.append((rule.sid, "no match"))
        info.append(f"{len(rules)} rules, {len(failures)} failures")
        assert len(rules) == 1000 and failures == []
