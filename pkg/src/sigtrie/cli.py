"""Command line interface: ``sigtrie curate|match|bench|gen-traffic|dump-trie``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import curation
from .bench import run_benchmark
from .dfa import build_dfas, match_packet
from .matching import NetConfig, NetConfigError, linear_match
from .packet import read_packets_jsonl, write_packets_jsonl
from .rules import MATCH_PROTOCOLS, Protocol, parse_port_spec, parse_rules_text
from .severity import load_feed
from .synth import DEFAULT_NET, generate_rule_sets
from .traffic import UnsatisfiableRule, random_packets, traffic_for


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIAGNOSTICS = 2
EXIT_DIVERGENCE = 3


def _err(msg: str) -> None:
    print(f"sigtrie: {msg}", file=sys.stderr)


def _read_rules(path):
    rules, diagnostics = parse_rules_text(Path(path).read_text(encoding="utf-8"))
    for d in diagnostics:
        _err(f"{path}:{d}")
    return rules, diagnostics


def load_net_config(path=None, home_net: Optional[str] = None,
                    port_vars: Sequence[str] = (), default: NetConfig = NetConfig()) -> NetConfig:
    """Net config from an optional JSON file, overridden by flags.

    File format: ``{"home_net": ["10.0.0.0/8"], "port_vars": {"HTTP_PORTS": "80"}}``.
    """
    homes = list(default.home_net)
    ports = dict(default.port_vars)
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        homes = list(data.get("home_net", homes))
        ports.update({k.lstrip("$"): parse_port_spec(str(v)) for k, v in data.get("port_vars", {}).items()})
    if home_net:
        homes = [n.strip() for n in home_net.split(",") if n.strip()]
    for item in port_vars:
        name, sep, spec = item.partition("=")
        if not sep:
            raise ValueError(f"--port-var expects NAME=SPEC, got {item!r}")
        ports[name.lstrip("$")] = parse_port_spec(spec)
    return NetConfig(tuple(homes), ports)


def load_curation_config(path=None, cutoff_year=None, severity_threshold=None):
    data = {}
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    relevance = {
        app: frozenset(parse_port_spec(str(p)) for p in ports)
        for app, ports in data.get("relevance_ports", {}).items()
    }
    return curation.CurationConfig(
        cutoff_year if cutoff_year is not None else data.get("cutoff_year", 2000),
        severity_threshold if severity_threshold is not None else data.get("severity_threshold", 6.0),
        relevance,
    )


def cmd_curate(rules_path, feed_path, config_path, out_dir, cutoff_year=None,
               severity_threshold=None) -> int:
    try:
        rules, diagnostics = _read_rules(rules_path)
        store, feed_errors = load_feed(feed_path)
        config = load_curation_config(config_path, cutoff_year, severity_threshold)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    for e in feed_errors:
        _err(f"{feed_path}: {e}")
    result = curation.run_pipeline(rules, store, config)
    curation.write_outputs(result, out_dir)
    for name, size in result.sizes().items():
        print(f"{curation.OUTPUT_FILES[name]}: {size}")
    return EXIT_DIAGNOSTICS if diagnostics else EXIT_OK


def _format_sids(sids) -> str:
    return "sid " + " ".join(str(s) for s in sorted(sids)) if sids else "-"


def cmd_match(rules_path, packets_path, net_config_path=None, trace_flag=False,
              home_net=None, port_vars=(),
              oracle: Callable = linear_match) -> int:
    """Match every packet against its protocol's trie and cross-check the oracle."""
    try:
        rules, diagnostics = _read_rules(rules_path)
        packets, packet_errors = read_packets_jsonl(Path(packets_path).read_text(encoding="utf-8"))
        net = load_net_config(net_config_path, home_net, port_vars)
        net.check_rules(r for r in rules if r.protocol in MATCH_PROTOCOLS)
    except NetConfigError as exc:
        _err(f"{exc} (variable {exc.variable})")
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    for e in packet_errors:
        _err(f"{packets_path}: {e}")

    dfas = build_dfas(rules)
    by_proto = {p: [r for r in rules if r.protocol is p] for p in dfas}
    divergent = 0
    for i, packet in enumerate(packets):
        dfa = dfas[packet.protocol]
        if trace_flag:
            trace = match_packet(dfa, packet, net)
            sids = trace.matched_sids
        else:
            sids = dfa.match_sids(packet, net)
        line = f"pkt {i}: {_format_sids(sids)}"
        if trace_flag:
            line += (f" | visited={trace.nodes_visited}"
                     f" eliminated={','.join(map(str, trace.sids_eliminated_per_level))}")
        print(line)
        expected = oracle(by_proto[packet.protocol], packet, net)
        if set(expected) != set(sids):
            divergent += 1
            _err(f"pkt {i}: trie {sorted(sids)} != linear {sorted(expected)}")
    if divergent:
        _err(f"{divergent} packet(s) diverged from the linear matcher")
        return EXIT_DIVERGENCE
    return EXIT_DIAGNOSTICS if diagnostics or packet_errors else EXIT_OK


def _rule_sets_from_file(path):
    rules, _ = _read_rules(path)
    return {p: [r for r in rules if r.protocol is p] for p in (Protocol.ICMP, Protocol.TCP, Protocol.UDP)}


def cmd_bench(args) -> int:
    try:
        net = load_net_config(args.net_config, args.home_net, args.port_var, default=DEFAULT_NET)
        rule_sets = _rule_sets_from_file(args.rules) if args.rules else None
        if rule_sets:
            net.check_rules(r for rs in rule_sets.values() for r in rs)
    except NetConfigError as exc:
        _err(f"{exc} (variable {exc.variable})")
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    reports = run_benchmark(
        rules_per_protocol=args.rules_per_proto,
        crafted_ratio=args.ratio,
        repetitions=args.repetitions,
        seed=args.seed,
        packets_per_protocol=args.packets,
        rule_sets=rule_sets,
        net=net,
    )
    for r in reports:
        print(r.summary())
    if args.report:
        Path(args.report).write_text(json.dumps([r.to_json() for r in reports], indent=2) + "\n")
    if any(r.mismatch_count for r in reports):
        return EXIT_DIVERGENCE
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def cmd_gen_traffic(args) -> int:
    try:
        net = load_net_config(args.net_config, args.home_net, args.port_var, default=DEFAULT_NET)
        if args.rules:
            rules, _ = _read_rules(args.rules)
        else:
            rules = [r for rs in generate_rule_sets(args.rules_per_proto, args.seed).values() for r in rs]
        packets = []
        for k, p in enumerate(MATCH_PROTOCOLS):
            subset = [r for r in rules if r.protocol is p]
            if subset:
                packets += traffic_for(subset, net, args.seed + k, args.ratio, count=args.count)
            elif args.count:
                packets += list(random_packets(p, args.seed + k, args.count))
    except NetConfigError as exc:
        _err(f"{exc} (variable {exc.variable})")
        return EXIT_ERROR
    except (OSError, ValueError, UnsatisfiableRule) as exc:
        _err(str(exc))
        return EXIT_ERROR
    text = write_packets_jsonl(packets)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_dump_trie(args) -> int:
    try:
        rules, _ = _read_rules(args.rules)
    except OSError as exc:
        _err(str(exc))
        return EXIT_ERROR
    protocols = [Protocol(args.protocol)] if args.protocol else list(MATCH_PROTOCOLS)
    dfas = build_dfas(rules, protocols)
    for p in protocols:
        print(f"# {p.value} ({dfas[p].rule_count} rules, {dfas[p].node_count()} nodes)")
        sys.stdout.write(dfas[p].dump())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--net-config", help="JSON file with home_net and port_vars")
    net.add_argument("--home-net", help="CIDR[,CIDR]")
    net.add_argument("--port-var", action="append", default=[], metavar="NAME=SPEC")
    net.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="sigtrie", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="split a rule file into disable/candidate/signature sets")
    p.add_argument("rules")
    p.add_argument("--feed", required=True, help="CVE severity CSV")
    p.add_argument("--config", help="JSON curation config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cutoff-year", type=int)
    p.add_argument("--severity-threshold", type=float)

    p = sub.add_parser("match", parents=[net], help="match packets (JSON Lines) against rules")
    p.add_argument("rules")
    p.add_argument("packets")
    p.add_argument("--trace", action="store_true")

    p = sub.add_parser("bench", parents=[net], help="time trie matching against the linear baseline")
    p.add_argument("--rules", help="use a .rules file instead of synthetic rule sets")
    p.add_argument("--rules-per-proto", type=int, default=100)
    p.add_argument("--packets", type=int, default=2000, help="packets per protocol")
    p.add_argument("--ratio", type=float, default=1.0, help="crafted packets per random packet")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--report", help="write a JSON report here")

    p = sub.add_parser("gen-traffic", parents=[net], help="write crafted and random packets")
    p.add_argument("--rules", help="craft for these rules (default: synthetic sets)")
    p.add_argument("--rules-per-proto", type=int, default=100)
    p.add_argument("--count", type=int, help="packets per protocol")
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--out")

    p = sub.add_parser("dump-trie", help="print the per-protocol tries")
    p.add_argument("rules")
    p.add_argument("--protocol", choices=[p.value for p in MATCH_PROTOCOLS])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "curate":
        return cmd_curate(args.rules, args.feed, args.config, args.out,
                          args.cutoff_year, args.severity_threshold)
    if args.command == "match":
        return cmd_match(args.rules, args.packets, args.net_config, args.trace,
                         args.home_net, args.port_var)
    if args.command == "bench":
        return cmd_bench(args)
    if args.command == "gen-traffic":
        return cmd_gen_traffic(args)
    return cmd_dump_trie(args)


if __name__ == "__main__":
    sys.exit(main())
