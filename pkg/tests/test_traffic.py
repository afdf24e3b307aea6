import base64
import ipaddress
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rules as rule_strategy
from sigtrie.matching import NetConfig, content_matches, linear_match
from sigtrie.packet import Packet, read_packets_jsonl, write_packets_jsonl
from sigtrie.rules import ContentSpec, Protocol, parse_rule
from sigtrie.synth import DEFAULT_NET, generate_rules
from sigtrie.traffic import (
    UnsatisfiableRule, craft_packet_for, random_packet, random_packets, traffic_for,
)


def test_craft_for_wildcard(net):
    rule = parse_rule("alert tcp any any -> any any (sid:1;)")
    p = craft_packet_for(rule, net, 0)
    assert p.protocol is Protocol.TCP
    assert linear_match([rule], p, net) == {1}


def test_craft_offset_depth(net):
    rule = parse_rule('alert tcp any any -> any any (content:"abc"; offset:4; depth:7; sid:1;)')
    for seed in range(20):
        p = craft_packet_for(rule, net, seed)
        found = content_matches(p.payload, rule.contents[0], 0)
        assert found is not None
        assert 4 <= found - 3 and found <= 4 + 7
    # with depth equal to the pattern length the only spot is the offset itself
    tight = parse_rule('alert tcp any any -> any any (content:"abc"; offset:4; depth:3; sid:2;)')
    assert craft_packet_for(tight, net, 1).payload[4:7] == b"abc"


def test_craft_unsatisfiable(net):
    rule = parse_rule('alert tcp any any -> any any (content:"abc"; depth:2; sid:1;)')
    with pytest.raises(UnsatisfiableRule) as exc:
        craft_packet_for(rule, net, 0)
    assert exc.value.content_index == 0
    rule = parse_rule('alert tcp any any -> any any (content:"a"; content:"bcd"; within:2; sid:1;)')
    with pytest.raises(UnsatisfiableRule) as exc:
        craft_packet_for(rule, net, 0)
    assert exc.value.content_index == 1


def test_craft_header_choices(net):
    rule = parse_rule("alert tcp $EXTERNAL_NET any -> $HOME_NET $HTTP_PORTS (sid:1;)")
    p = craft_packet_for(rule, net, 3)
    assert p.dst_ip == ipaddress.IPv4Address("10.0.0.1")
    assert not p.src_ip in ipaddress.IPv4Network("10.0.0.0/8")
    assert p.dst_port == 80


def test_craft_icmp_ports_zero(net):
    rule = parse_rule('alert icmp any any -> any any (content:"ping"; sid:1;)')
    p = craft_packet_for(rule, net, 0)
    assert (p.src_port, p.dst_port) == (0, 0)
    with pytest.raises(UnsatisfiableRule):
        craft_packet_for(parse_rule("alert icmp any any -> any 80 (sid:2;)"), net, 0)


def test_craft_negative_distance(net):
    rule = parse_rule('alert tcp any any -> any any (content:"abab"; content:"ab"; distance:-4; '
                      'content:"x"; distance:0; within:3; sid:1;)')
    for seed in range(30):
        assert linear_match([rule], craft_packet_for(rule, net, seed), net) == {1}


def test_random_packet_determinism():
    assert random_packet(Protocol.TCP, 1) == random_packet(Protocol.TCP, 1)
    assert random_packet(Protocol.TCP, 1) != random_packet(Protocol.TCP, 2)
    assert random_packet(Protocol.UDP, 5, max_payload=0).payload == b""
    assert random_packet(Protocol.ICMP, 5).dst_port == 0
    with pytest.raises(ValueError):
        random_packet(Protocol.TCP, 1, max_payload=-1)


def test_random_traffic_rarely_hits_long_pattern():
    rng = random.Random(11)
    rule = parse_rule(f'alert tcp any any -> any any (content:"|{rng.randbytes(16).hex(" ")}|"; sid:1;)')
    hits = sum(1 for p in random_packets(Protocol.TCP, 4, 10_000, 128)
               if linear_match([rule], p, NetConfig()))
    assert hits <= 1


def test_traffic_mix():
    rules = generate_rules(Protocol.UDP, 20, seed=1)
    pkts = traffic_for(rules, DEFAULT_NET, 3)
    assert len(pkts) == 40
    assert traffic_for(rules, DEFAULT_NET, 3) == pkts
    assert len(traffic_for(rules, DEFAULT_NET, 3, count=101)) == 101
    assert traffic_for([], DEFAULT_NET, 3) == []


@settings(max_examples=200, deadline=None)
@given(rule_strategy(st.sampled_from([Protocol.TCP, Protocol.UDP])), st.integers(0, 2**32))
def test_crafted_packet_soundness(rule, seed):
    names = [s.name for s in (rule.src_port, rule.dst_port) if hasattr(s, "name")]
    net = NetConfig.from_strings(["192.168.0.0/16"], {n: "1000:2000" for n in names})
    try:
        packet = craft_packet_for(rule, net, seed)
    except UnsatisfiableRule:
        return
    assert linear_match([rule], packet, net) == {rule.sid}


# --- packet model and JSON Lines -------------------------------------------


def test_packet_validation():
    with pytest.raises(ValueError):
        Packet(Protocol.ICMP, "1.1.1.1", 1, "2.2.2.2", 0)
    with pytest.raises(ValueError):
        Packet(Protocol.TCP, "1.1.1.1", 70000, "2.2.2.2", 0)
    with pytest.raises(ValueError):
        Packet(Protocol.IP, "1.1.1.1", 0, "2.2.2.2", 0)
    with pytest.raises(ValueError):
        Packet(Protocol.TCP, "1.1.1.1", 0, "2.2.2.2", 0, b"x" * 65536)


def test_jsonl_round_trip():
    pkts = list(random_packets(Protocol.TCP, 0, 20)) + list(random_packets(Protocol.ICMP, 1, 5))
    text = write_packets_jsonl(pkts)
    back, errors = read_packets_jsonl(text)
    assert errors == [] and back == pkts
    first = json.loads(text.splitlines()[0])
    assert set(first) == {"proto", "src_ip", "src_port", "dst_ip", "dst_port", "payload_b64"}
    assert base64.b64decode(first["payload_b64"]) == pkts[0].payload


def test_jsonl_empty_and_errors():
    assert read_packets_jsonl("") == ([], [])
    good = '{"proto":"udp","src_ip":"1.1.1.1","src_port":1,"dst_ip":"2.2.2.2","dst_port":2,"payload_b64":""}'
    lines = [
        good,
        good.replace('"dst_port":2', '"dst_port":70000'),
        good.replace('"udp"', '"sctp"'),
        good.replace('"payload_b64":""', '"payload_b64":"!!"'),
        good.replace('"1.1.1.1"', '"1.1.1"'),
        "not json",
        '{"proto":"udp"}',
    ]
    packets, errors = read_packets_jsonl("\n".join(lines))
    assert len(packets) == 1
    assert [e.line for e in errors] == [2, 3, 4, 5, 6, 7]
    assert "out of range" in errors[0].message
    assert "protocol" in errors[1].message
    assert "base64" in errors[2].message
