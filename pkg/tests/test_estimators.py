import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sigtrie.curation import Outcome
from sigtrie.estimators import LinearMatcher, RuleCurator, TrieMatcher
from sigtrie.matching import MissingHomeNet, UnresolvedPortVariable
from sigtrie.packet import Packet
from sigtrie.rules import Protocol, parse_rule, serialize_rules
from sigtrie.severity import ingest_feed
from sigtrie.synth import DEFAULT_NET, generate_rule_sets
from sigtrie.traffic import traffic_for
from sigtrie.validation import RuleSetError, check_packets, check_rules

RULES = """\
alert tcp $EXTERNAL_NET any -> $HOME_NET 80 (msg:"xyz"; content:"abc"; reference:cve,2004-0001; sid:9001;)
drop udp any any -> any 53 (msg:"dns"; content:"|00 01|"; reference:cve,2004-0003; sid:9002;)
alert ip any any -> any any (msg:"ip only"; sid:9003;)
"""


def test_get_params_and_clone():
    m = TrieMatcher(home_net="10.0.0.0/8", port_vars={"HTTP_PORTS": "80"})
    assert m.get_params() == {"home_net": "10.0.0.0/8", "port_vars": {"HTTP_PORTS": "80"}}
    c = clone(m)
    assert c.get_params() == m.get_params() and c is not m
    m.set_params(home_net="192.168.0.0/16")
    assert m.home_net == "192.168.0.0/16"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TrieMatcher().predict([])
    with pytest.raises(NotFittedError):
        RuleCurator().transform([])


def test_fit_predict_text_and_dicts():
    m = TrieMatcher(home_net="10.0.0.0/8").fit(RULES)
    pkt = {"proto": "tcp", "src_ip": "1.2.3.4", "src_port": 999, "dst_ip": "10.0.0.1",
           "dst_port": 80, "payload_b64": "eHhhYmN4"}  # "xxabcx"
    assert m.predict([pkt]) == [frozenset({9001})]
    assert m.predict(pkt) == [frozenset({9001})]
    assert m.n_rules_ == 3
    assert m.dfas_[Protocol.TCP].rule_count == 1
    traces = m.trace([pkt])
    assert traces[0].matched_sids == {9001}


def test_trie_and_linear_agree():
    sets = generate_rule_sets(60, seed=5)
    rules = [r for rs in sets.values() for r in rs]
    packets = [p for rs in sets.values() for p in traffic_for(rs, DEFAULT_NET, 1, count=200)]
    kw = dict(home_net=DEFAULT_NET, port_vars=None)
    assert TrieMatcher(**kw).fit(rules).predict(packets) == LinearMatcher(**kw).fit(rules).predict(packets)


def test_fit_validates_net_config():
    with pytest.raises(MissingHomeNet):
        TrieMatcher().fit(RULES)
    with pytest.raises(UnresolvedPortVariable):
        LinearMatcher(home_net="10.0.0.0/8").fit(["alert tcp any any -> any $WEB (sid:1;)"])


def test_check_rules_errors():
    with pytest.raises(RuleSetError) as exc:
        check_rules("alert tcp any any -> any any (msg:\"x\";)")
    assert exc.value.diagnostics
    r = parse_rule("alert tcp any any -> any any (sid:1;)")
    with pytest.raises(RuleSetError):
        check_rules([r, r])
    with pytest.raises(TypeError):
        check_rules([42])
    with pytest.raises(TypeError):
        check_packets([42])
    assert check_packets(Packet(Protocol.TCP, "1.1.1.1", 1, "2.2.2.2", 2)) != []


def test_curator():
    store, _ = ingest_feed("CVE-2004-0001,7.5,2004\nCVE-2004-0003,3.1,2004")
    cur = RuleCurator(store=store)
    kept = cur.fit_transform(RULES)
    assert [r.sid for r in kept] == [9001]
    assert cur.predict(RULES) == [Outcome.SIGNATURE, Outcome.DISABLE, Outcome.CANDIDATE]
    assert [r.sid for r in cur.partition_.ids_alert] == [9001]
    assert len(cur.decisions_) == 3
    strict = clone(cur).set_params(severity_threshold=8.0).fit(RULES)
    assert strict.transform(RULES) == []
    assert serialize_rules(kept).startswith("alert tcp $EXTERNAL_NET")
