"""scikit-learn style front ends.

``fit`` takes rules, ``predict`` takes packets and returns one frozenset of
matched sids per packet.  Hyperparameters are constructor arguments, so
``get_params``/``set_params``/``clone`` behave as for any estimator.
"""

from __future__ import annotations

from collections import defaultdict

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .curation import CurationConfig, Outcome, classify, run_pipeline
from .dfa import MatchTrace, build_dfas, match_packet
from .matching import linear_match
from .rules import MATCH_PROTOCOLS
from .severity import SeverityStore
from .validation import check_net_config, check_packets, check_rules


class _MatcherBase(BaseEstimator):
    def __init__(self, home_net=None, port_vars=None):
        self.home_net = home_net
        self.port_vars = port_vars

    def _fit_common(self, X):
        rules = check_rules(X)
        net = check_net_config(self.home_net, self.port_vars)
        net.check_rules(r for r in rules if r.protocol in MATCH_PROTOCOLS)
        self.net_ = net
        self.n_rules_ = len(rules)
        return rules

    def fit_predict(self, X, packets):
        return self.fit(X).predict(packets)


class TrieMatcher(_MatcherBase):
    """Fast-elimination matcher over per-protocol signature tries.

    Parameters
    ----------
    home_net : str, list of str or NetConfig, optional
        Protected networks, e.g. ``"10.0.0.0/8,192.168.0.0/16"``.
    port_vars : dict, optional
        Port variable values, e.g. ``{"HTTP_PORTS": "80"}``.

    Attributes
    ----------
    dfas_ : dict
        Protocol -> :class:`~sigtrie.dfa.SignatureTrieDfa`.
    """

    def fit(self, X, y=None):
        rules = self._fit_common(X)
        self.dfas_ = build_dfas(rules)
        return self

    def predict(self, X):
        check_is_fitted(self, "dfas_")
        out = []
        for packet in check_packets(X):
            dfa = self.dfas_.get(packet.protocol)
            out.append(frozenset(dfa.match_sids(packet, self.net_)) if dfa else frozenset())
        return out

    def trace(self, X) -> list[MatchTrace]:
        check_is_fitted(self, "dfas_")
        return [match_packet(self.dfas_[p.protocol], p, self.net_) for p in check_packets(X)]


class LinearMatcher(_MatcherBase):
    """Rule-by-rule baseline with the same interface as :class:`TrieMatcher`."""

    def fit(self, X, y=None):
        rules = self._fit_common(X)
        by_proto = defaultdict(list)
        for rule in rules:
            by_proto[rule.protocol].append(rule)
        self.rules_by_protocol_ = dict(by_proto)
        return self

    def predict(self, X):
        check_is_fitted(self, "rules_by_protocol_")
        return [
            frozenset(linear_match(self.rules_by_protocol_.get(p.protocol, ()), p, self.net_))
            for p in check_packets(X)
        ]


class RuleCurator(TransformerMixin, BaseEstimator):
    """Timeline/severity/action curation as a transformer.

    ``fit`` runs the full pipeline and keeps the partition; ``transform``
    returns the rules that reach the signature set; ``predict`` returns the
    per-rule outcome.
    """

    def __init__(self, store=None, cutoff_year=2000, severity_threshold=6.0,
                 relevance_ports=None):
        self.store = store
        self.cutoff_year = cutoff_year
        self.severity_threshold = severity_threshold
        self.relevance_ports = relevance_ports

    def _config(self) -> CurationConfig:
        return CurationConfig(self.cutoff_year, self.severity_threshold,
                              dict(self.relevance_ports or {}))

    def _store(self) -> SeverityStore:
        return self.store if self.store is not None else SeverityStore()

    def fit(self, X, y=None):
        rules = check_rules(X)
        self.partition_ = run_pipeline(rules, self._store(), self._config())
        self.decisions_ = self.partition_.decisions
        return self

    def predict(self, X) -> list[Outcome]:
        check_is_fitted(self, "partition_")
        config, store = self._config(), self._store()
        return [classify(r, store, config).outcome for r in check_rules(X)]

    def transform(self, X):
        check_is_fitted(self, "partition_")
        rules = check_rules(X)
        return [r for r, o in zip(rules, self.predict(rules)) if o is Outcome.SIGNATURE]
