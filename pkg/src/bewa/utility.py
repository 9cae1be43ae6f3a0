"""Truth-promotion scoring, risk-weighted utility and query-time ranking."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .credibility import semantic_equivalence
from .errors import BewaError, UnknownClaim
from .graph import BeliefGraph


class UtilityError(BewaError):
    pass


class EmptyDomain(UtilityError):
    pass


def truth_utility(
    R: float, D: float, V: float, B: float, lambdas: Sequence[float] = (1.0, 1.0, 1.0, 1.0)
) -> float:
    l1, l2, l3, l4 = lambdas
    if min(lambdas) < 0:
        raise ValueError("utility weights must be non-negative")
    return l1 * R + l2 * D + l3 * V - l4 * B


def propagation_gate(utilities: Mapping[str, float], floor: float) -> set[str]:
    """Claims whose utility falls below ``floor`` and so may not propagate."""
    return {c for c, u in utilities.items() if u < floor}


def influence_coefficients(graph: BeliefGraph, source: str) -> dict[str, float]:
    """Strongest-path product of edge weights from ``source`` to each descendant."""
    graph.require(source)
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, math.inf):
            continue
        for e in graph.children(node):
            if e.weight <= 0:
                continue
            nd = d - math.log(e.weight)
            if nd < dist.get(e.dst, math.inf) - 1e-15:
                dist[e.dst] = nd
                heapq.heappush(heap, (nd, e.dst))
    return {c: min(1.0, math.exp(-d)) for c, d in dist.items() if c != source}


def truth_promotion_score(
    graph: BeliefGraph,
    claim: str,
    verified_true: Iterable[str],
    kappa: Mapping[str, float] | None = None,
    beliefs: Mapping[str, float] | None = None,
) -> tuple[float, float, float]:
    """Return ``(positive, negative, total)`` promotion for one claim.

    Descendants labelled true add ``kappa * pi``; all other descendants
    subtract the same quantity.
    """
    if claim not in graph.nodes:
        raise UnknownClaim(claim)
    truth = set(verified_true)
    kappa = influence_coefficients(graph, claim) if kappa is None else kappa
    pi = beliefs if beliefs is not None else {c: s.pi for c, s in graph.nodes.items()}
    pos = sum(k * pi[c] for c, k in kappa.items() if c in truth)
    neg = sum(k * pi[c] for c, k in kappa.items() if c not in truth)
    return pos, neg, pos - neg


def min_max_normalize(scores: Mapping[str, float]) -> dict[str, float]:
    """Rescale to [0, 1]; a constant vector maps to all zeros."""
    if not scores:
        return {}
    lo, hi = min(scores.values()), max(scores.values())
    if hi == lo:
        return {c: 0.0 for c in scores}
    return {c: (v - lo) / (hi - lo) for c, v in scores.items()}


def epistemic_loss(pi: float, truth: int, theta: float, lambda_fp: float, lambda_fn: float) -> float:
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if pi >= theta and truth == 0:
        return lambda_fp
    if pi < theta and truth == 1:
        return lambda_fn
    return 0.0


def weighted_belief_utility(pi: float, u_tp: float, lambda_fp: float) -> float:
    return pi * u_tp - (1.0 - pi) * lambda_fp


def domain_risk(costs: Sequence[tuple[float, float]], max_fp: float = 1.0, max_fn: float = 1.0) -> float:
    """Mean normalised error cost over the claims of one domain."""
    if not costs:
        raise EmptyDomain("domain has no claims")
    scale = max_fp + max_fn
    if scale <= 0:
        raise ValueError("cost maxima must be positive")
    return sum((fp + fn) / scale for fp, fn in costs) / len(costs)


def risk_gate_reason(rho: float, gamma: float, replication_status: str, authoritative: bool) -> str | None:
    """Admission check for high-risk domains; returns a rejection reason or None."""
    if rho > gamma and not (replication_status == "replicated" and authoritative):
        return "RiskGate"
    return None


@dataclass(frozen=True)
class ApplicationClass:
    id: str
    domains: frozenset[str] | None = None
    concepts: frozenset[str] | None = None
    methods: frozenset[str] | None = None
    risk_threshold: float = 1.0
    output: str = "top_k"
    u_tp: float = 1.0
    lambda_fp: float = 1.0

    def relevant(self, c: Candidate) -> bool:
        if self.domains is not None and not (c.domains & self.domains):
            return False
        if self.concepts is not None and c.concept not in self.concepts:
            return False
        if self.methods is not None and c.method not in self.methods:
            return False
        return True


@dataclass(frozen=True)
class Candidate:
    ccs: str
    pi: float
    domains: frozenset[str] = frozenset()
    concept: str = ""
    method: str = "other"
    embedding: tuple[float, ...] | None = None
    asserted_at: int = 0
    replication_status: str = "untested"


@dataclass(frozen=True)
class Query:
    embedding: tuple[float, ...] | None = None
    tags: frozenset[str] = field(default_factory=frozenset)


def priority_score(
    c: Candidate, app: ApplicationClass, sim: float, rho: float, fresh: bool, boost: float = 0.25
) -> float:
    utility = max(weighted_belief_utility(c.pi, app.u_tp, app.lambda_fp), 0.0)
    score = c.pi * utility * (0.5 + 0.5 * sim) * (1.0 - rho)
    return score * (1.0 + boost) if fresh else score


def prioritize(
    candidates: Iterable[Candidate],
    app: ApplicationClass,
    query: Query = Query(),
    k: int = 10,
    now: int = 0,
    domain_risks: Mapping[str, float] | None = None,
    freshness_days: float = 30.0,
    boost: float = 0.25,
) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    risks = domain_risks or {}
    scored = []
    for c in candidates:
        if not app.relevant(c):
            continue
        if query.tags and not (query.tags & (c.domains | {c.concept})):
            continue
        rho = max((risks.get(d, 0.0) for d in c.domains), default=0.0)
        if rho > app.risk_threshold:
            continue
        sim = 0.0
        if query.embedding is not None and c.embedding is not None:
            sim = max(-1.0, min(1.0, semantic_equivalence(query.embedding, c.embedding)))
        fresh = (now - c.asserted_at) / 86400.0 < freshness_days and c.replication_status == "untested"
        scored.append((c.ccs, priority_score(c, app, sim, rho, fresh, boost)))
    if app.output == "filter":
        return sorted(scored)
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored if app.output == "rank" else scored[:k]
