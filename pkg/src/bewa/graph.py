"""Typed claim graph: linkage, Noisy-OR propagation, conflicts, clusters, quarantine."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import networkx as nx

from .claims import TemporalAnchor
from .credibility import sigmoid
from .errors import BewaError, UnknownClaim
from .kernel import BeliefState, ClockRegression, _record

EDGE_KINDS = ("Deductive", "Evidential", "Semantic", "Contrapositive", "Replicative")
FOUNDATIONAL = frozenset({"Deductive", "Replicative"})
SUPPORT_FOR_EXEMPTION = frozenset({"Deductive", "Evidential", "Replicative"})
KIND_DECAY = {"Deductive": 0.9, "Replicative": 0.9, "Evidential": 0.8, "Contrapositive": 0.7, "Semantic": 0.6}
CONFLICT_SOURCES = ("declared_entailment", "semantic_antisim", "statistical")


class GraphError(BewaError):
    pass


class BadWeights(GraphError):
    pass


class CycleRejected(GraphError):
    pass


class TemporalIncoherence(GraphError):
    pass


class NoEvidence(GraphError):
    pass


class EmptyCluster(GraphError):
    pass


class NotFlagged(GraphError):
    pass


@dataclass(frozen=True)
class GraphParams:
    delta_conv: float = 1e-6
    max_iters: int = 100
    damping: float = 0.5
    schedule: str = "deterministic"
    delta_c: float = 0.5
    theta_c: float = 0.6
    theta_antisim: float = 0.9
    theta_instability: float = 0.15
    retraction_floor: float = 0.05
    cluster_tau: float = 0.0
    freeze_window: int = 10
    exact_cut_limit: int = 12
    exact_cover_limit: int = 20


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str
    weight: float
    decay: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {self.kind!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"edge weight {self.weight} outside [0, 1]")
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError(f"edge decay {self.decay} outside [0, 1]")


@dataclass(frozen=True)
class ConflictEdge:
    a: str
    b: str
    source: str = "declared_entailment"
    strength: float = 1.0

    @property
    def pair(self) -> tuple[str, str]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)


@dataclass(frozen=True)
class ClusterReport:
    members: frozenset[str]
    instability: float
    flagged: bool


@dataclass
class PropagationResult:
    beliefs: dict[str, float]
    iterations: int
    converged: bool
    frozen: frozenset[str] = frozenset()


@dataclass
class BeliefGraph:
    nodes: dict[str, BeliefState] = field(default_factory=dict)
    edges: dict[tuple[str, str], Edge] = field(default_factory=dict)
    conflict_edges: dict[tuple[str, str], ConflictEdge] = field(default_factory=dict)
    epoch: int = 0
    anchors: dict[str, TemporalAnchor] = field(default_factory=dict)
    attenuation: dict[str, float] = field(default_factory=dict)
    unstable: set[str] = field(default_factory=set)
    induction_queue: list[tuple[str, str]] = field(default_factory=list)
    marginals: dict[str, float] = field(default_factory=dict)

    def require(self, ccs: str) -> BeliefState:
        try:
            return self.nodes[ccs]
        except KeyError:
            raise UnknownClaim(ccs) from None

    def pi(self, ccs: str) -> float:
        return self.require(ccs).pi

    def parents(self, ccs: str) -> list[Edge]:
        return [e for e in self.edges.values() if e.dst == ccs]

    def children(self, ccs: str) -> list[Edge]:
        return [e for e in self.edges.values() if e.src == ccs]

    def _reaches(self, start: str, goal: str, kinds: frozenset[str]) -> bool:
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            for e in self.edges.values():
                if e.src == node and e.kind in kinds and e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return False

    def add_edge(self, edge: Edge) -> Edge:
        self.require(edge.src)
        self.require(edge.dst)
        if edge.src == edge.dst:
            raise CycleRejected("self loops are not allowed")
        if edge.kind in FOUNDATIONAL and self._reaches(edge.dst, edge.src, FOUNDATIONAL):
            raise CycleRejected(f"{edge.kind} edge {edge.src}->{edge.dst} closes a cycle")
        sup, dep = self.anchors.get(edge.src), self.anchors.get(edge.dst)
        if sup is not None and dep is not None and sup.tau_end is not None and sup.tau_end < dep.tau_start:
            raise TemporalIncoherence(f"{edge.src} expired before {edge.dst} was asserted")
        self.edges[(edge.src, edge.dst)] = edge
        return edge

    def add_conflict(self, edge: ConflictEdge) -> ConflictEdge:
        self.require(edge.a)
        self.require(edge.b)
        self.conflict_edges[edge.pair] = edge
        return edge

    def set_state(self, state: BeliefState) -> None:
        self.nodes[state.ccs] = state

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "nodes": [{"ccs": c, "pi": s.pi, "status": s.status} for c, s in sorted(self.nodes.items())],
            "edges": [
                {"from": e.src, "to": e.dst, "kind": e.kind, "weight": e.weight, "decay": e.decay}
                for e in sorted(self.edges.values(), key=lambda e: (e.src, e.dst))
            ],
            "conflict_edges": [
                {"a": c.a, "b": c.b, "source": c.source, "strength": c.strength}
                for _, c in sorted(self.conflict_edges.items())
            ],
        }


def link_claims(
    graph: BeliefGraph,
    a: str,
    b: str,
    lam: tuple[int, int, int],
    sim: float = 0.0,
    shared_evidence: float = 0.0,
    alpha: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> Edge | None:
    """Create a typed support edge from ``a`` to ``b`` if any linkage indicator is set.

    ``lam`` holds the (semantic, logical, evidential) indicators.  A pair that
    is semantically and evidentially linked but not logically is queued for
    later induction without affecting beliefs.
    """
    graph.require(a)
    graph.require(b)
    if any(x < 0 for x in alpha) or not math.isclose(sum(alpha), 1.0, abs_tol=1e-9):
        raise BadWeights(f"linkage weights {alpha} must be non-negative and sum to 1")
    if not -1.0 <= sim <= 1.0:
        raise ValueError("similarity outside [-1, 1]")
    sem, log, evd = (1 if x else 0 for x in lam)
    if not (sem or log or evd):
        return None
    if sem and evd and not log:
        graph.induction_queue.append((a, b))
    parts = {
        "Deductive": alpha[1] * log,
        "Evidential": alpha[2] * shared_evidence * evd,
        "Semantic": alpha[0] * sim * sem,
    }
    weight = min(1.0, max(0.0, sum(parts.values())))
    active = [k for k, flag in (("Deductive", log), ("Evidential", evd), ("Semantic", sem)) if flag]
    kind = max(active, key=lambda k: parts[k])
    return graph.add_edge(Edge(a, b, kind, weight, KIND_DECAY[kind]))


# -- propagation ------------------------------------------------------------------


def _silent(graph: BeliefGraph, gate: Iterable[str]) -> set[str]:
    return {c for c, s in graph.nodes.items() if s.masked} | set(gate)


def propagate(
    graph: BeliefGraph,
    params: GraphParams = GraphParams(),
    gate: Iterable[str] = (),
    leak: Mapping[str, float] | None = None,
) -> PropagationResult:
    """Asynchronous Noisy-OR sweeps to a fixpoint.

    Each active node mixes its own belief (the leak term) with parent support
    ``1 - (1 - leak) * prod(1 - w * decay * attenuation * parent)``.  Masked
    and gated nodes neither send nor receive.  Results go to
    ``graph.marginals``; kernel beliefs are not modified.
    """
    if not 0.0 < params.damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    silent = _silent(graph, gate)
    base = {c: s.pi for c, s in graph.nodes.items()}
    if leak:
        base.update(leak)
    beliefs = dict(base)
    incoming: dict[str, list[Edge]] = {c: [] for c in graph.nodes}
    for e in graph.edges.values():
        if e.src not in silent and e.dst not in silent:
            incoming[e.dst].append(e)
    if params.schedule == "priority":
        out_deg = {c: 0 for c in graph.nodes}
        for e in graph.edges.values():
            out_deg[e.src] += 1
        order = sorted((c for c in graph.nodes if c not in silent), key=lambda c: (-out_deg[c], c))
    else:
        order = sorted(c for c in graph.nodes if c not in silent)
    frozen: set[str] = set()
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        max_delta = 0.0
        moved: set[str] = set()
        for j in order:
            if j in frozen:
                continue
            parents = incoming[j]
            if not parents:
                target = base[j]
            else:
                prod = 1.0
                for e in parents:
                    strength = e.weight * e.decay * graph.attenuation.get(e.src, 1.0)
                    prod *= 1.0 - strength * beliefs[e.src]
                target = 1.0 - (1.0 - base[j]) * prod
            new = (1.0 - params.damping) * beliefs[j] + params.damping * target
            delta = abs(new - beliefs[j])
            if delta > params.delta_conv:
                moved.add(j)
            max_delta = max(max_delta, delta)
            beliefs[j] = new
        if max_delta < params.delta_conv:
            converged = True
            break
        history.append(max_delta)
        window = history[-params.freeze_window :]
        if len(window) == params.freeze_window and all(y >= x for x, y in zip(window, window[1:])):
            frozen |= _oscillating_set(graph, moved)
            history.clear()
    graph.marginals = beliefs
    return PropagationResult(beliefs, iterations, converged, frozenset(frozen))


def _oscillating_set(graph: BeliefGraph, moved: set[str]) -> set[str]:
    g = nx.DiGraph()
    g.add_nodes_from(moved)
    g.add_edges_from((e.src, e.dst) for e in graph.edges.values() if e.src in moved and e.dst in moved)
    comps = [c for c in nx.strongly_connected_components(g) if len(c) > 1] or [set(moved)]
    return set(min(comps, key=lambda c: (len(c), sorted(c))))


def bounded_influence_check(
    graph: BeliefGraph, node: str, delta: float, epsilon: float, params: GraphParams = GraphParams()
) -> tuple[int, int | None]:
    """Perturb one node's leak by ``delta`` and measure how deep the effect reaches.

    Returns ``(observed_depth, bound)`` where the bound is
    ``ceil(log(epsilon/delta)/log(min decay))`` (None when ``delta`` is 0).
    """
    graph.require(node)
    if delta == 0:
        return 0, None
    decays = [e.weight * e.decay for e in graph.edges.values()]
    if any(not 0.0 < g < 1.0 for g in decays):
        raise ValueError("bounded influence needs all edge factors in (0, 1)")
    run = replace(params, damping=1.0, delta_conv=min(params.delta_conv, epsilon * 1e-3), max_iters=max(params.max_iters, 1000))
    base = propagate(graph, run).beliefs
    leak = {node: min(1.0, graph.pi(node) + delta)}
    after = propagate(graph, run, leak=leak).beliefs
    graph.marginals = base
    depth_of = {node: 0}
    queue = deque([node])
    while queue:
        cur = queue.popleft()
        for e in graph.children(cur):
            if e.dst not in depth_of:
                depth_of[e.dst] = depth_of[cur] + 1
                queue.append(e.dst)
    observed = max((d for c, d in depth_of.items() if c != node and abs(after[c] - base[c]) >= epsilon), default=0)
    bound = math.ceil(math.log(epsilon / delta) / math.log(min(decays))) if decays else 0
    return observed, bound


# -- conflicts ----------------------------------------------------------------------


def detect_conflicts(
    graph: BeliefGraph,
    declared: Iterable[tuple[str, str]] = (),
    antisim: Mapping[tuple[str, str], float] | None = None,
    params: GraphParams = GraphParams(),
    beliefs: Mapping[str, float] | None = None,
) -> tuple[list[ConflictEdge], list[ConflictEdge]]:
    """Return ``(conflict_edges, violations)``.

    A pair becomes a conflict edge when declared contradictory or when its
    antisimilarity reaches ``theta_antisim``, and both beliefs exceed
    ``delta_c``.  Violations are the edges whose beliefs both exceed ``theta_c``.
    """
    pi = beliefs if beliefs is not None else {c: s.pi for c, s in graph.nodes.items()}
    found: dict[tuple[str, str], ConflictEdge] = {}
    for a, b in declared:
        graph.require(a)
        graph.require(b)
        found.setdefault(tuple(sorted((a, b))), ConflictEdge(a, b, "declared_entailment", 1.0))
    for (a, b), score in (antisim or {}).items():
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"antisimilarity {score} outside [0, 1]")
        if score >= params.theta_antisim:
            graph.require(a)
            graph.require(b)
            found.setdefault(tuple(sorted((a, b))), ConflictEdge(a, b, "semantic_antisim", score))
    edges = [c for _, c in sorted(found.items()) if pi[c.a] > params.delta_c and pi[c.b] > params.delta_c]
    violations = [c for c in edges if pi[c.a] > params.theta_c and pi[c.b] > params.theta_c]
    return edges, violations


def resolve_contradiction(
    graph: BeliefGraph,
    edge: ConflictEdge,
    evidence_mass: Mapping[str, float],
    t: int,
    pi_dagger: float = 0.01,
    params: GraphParams = GraphParams(),
) -> tuple[float, float]:
    """Rescale both beliefs by the log ratio of their evidence mass.

    When exactly one side has evidence it keeps its belief and the other
    collapses to ``pi_dagger``.  Both nodes are tagged unstable and their
    outgoing influence is attenuated by ``1 - instability`` of their cluster.
    """
    sa, sb = graph.require(edge.a), graph.require(edge.b)
    la, lb = evidence_mass.get(edge.a, 0.0), evidence_mass.get(edge.b, 0.0)
    if la < 0 or lb < 0:
        raise ValueError("evidence mass must be non-negative")
    if la == 0 and lb == 0:
        raise NoEvidence(f"neither {edge.a} nor {edge.b} has evidence")
    if la == 0:
        pa, pb = min(sa.pi, pi_dagger), sb.pi
    elif lb == 0:
        pa, pb = sa.pi, min(sb.pi, pi_dagger)
    else:
        d = math.log(la / lb)
        pa, pb = sa.pi * sigmoid(d), sb.pi * sigmoid(-d)
    total = pa + pb
    if total > 1.0:
        pa, pb = pa / total, pb / total
    for state, value in ((sa, pa), (sb, pb)):
        if t < state.last_event_at:
            raise ClockRegression(f"resolution at {t} precedes history of {state.ccs}")
        graph.set_state(_record(state, t, "conflict_resolution", pi=value))
    graph.add_conflict(edge)
    graph.unstable |= {edge.a, edge.b}
    for report in clusters(graph, params):
        if edge.a in report.members or edge.b in report.members:
            for c in (edge.a, edge.b):
                if c in report.members:
                    graph.attenuation[c] = 1.0 - report.instability
    return pa, pb


def instability(
    members: Iterable[str], conflict_edges: Iterable[ConflictEdge], beliefs: Mapping[str, float]
) -> float:
    group = set(members)
    if not group:
        raise EmptyCluster("cluster has no members")
    total = sum(
        beliefs[c.a] * beliefs[c.b] for c in conflict_edges if c.a in group and c.b in group and c.a != c.b
    )
    return total / len(group) ** 2


def clusters(graph: BeliefGraph, params: GraphParams = GraphParams()) -> list[ClusterReport]:
    """Connected components over strong support edges and conflict edges."""
    g = nx.Graph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from((e.src, e.dst) for e in graph.edges.values() if e.weight > params.cluster_tau)
    g.add_edges_from(c.pair for c in graph.conflict_edges.values())
    beliefs = {c: s.pi for c, s in graph.nodes.items()}
    reports = []
    for comp in sorted((sorted(c) for c in nx.connected_components(g))):
        iota = instability(comp, graph.conflict_edges.values(), beliefs)
        reports.append(ClusterReport(frozenset(comp), iota, iota > params.theta_instability))
    return reports


def _cut_weight(side: set[str], weights: Mapping[tuple[str, str], float]) -> float:
    return sum(w for (a, b), w in weights.items() if (a in side) != (b in side))


def _min_cut(members: Sequence[str], weights: Mapping[tuple[str, str], float], exact_limit: int) -> tuple[set[str], float]:
    nodes = sorted(members)
    if len(nodes) <= exact_limit:
        best: tuple[float, tuple[str, ...]] | None = None
        rest = nodes[1:]
        # Fix the first node on one side to avoid enumerating mirrored cuts.
        for r in range(0, len(rest)):
            for combo in itertools.combinations(rest, r):
                side = {nodes[0], *combo}
                other = tuple(sorted(set(nodes) - side))
                label = min(tuple(sorted(side)), other)
                key = (round(_cut_weight(side, weights), 12), label)
                if best is None or key < best:
                    best = key
        assert best is not None
        return set(best[1]), best[0]
    g = nx.Graph()
    g.add_nodes_from(nodes)
    for (a, b), w in weights.items():
        g.add_edge(a, b, weight=w)
    comps = sorted(sorted(c) for c in nx.connected_components(g))
    if len(comps) > 1:
        return set(comps[0]), 0.0
    value, (s1, s2) = nx.stoer_wagner(g)
    label = min(tuple(sorted(s1)), tuple(sorted(s2)))
    return set(label), value


def _has_hot_cycle(members: set[str], conflicts: Iterable[ConflictEdge], beliefs: Mapping[str, float], theta_c: float) -> bool:
    g = nx.Graph()
    g.add_edges_from(
        c.pair for c in conflicts
        if c.a in members and c.b in members and beliefs[c.a] > theta_c and beliefs[c.b] > theta_c
    )
    return bool(nx.cycle_basis(g))


def partition_cluster(
    members: Iterable[str],
    conflict_edges: Sequence[ConflictEdge],
    beliefs: Mapping[str, float],
    params: GraphParams = GraphParams(),
) -> list[frozenset[str]]:
    """Split a flagged cluster along minimum conflict cuts.

    Recursion stops when a part is a singleton, or its instability is at most
    ``theta_instability`` and it holds no conflict cycle of high-belief members.
    """
    group = set(members)
    if instability(group, conflict_edges, beliefs) <= params.theta_instability:
        raise NotFlagged("cluster instability does not exceed the flag threshold")
    parts: list[frozenset[str]] = []
    stack = [group]
    while stack:
        part = stack.pop()
        needs_split = len(part) > 1 and (
            instability(part, conflict_edges, beliefs) > params.theta_instability
            or _has_hot_cycle(part, conflict_edges, beliefs, params.theta_c)
        )
        if not needs_split:
            parts.append(frozenset(part))
            continue
        weights = {
            c.pair: beliefs[c.a] * beliefs[c.b] for c in conflict_edges if c.a in part and c.b in part
        }
        side, _ = _min_cut(sorted(part), weights, params.exact_cut_limit)
        stack.extend([part - side, side])
    return sorted(parts, key=lambda p: sorted(p))


def cut_weight(side: Iterable[str], conflict_edges: Iterable[ConflictEdge], beliefs: Mapping[str, float]) -> float:
    s = set(side)
    return sum(beliefs[c.a] * beliefs[c.b] for c in conflict_edges if (c.a in s) != (c.b in s))


# -- quarantine -------------------------------------------------------------------------


def _exact_cover(nodes: list[str], pairs: list[tuple[str, str]], pi: Mapping[str, float]) -> set[str]:
    best: list[Any] = [math.inf, ()]

    def search(chosen: frozenset[str], cost: float, remaining: list[tuple[str, str]]) -> None:
        if cost > best[0] + 1e-12:
            return
        open_pairs = [p for p in remaining if p[0] not in chosen and p[1] not in chosen]
        if not open_pairs:
            key = (round(cost, 12), tuple(sorted(chosen)))
            if key < (round(best[0], 12), best[1]):
                best[0], best[1] = cost, key[1]
            return
        u, v = open_pairs[0]
        search(chosen | {u}, cost + pi[u], open_pairs)
        search(chosen | {v}, cost + pi[v], open_pairs)

    search(frozenset(), 0.0, pairs)
    return set(best[1])


def quarantine(
    graph: BeliefGraph, params: GraphParams = GraphParams(), beliefs: Mapping[str, float] | None = None
) -> set[str]:
    """Smallest-total-belief set whose removal leaves no high-belief conflict."""
    pi = beliefs if beliefs is not None else {c: s.pi for c, s in graph.nodes.items()}
    pairs = [
        c.pair for c in graph.conflict_edges.values()
        if c.a != c.b and pi[c.a] > params.theta_c and pi[c.b] > params.theta_c
        and graph.nodes[c.a].status != "quarantined" and graph.nodes[c.b].status != "quarantined"
    ]
    g = nx.Graph()
    g.add_edges_from(pairs)
    chosen: set[str] = set()
    for comp in sorted(sorted(c) for c in nx.connected_components(g)):
        comp_pairs = sorted(p for p in pairs if p[0] in comp)
        if len(comp) <= params.exact_cover_limit:
            chosen |= _exact_cover(comp, comp_pairs, pi)
        else:
            for a, b in comp_pairs:
                if a not in chosen and b not in chosen:
                    chosen.add(min((a, b), key=lambda c: (pi[c], c)))
    return chosen


def apply_quarantine(graph: BeliefGraph, members: Iterable[str], t: int) -> None:
    for c in sorted(members):
        graph.set_state(_record(graph.require(c), t, "quarantine", status="quarantined"))


# -- retraction ---------------------------------------------------------------------------


def suppress_retraction(
    graph: BeliefGraph,
    retracted: str,
    t_r: int,
    floor: float = 0.05,
    theta_r: float = 0.55,
) -> set[str]:
    """Cap the retracted claim and its unsupported foundational descendants at ``floor``.

    A descendant keeps its belief when it has a support parent outside the
    retracted subtree with weight above ``theta_r``; the cascade stops there.
    Returns the set of capped claims.
    """
    graph.require(retracted)
    descendants: set[str] = set()
    stack = [retracted]
    while stack:
        cur = stack.pop()
        for e in graph.children(cur):
            if e.kind in FOUNDATIONAL and e.dst not in descendants and e.dst != retracted:
                descendants.add(e.dst)
                stack.append(e.dst)
    tainted = descendants | {retracted}

    def exempt(node: str) -> bool:
        return any(
            e.src not in tainted and e.kind in SUPPORT_FOR_EXEMPTION and e.weight > theta_r
            for e in graph.parents(node)
        )

    capped = {retracted}
    stack = [retracted]
    while stack:
        cur = stack.pop()
        for e in graph.children(cur):
            if e.kind in FOUNDATIONAL and e.dst not in capped and not exempt(e.dst):
                capped.add(e.dst)
                stack.append(e.dst)
    for c in capped:
        if t_r < graph.nodes[c].last_event_at:
            raise ClockRegression(f"retraction at {t_r} precedes history of {c}")
    for c in sorted(capped):
        state = graph.nodes[c]
        graph.set_state(_record(state, t_r, "retraction", pi=min(state.pi, floor)))
    return capped
