"""Synthetic belief networks and epoch-driven experiments.

One epoch is one simulated day.  Everything random flows from a single seeded
``random.Random`` so a config and seed fully determine the report bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, Sequence

from .config import BewaConfig, ProbationConfig
from .engine import Engine
from .errors import BewaError
from .graph import Edge
from .hashing import canonical_json, digest, hash_json
from .kernel import DecayParams

T0 = 1_700_000_000
DAY = 86400
IMPACT_MODELS = ("uniform", "power_law", "exp_decay")
REGIMES = ("incremental", "batch")


class SimError(BewaError):
    pass


class BadConfig(SimError):
    pass


class EmptySeries(SimError):
    pass


class NoInitialContradictions(SimError):
    pass


class EmptyCohort(SimError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = 100
    edge_density: float = 0.02
    contradiction_ratio: float = 0.15
    reassess_interval: int = 1
    author_impact: str = "uniform"
    regime: str = "incremental"
    epochs: int = 100
    seed: int = 0
    init_low: float = 0.4
    init_high: float = 0.6
    p_true: float = 0.6
    p_false: float = 0.2
    w_neutral: float = 0.5
    w_max: float = 0.7
    evidence: bool = True
    resolve_conflicts: bool = True
    treated_fraction: float = 0.2
    replication_start: int = 50
    replication_prob: float = 0.5
    replication_quality: float = 1.0
    decay_mode: str = "to_zero"
    decay_rate: float = 0.005
    decay_beta: float = 0.02
    smoothing: float = 0.2
    strict: bool = True

    def validate(self) -> None:
        if self.n_nodes < 1 or self.epochs < 0 or self.reassess_interval < 1:
            raise BadConfig("n_nodes, epochs and reassess_interval must be positive")
        if self.strict and not 0.02 <= self.edge_density <= 0.12:
            raise BadConfig(f"edge density {self.edge_density} outside [0.02, 0.12]")
        if self.strict and self.contradiction_ratio != 0 and not 0.05 <= self.contradiction_ratio <= 0.25:
            raise BadConfig(f"contradiction ratio {self.contradiction_ratio} outside [0.05, 0.25]")
        if not 0 <= self.edge_density <= 1 or not 0 <= self.contradiction_ratio <= 1:
            raise BadConfig("density and contradiction ratio must be probabilities")
        if self.author_impact not in IMPACT_MODELS:
            raise BadConfig(f"unknown author impact model {self.author_impact!r}")
        if self.regime not in REGIMES:
            raise BadConfig(f"unknown evidence regime {self.regime!r}")
        if not 0 <= self.init_low <= self.init_high <= 1:
            raise BadConfig("initial belief bounds must satisfy 0 <= low <= high <= 1")
        if not 0.5 <= self.w_neutral < self.w_max < 1:
            raise BadConfig("evidence weights must satisfy 0.5 <= w_neutral < w_max < 1")


def sim_config_from_mapping(values: Mapping[str, Any]) -> SimConfig:
    names = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(values) - names
    if unknown:
        raise BadConfig(f"unknown simulation keys {sorted(unknown)}")
    return SimConfig(**values)


@dataclass
class SyntheticNetwork:
    labels: list[str]
    truth: dict[str, int]
    initial: dict[str, float]
    impact: dict[str, float]
    edges: list[tuple[str, str, float]]
    conflicts: list[tuple[str, str]]
    treated: set[str] = field(default_factory=set)

    def to_json(self) -> dict[str, Any]:
        return {
            "labels": self.labels,
            "truth": self.truth,
            "initial": self.initial,
            "impact": self.impact,
            "edges": [list(e) for e in self.edges],
            "conflicts": [list(c) for c in self.conflicts],
            "treated": sorted(self.treated),
        }


def _impact(rng: random.Random, model: str, n: int) -> list[float]:
    if model == "uniform":
        return [rng.uniform(0.8, 1.0) for _ in range(n)]
    if model == "power_law":
        raw = [rng.paretovariate(2.0) for _ in range(n)]
        top = max(raw)
        return [0.8 + 0.2 * (x - 1.0) / (top - 1.0 or 1.0) for x in raw]
    return [0.8 + 0.2 * math.exp(-3.0 * rng.random()) for _ in range(n)]


def generate_network(cfg: SimConfig) -> SyntheticNetwork:
    cfg.validate()
    rng = random.Random(cfg.seed)
    labels = [f"claim-{i:05d}" for i in range(cfg.n_nodes)]
    truth = {c: int(rng.random() < 0.5) for c in labels}
    initial = {c: rng.uniform(cfg.init_low, cfg.init_high) for c in labels}
    impact = dict(zip(labels, _impact(rng, cfg.author_impact, cfg.n_nodes)))
    order = labels[:]
    rng.shuffle(order)
    edges = []
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if rng.random() < cfg.edge_density:
                edges.append((order[i], order[j], round(rng.uniform(0.3, 0.9), 6)))
    trues = [c for c in labels if truth[c]]
    falses = [c for c in labels if not truth[c]]
    wanted = round(cfg.contradiction_ratio * len(edges))
    conflicts: set[tuple[str, str]] = set()
    possible = len(trues) * len(falses)
    while len(conflicts) < min(wanted, possible):
        conflicts.add((rng.choice(trues), rng.choice(falses)))
    treated = set(rng.sample(labels, round(cfg.treated_fraction * len(labels)))) if cfg.treated_fraction else set()
    return SyntheticNetwork(labels, truth, initial, impact, edges, sorted(conflicts), treated)


# -- metrics --------------------------------------------------------------------------


def metric_truth_convergence(series: Sequence[float], target: float) -> float:
    if not series:
        raise EmptySeries("truth convergence needs at least one point")
    return sum(abs(w - target) for w in series) / len(series)


def metric_contradiction_suppression(current: int, initial: int) -> float:
    if initial <= 0:
        raise NoInitialContradictions("no contradictions at the start")
    return 1.0 - current / initial


def metric_replication_lift(treated_deltas: Sequence[float], control_deltas: Sequence[float]) -> float:
    if not treated_deltas or not control_deltas:
        raise EmptyCohort("both cohorts need at least one claim")
    return sum(treated_deltas) / len(treated_deltas) - sum(control_deltas) / len(control_deltas)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def metric_graph_entropy(beliefs: Sequence[float]) -> float:
    if not beliefs:
        return 0.0
    return sum(binary_entropy(p) for p in beliefs) / len(beliefs)


# -- running -------------------------------------------------------------------------------


def engine_config(cfg: SimConfig, base: BewaConfig | None = None) -> BewaConfig:
    base = base or BewaConfig()
    return dataclasses.replace(
        base,
        probation=ProbationConfig(enabled=False),
        decay=DecayParams(mode=cfg.decay_mode, rate=cfg.decay_rate, beta=cfg.decay_beta,
                          immunity_replications=10**9, immunity_citations=10**9),
        kernel=dataclasses.replace(base.kernel, delta=cfg.smoothing),
    )


@dataclass
class SimResult:
    config: SimConfig
    network: SyntheticNetwork
    engine: Engine
    ccs: dict[str, str]
    matrix: list[list[float]]
    propagation: list[dict[str, Any]]
    contradictions: list[int]

    def belief_series(self, label: str) -> list[float]:
        idx = self.network.labels.index(label)
        return [row[idx] for row in self.matrix]


def _conflict_count(engine: Engine, pairs: Sequence[tuple[str, str]], threshold: float) -> int:
    nodes = engine.graph.nodes
    return sum(1 for a, b in pairs if nodes[a].pi > threshold and nodes[b].pi > threshold)


def run(cfg: SimConfig, network: SyntheticNetwork | None = None, base: BewaConfig | None = None) -> SimResult:
    """Run the epoch loop: evidence, decay at the reassess interval, propagation, conflicts."""
    network = network or generate_network(cfg)
    engine = Engine.seeded(f"bewa-sim-{cfg.seed}", engine_config(cfg, base), clock=lambda: T0)
    rng = random.Random(f"evidence-{cfg.seed}")
    ccs = {}
    for label in network.labels:
        ccs[label] = engine.add_synthetic_claim(label, network.initial[label], T0, author=f"author-{label}")
    for src, dst, w in network.edges:
        engine.graph.add_edge(Edge(ccs[src], ccs[dst], "Deductive", w))
    conflict_pairs = []
    for a, b in network.conflicts:
        engine.declare_conflict(ccs[a], ccs[b])
        conflict_pairs.append((ccs[a], ccs[b]))
    order = [ccs[c] for c in network.labels]
    matrix = [[engine.graph.nodes[c].pi for c in order]]
    delta_c = engine.config.graph.delta_c
    contradictions = [_conflict_count(engine, conflict_pairs, delta_c)]
    propagation: list[dict[str, Any]] = []
    buffer: list[tuple[str, str, float, int]] = []
    span = cfg.w_max - cfg.w_neutral
    for epoch in range(1, cfg.epochs + 1):
        t = T0 + epoch * DAY
        engine.clock = lambda t=t: t
        if cfg.evidence:
            for label in network.labels:
                p = cfg.p_true if network.truth[label] else cfg.p_false
                if rng.random() < p:
                    w = cfg.w_neutral + span * network.impact[label]
                    buffer.append((label, "endorsement", w, t))
                if label in network.treated and epoch >= cfg.replication_start and rng.random() < cfg.replication_prob:
                    buffer.append((label, "replication", -1.0, t))
        flush = cfg.regime == "incremental" or epoch % cfg.reassess_interval == 0 or epoch == cfg.epochs
        if flush:
            for label, kind, w, at in buffer:
                if kind == "replication":
                    engine.apply_evidence(ccs[label], kind, cfg.replication_quality, at, source=f"rep-{label}-{at}",
                                          authors={f"replicator-{at % 7}"})
                else:
                    engine.apply_evidence(ccs[label], kind, 0.5, at, source=f"doc-{label}-{at}", weight=w)
            buffer.clear()
        if epoch % cfg.reassess_interval == 0:
            engine.decay_tick(t)
        result = engine.propagate()
        propagation.append({"epoch": epoch, "iterations": result.iterations, "converged": result.converged})
        if cfg.resolve_conflicts and conflict_pairs:
            engine.resolve_conflicts(t, threshold=delta_c)
        matrix.append([engine.graph.nodes[c].pi for c in order])
        contradictions.append(_conflict_count(engine, conflict_pairs, delta_c))
    return SimResult(cfg, network, engine, ccs, matrix, propagation, contradictions)


def report(result: SimResult) -> dict[str, Any]:
    cfg, net = result.config, result.network
    labels = net.labels
    taus = {label: metric_truth_convergence(result.belief_series(label)[1:] or result.belief_series(label), net.truth[label])
            for label in labels}
    true_labels = [c for c in labels if net.truth[c]]
    final = result.matrix[-1]
    final_dev = [abs(final[i] - net.truth[c]) for i, c in enumerate(labels) if net.truth[c]]
    tau_curve = []
    for epoch in range(1, len(result.matrix)):
        devs = [
            sum(abs(result.matrix[t][i] - 1.0) for t in range(1, epoch + 1)) / epoch
            for i, c in enumerate(labels) if net.truth[c]
        ]
        tau_curve.append(sum(devs) / len(devs) if devs else 0.0)
    kappa = None
    if result.contradictions[0] > 0:
        kappa = metric_contradiction_suppression(result.contradictions[-1], result.contradictions[0])
    lift = None
    if net.treated and cfg.epochs >= cfg.replication_start:
        start = cfg.replication_start - 1
        deltas = {c: final[i] - result.matrix[start][i] for i, c in enumerate(labels)}
        treated = [deltas[c] for c in labels if c in net.treated]
        control = [deltas[c] for c in labels if c not in net.treated]
        if treated and control:
            lift = metric_replication_lift(treated, control)
    entropy = [metric_graph_entropy(row) for row in result.matrix]
    ledger = result.engine.ledger
    return {
        "config": dataclasses.asdict(cfg),
        "network_hash": hash_json(net.to_json()),
        "edges": len(net.edges),
        "conflict_pairs": len(net.conflicts),
        "tau": taus,
        "mean_tau_true": sum(taus[c] for c in true_labels) / len(true_labels) if true_labels else None,
        "mean_tau_true_curve": tau_curve,
        "final_mean_abs_dev_true": sum(final_dev) / len(final_dev) if final_dev else None,
        "kappa": kappa,
        "contradictions": result.contradictions,
        "replication_lift": lift,
        "entropy_bits": entropy,
        "propagation": result.propagation,
        "ledger": {"entries": len(ledger.entries), "head": ledger.head.hex(), "digest": ledger.system_digest().hex()},
        "matrix_hash": digest(canonical_json(result.matrix).encode()).hex(),
    }


def report_bytes(rep: Mapping[str, Any]) -> bytes:
    return canonical_json(rep).encode("utf-8")


def matrix_csv(result: SimResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", *result.network.labels])
    for epoch, row in enumerate(result.matrix):
        writer.writerow([epoch, *(repr(x) for x in row)])
    return buf.getvalue()


def simulate(cfg: SimConfig) -> dict[str, Any]:
    return report(run(cfg))


def report_schema() -> dict[str, Any]:
    text = resources.files("bewa.data").joinpath("sim_report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
