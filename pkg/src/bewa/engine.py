"""The engine: owns the claim store, belief graph and ledger, and keeps them in step.

Every belief transition appends exactly one ledger transaction, so a claim's
ledger trace and its belief history always have the same length.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import credibility as cred
from . import graph as g
from . import kernel as k
from . import utility as u
from .claims import (
    ClaimRecord,
    ClaimStore,
    ContextTag,
    IngestResult,
    MetadataRecord,
    canonical_author_id,
    canonical_claim_signature,
    load_corpus,
)
from .config import BewaConfig
from .errors import BewaError, UnknownClaim
from .hashing import hash_json
from .ledger import SYSTEM_ACTOR, ForkRejected, KeyRegistry, Ledger
from .signing import generate_key, key_from_seed, private_bytes, private_from_bytes, public_hex

log = logging.getLogger(__name__)

STATE_FILE = "state.json"
LEDGER_FILE = "ledger.bin"
KEY_FILE = "system.key"


class EngineError(BewaError):
    pass


@dataclass
class EvidenceRecord:
    id: str
    ccs: str
    kind: str
    quality: float
    weight: float
    t: int
    source: str = ""


@dataclass
class ClaimExtras:
    """Per-claim inputs that are not part of the canonical record."""

    prior: float = 0.5
    prior_inputs: dict[str, float] = field(default_factory=dict)
    embedding: tuple[float, ...] | None = None
    costs: tuple[float, float] = (0.5, 0.5)
    label: str | None = None
    exclusive_set: str | None = None
    distinctiveness: float = 0.0


class Engine:
    def __init__(
        self,
        config: BewaConfig | None = None,
        key: Ed25519PrivateKey | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.config = config or BewaConfig()
        self.key = key or generate_key()
        self.clock = clock
        self.store = ClaimStore()
        self.graph = g.BeliefGraph()
        self.registry = KeyRegistry()
        self.registry.register(SYSTEM_ACTOR, public_hex(self.key))
        self.ledger = Ledger(self.registry)
        self.extras: dict[str, ClaimExtras] = {}
        self.evidence: dict[str, list[EvidenceRecord]] = {}
        self.citations: dict[str, list[cred.CitationEvent]] = {}
        self.replications: dict[str, list[cred.ReplicationEvent]] = {}
        self.profiles: dict[str, cred.AuthorProfile] = {}
        self.declared_conflicts: set[tuple[str, str]] = set()
        self.conflict_seen: dict[tuple[str, str], int] = {}
        self.retracted: dict[str, int] = {}
        self.labels: dict[str, str] = {}
        self._lock = threading.RLock()

    # -- helpers -------------------------------------------------------------------

    def now(self) -> int:
        return int(self.clock())

    def state(self, ccs: str) -> k.BeliefState:
        return self.graph.require(ccs)

    def resolve(self, ref: str) -> str:
        """Map a corpus label or ccs to a ccs."""
        ccs = self.labels.get(ref, ref)
        if ccs not in self.graph.nodes:
            raise UnknownClaim(ref)
        return ccs

    def _commit(self, new: k.BeliefState, op_detail: Mapping[str, Any] | None = None, tx_type: str = "UPDATE") -> k.BeliefState:
        old = self.graph.nodes.get(new.ccs)
        start = len(old.history) if old is not None else 0
        for t, pi, cause in new.history[start:]:
            detail = {"status": new.status if (t, pi, cause) == new.history[-1] else None, "cause": cause}
            if op_detail:
                detail.update(op_detail)
            detail = {key: v for key, v in detail.items() if v is not None}
            self.ledger.append_tx(tx_type, new.ccs, cause, pi, t, SYSTEM_ACTOR, self.key, detail)
            tx_type = "UPDATE"
        self.graph.set_state(new)
        return new

    def _sync_graph_states(self, before: Mapping[str, k.BeliefState], detail: Mapping[str, Any] | None = None) -> list[str]:
        """Write ledger entries for states that a graph operation changed in place."""
        changed = []
        for ccs, state in sorted(self.graph.nodes.items()):
            old = before.get(ccs)
            if old is not None and len(state.history) > len(old.history):
                self.graph.nodes[ccs] = old
                self._commit(state, detail)
                changed.append(ccs)
        return changed

    # -- ingestion -------------------------------------------------------------------

    def _prior_for(self, raw: Mapping[str, Any], md: MetadataRecord, record: ClaimRecord) -> tuple[float, dict[str, float]]:
        given = raw.get("prior")
        if isinstance(given, (int, float)):
            return float(given), {}
        inputs: dict[str, float] = {}
        if isinstance(given, Mapping):
            inputs = {key: float(v) for key, v in given.items() if key in "AVMD" and v is not None}
        else:
            if md.venue is not None:
                inputs["V"] = (md.venue.R + md.venue.T + md.venue.C) / 3.0
            inputs["M"] = self.config.method_rigour.get(record.context.method, 0.4)
            profile = self.profiles.get(record.author)
            if profile is not None:
                inputs["A"] = cred.author_score(profile, self.config.credibility)
        value = k.prior(k.PriorInputs(**inputs), self.config.kernel.prior_weights)
        return value, inputs

    def _risk_gate(self, record: ClaimRecord, md: MetadataRecord) -> str | None:
        uc = self.config.utility
        for d in record.domain_set:
            costs = [self.extras[c].costs for c, r in self.store.claims.items() if d in r.domain_set and c in self.extras]
            costs.append((uc.default_fp, uc.default_fn))
            rho = u.domain_risk(costs, uc.max_fp, uc.max_fn)
            reason = u.risk_gate_reason(rho, uc.risk_gamma, md.replication_status, md.source_flags.authoritative)
            if reason:
                return reason
        return None

    def ingest_entries(self, entries: list[dict[str, Any]], trusted_keys: Iterable[str] = (), t: int | None = None) -> IngestResult:
        with self._lock:
            for raw in entries:
                prof = (raw.get("author") or {}).get("profile") if isinstance(raw, Mapping) else None
                if prof:
                    self._register_profile(raw["author"], prof)
            trusted = set(trusted_keys) | set(self.registry.active.values())
            result = self.store.ingest(entries, trusted, gate=self._risk_gate)
            probation = self.config.probation
            for parsed in result.entries:
                raw, rec, md = parsed.raw, parsed.record, parsed.metadata
                value, inputs = self._prior_for(raw, md, rec)
                costs = raw.get("costs") or {}
                self.extras[rec.ccs] = ClaimExtras(
                    prior=value,
                    prior_inputs=inputs,
                    embedding=tuple(cred.unit_vector(raw["embedding"])) if raw.get("embedding") else None,
                    costs=(float(costs.get("fp", self.config.utility.default_fp)), float(costs.get("fn", self.config.utility.default_fn))),
                    label=str(raw["id"]) if "id" in raw else None,
                    exclusive_set=raw.get("exclusive_set"),
                    distinctiveness=float(raw.get("distinctiveness", 0.0)),
                )
                if "id" in raw:
                    self.labels[str(raw["id"])] = rec.ccs
            self._normalize_exclusive()
            for parsed in result.entries:
                rec, md = parsed.record, parsed.metadata
                at = rec.asserted_at if t is None else t
                pi0 = probation.params.pi0 if probation.enabled else self.extras[rec.ccs].prior
                status = "probational" if probation.enabled else "canonical"
                domain = sorted(rec.domain_set)[0] if rec.domain_set else rec.context.concept
                state = k.new_state(rec.ccs, pi0, at, status, domain)
                if rec.parent_ccs is not None and rec.parent_ccs in self.graph.nodes:
                    parent = self.graph.nodes[rec.parent_ccs]
                    when = max(at, parent.last_event_at)
                    marked = replace(parent, history=parent.history + ((when, parent.pi, "superseded"),))
                    self._commit(marked, {"superseded_by": rec.ccs, "relation": parsed.raw.get("relation", "refines")},
                                 "DEPRECATE")
                self._commit(state, {"caid": rec.author, "doi": md.doi, "version": rec.version,
                                     "parent": rec.parent_ccs, "prior": self.extras[rec.ccs].prior}, "INSERT")
                self.graph.anchors[rec.ccs] = self.store.anchors[rec.ccs]
            for parsed in result.entries:
                self._link_entry(parsed.record.ccs, parsed.raw)
            return result

    def ingest_file(self, path: str | Path, trusted_keys: Iterable[str] = ()) -> IngestResult:
        return self.ingest_entries(load_corpus(path), trusted_keys)

    def _register_profile(self, author: Mapping[str, Any], prof: Mapping[str, Any]) -> None:
        ident = canonical_author_id(author.get("orcid"), author.get("name", ""), author.get("affiliation", ""))
        reviews = tuple(cred.Review(r.get("quality"), r.get("verified", True), r.get("t", 0)) for r in prof.get("reviews", []))
        fields = {key: v for key, v in prof.items() if key != "reviews"}
        self.profiles[ident.caid] = cred.AuthorProfile(ident.caid, reviews=reviews, **fields)

    def _normalize_exclusive(self) -> None:
        groups: dict[str, dict[str, float]] = {}
        for c, ex in self.extras.items():
            if ex.exclusive_set:
                groups.setdefault(ex.exclusive_set, {})[c] = ex.prior
        for members in groups.values():
            for c, v in k.normalize_exclusive(members).items():
                self.extras[c].prior = v

    def _link_entry(self, ccs: str, raw: Mapping[str, Any]) -> None:
        for link in raw.get("links") or []:
            try:
                target = self.resolve(str(link["target"]))
                # a link names a claim this one builds on, so support flows from the target
                self.graph.add_edge(g.Edge(target, ccs, link.get("kind", "Evidential"), float(link.get("weight", 0.5)),
                                           float(link.get("decay", 1.0))))
            except (BewaError, KeyError, ValueError) as exc:
                log.warning("skipping link from %s: %s", ccs[:12], exc)
        for other in raw.get("contradicts") or []:
            try:
                target = self.resolve(str(other))
            except UnknownClaim:
                log.warning("skipping contradiction from %s to unknown %s", ccs[:12], other)
                continue
            self.declared_conflicts.add(tuple(sorted((ccs, target))))

    def add_claim(self, entry: Mapping[str, Any], t: int | None = None) -> tuple[str | None, list[str]]:
        result = self.ingest_entries([dict(entry)], t=t)
        if result.accepted:
            return result.accepted[0].ccs, []
        return None, result.rejected[0]["reasons"] if result.rejected else ["Rejected"]

    def add_synthetic_claim(
        self, label: str, pi0: float, t: int, author: str = "synthetic", concept: str = "sim", status: str = "canonical"
    ) -> str:
        """Insert a claim without corpus metadata (used by the simulator)."""
        with self._lock:
            ident = canonical_author_id(None, author, "")
            rec = ClaimRecord(canonical_claim_signature(label, ident.caid, t), label, ident.caid, t,
                              ContextTag(concept, "simulation"), frozenset({concept}))
            self.store.add(ident, rec)
            self.extras[rec.ccs] = ClaimExtras(prior=pi0, label=label)
            self.labels[label] = rec.ccs
            self._commit(k.new_state(rec.ccs, pi0, t, status, concept), {"caid": ident.caid, "prior": pi0}, "INSERT")
            return rec.ccs

    def add_edge(self, src: str, dst: str, kind: str, weight: float, decay: float = 1.0) -> g.Edge:
        return self.graph.add_edge(g.Edge(self.resolve(src), self.resolve(dst), kind, weight, decay))

    def declare_conflict(self, a: str, b: str) -> None:
        self.declared_conflicts.add(tuple(sorted((self.resolve(a), self.resolve(b)))))

    # -- evidence --------------------------------------------------------------------

    def apply_evidence(
        self,
        ccs: str,
        kind: str,
        quality: float,
        t: int | None = None,
        source: str = "",
        weight: float | None = None,
        intent: int = 1,
        cluster: str | None = None,
        authors: Iterable[str] = (),
        institutions: Iterable[str] = (),
        funding: Iterable[str] = (),
    ) -> k.BeliefState:
        with self._lock:
            ccs = self.resolve(ccs)
            if ccs in self.ledger.superseded:
                raise ForkRejected(f"{ccs} was superseded by {self.ledger.superseded[ccs]}")
            t = self.now() if t is None else int(t)
            unit = k.EvidenceUnit(kind, quality, t, source, weight)
            w = k.evidence_weight(unit, self.config.kernel)
            state = self.state(ccs)
            if t < state.last_event_at:
                raise k.ClockRegression(f"evidence at {t} precedes last event at {state.last_event_at}")
            refs = self.evidence.setdefault(ccs, [])
            ref = EvidenceRecord(f"ev-{len(refs) + 1}", ccs, kind, quality, w, t, source)
            refs.append(ref)
            if kind in ("citation", "endorsement"):
                self.citations.setdefault(ccs, []).append(
                    cred.CitationEvent(source or ref.id, ccs, t, quality, intent, cluster if cluster is not None else source))
            elif kind == "replication":
                self.replications.setdefault(ccs, []).append(
                    cred.ReplicationEvent(source or ref.id, ccs, 1, w, frozenset(authors), frozenset(institutions), frozenset(funding)))
            detail = {"evidence": ref.id, "kind": kind, "weight": w}
            if state.status == "probational" and kind != "contradiction":
                c_i, r_i = self._maturation_inputs(ccs, t)
                new = k.probation_step(state, c_i, r_i, t, self.config.probation.params)
            else:
                new = k.apply_evidence(state, unit, self.config.kernel)
            if new is state or len(new.history) == len(state.history):
                # Record the evidence even when belief is unchanged.
                new = replace(new, history=new.history + ((t, new.pi, f"evidence:{kind}"),))
            return self._commit(new, detail)

    def _maturation_inputs(self, ccs: str, t: int) -> tuple[float, float]:
        c_i, _ = cred.citation_influence(self.citations.get(ccs, []), t, self.config.credibility.lambda_c,
                                         self.config.credibility.epsilon)
        r_i, _ = cred.replication_score(self.replications.get(ccs, []), self._provenance(ccs))
        return max(c_i, 0.0), max(r_i, 0.0)

    def _provenance(self, ccs: str) -> cred.Provenance:
        rec = self.store.get(ccs)
        md = self.store.metadata.get(ccs)
        author = self.store.authors.get(rec.author)
        return cred.Provenance(
            frozenset({rec.author}),
            frozenset({author.affiliation} if author and author.affiliation else ()),
            frozenset({md.funding} if md and md.funding else ()),
        )

    def reset_from_replications(self, ccs: str, replications: list[k.Replication], t: int) -> k.BeliefState:
        with self._lock:
            state = self.state(self.resolve(ccs))
            return self._commit(k.replicative_reset(state, replications, t, self.config.reset))

    # -- time ----------------------------------------------------------------------

    def decay_tick(self, now: int | None = None) -> list[str]:
        """Advance every claim to ``now``: decay canonical beliefs, age probation."""
        with self._lock:
            now = self.now() if now is None else int(now)
            iota = self._node_instability()
            changed = []
            for ccs in sorted(self.graph.nodes):
                state = self.graph.nodes[ccs]
                if ccs in self.ledger.superseded or state.status == "terminally_discredited":
                    continue
                if now < state.last_event_at:
                    continue
                if state.status == "probational":
                    if not self.config.probation.enabled:
                        continue
                    c_i, r_i = self._maturation_inputs(ccs, now)
                    new = k.probation_step(state, c_i, r_i, now, self.config.probation.params)
                else:
                    new = k.decay(
                        state, now, self.config.decay, iota.get(ccs, 0.0),
                        replications=len(self.replications.get(ccs, [])),
                        citations=len(self.citations.get(ccs, [])),
                        epsilon_stale=self.config.kernel.epsilon_stale,
                    )
                if len(new.history) > len(state.history):
                    self._commit(new)
                    changed.append(ccs)
                else:
                    self.graph.set_state(new)
            return changed

    def _node_instability(self) -> dict[str, float]:
        out: dict[str, float] = {}
        if not self.graph.conflict_edges:
            return out
        for report in g.clusters(self.graph, self.config.graph):
            for c in report.members:
                out[c] = report.instability
        return out

    # -- graph-level operations ---------------------------------------------------

    def utility_scores(self) -> dict[str, float]:
        uc = self.config.utility
        scores = {}
        for ccs in self.graph.nodes:
            ex = self.extras.get(ccs, ClaimExtras())
            _, r_star = cred.replication_score(self.replications.get(ccs, []), self._provenance(ccs))
            events = self.citations.get(ccs, [])
            if events:
                n = len(events)
                k_clusters = len({e.cluster_id for e in events})
                ratio = cred.citation_entropy(events) / math.log(k_clusters) if k_clusters > 1 else 0.0
                echo = 1.0 - ratio if n > 1 else 0.0
            else:
                echo = 0.0
            md = self.store.metadata.get(ccs)
            venue = (md.venue.R + md.venue.T + md.venue.C) / 3.0 if md and md.venue else 0.0
            scores[ccs] = u.truth_utility(r_star, ex.distinctiveness, venue, echo, uc.lambdas)
        return scores

    def propagation_gate(self) -> set[str]:
        floor = self.config.utility.propagation_floor
        if floor is None:
            return set()
        return u.propagation_gate(self.utility_scores(), floor)

    def propagate(self, max_iters: int | None = None, schedule: str | None = None, damping: float | None = None) -> g.PropagationResult:
        with self._lock:
            params = self.config.graph
            changes = {}
            if max_iters is not None:
                changes["max_iters"] = max_iters
            if schedule is not None:
                changes["schedule"] = schedule
            if damping is not None:
                changes["damping"] = damping
            return g.propagate(self.graph, replace(params, **changes), self.propagation_gate())

    def antisim_scores(self) -> dict[tuple[str, str], float]:
        items = sorted((c, ex.embedding) for c, ex in self.extras.items() if ex.embedding is not None and c in self.graph.nodes)
        scores = {}
        for i, (a, va) in enumerate(items):
            for b, vb in items[i + 1:]:
                if len(va) == len(vb):
                    s = -cred.semantic_equivalence(va, vb)
                    if s > 0:
                        scores[(a, b)] = min(1.0, s)
        return scores

    def detect_conflicts(self, t: int | None = None) -> tuple[list[g.ConflictEdge], list[g.ConflictEdge]]:
        with self._lock:
            t = self.now() if t is None else int(t)
            edges, violations = g.detect_conflicts(
                self.graph, sorted(self.declared_conflicts), self.antisim_scores(), self.config.graph)
            for e in edges:
                self.graph.add_conflict(e)
                self.conflict_seen.setdefault(e.pair, t)
            return edges, violations

    def evidence_mass(self, ccs: str) -> float:
        return sum(r.weight for r in self.evidence.get(ccs, []) if r.kind != "contradiction")

    def resolve_conflicts(self, t: int | None = None, threshold: float | None = None) -> dict[str, Any]:
        """Resolve current high-belief conflicts, then quarantine whatever remains.

        By default only pairs with both beliefs above ``theta_c`` are rescaled;
        a lower ``threshold`` (down to ``delta_c``) widens that set.
        """
        with self._lock:
            t = self.now() if t is None else int(t)
            edges, violations = self.detect_conflicts(t)
            floor = self.config.graph.theta_c if threshold is None else threshold
            resolved, unresolved = [], []
            for edge in (violations if threshold is None else edges):
                a, b = self.graph.nodes[edge.a], self.graph.nodes[edge.b]
                if min(a.pi, b.pi) <= floor or t < max(a.last_event_at, b.last_event_at):
                    continue
                before = dict(self.graph.nodes)
                mass = {edge.a: self.evidence_mass(edge.a), edge.b: self.evidence_mass(edge.b)}
                try:
                    g.resolve_contradiction(self.graph, edge, mass, t, self.config.kernel.pi_dagger, self.config.graph)
                except g.NoEvidence:
                    unresolved.append(list(edge.pair))
                    continue
                self._sync_graph_states(before, {"conflict": list(edge.pair)})
                resolved.append(list(edge.pair))
            quarantined = sorted(g.quarantine(self.graph, self.config.graph))
            if quarantined:
                before = dict(self.graph.nodes)
                g.apply_quarantine(self.graph, quarantined, t)
                self._sync_graph_states(before)
            return {"resolved": resolved, "unresolved": unresolved, "quarantined": quarantined}

    def retract(self, ccs: str, t: int | None = None) -> list[str]:
        with self._lock:
            ccs = self.resolve(ccs)
            t = self.now() if t is None else int(t)
            before = dict(self.graph.nodes)
            capped = g.suppress_retraction(self.graph, ccs, t, self.config.graph.retraction_floor, self.config.kernel.theta_r)
            self._sync_graph_states(before, {"retracted": ccs})
            self.retracted[ccs] = t
            return sorted(capped)

    def seal(self, t: int | None = None, nonce: bytes | None = None):
        with self._lock:
            return self.ledger.seal_epoch(self.now() if t is None else int(t), self.key, nonce=nonce)

    # -- scoring and ranking ---------------------------------------------------------

    def author_scores(self, caid: str) -> dict[str, Any]:
        if caid not in self.store.authors and caid not in self.profiles:
            raise UnknownClaim(caid)
        p = self.profiles.get(caid, cred.AuthorProfile(caid))
        params = self.config.credibility
        mu = cred.peer_engagement(p, params.theta1, params.theta2, params.mu_max)
        return {
            "caid": caid,
            "author_score": cred.author_score(p, params),
            "retraction_adjusted": cred.retraction_adjusted_score(p, params),
            "engagement": {"mu": mu[0], "mu_star": mu[1], "mu_dagger": mu[2]},
            "claims": sorted(c for c, r in self.store.claims.items() if r.author == caid),
        }

    def equivalents(self, ccs: str) -> list[tuple[str, float]]:
        ex = self.extras.get(ccs)
        if ex is None or ex.embedding is None:
            return []
        theta = self.config.credibility.theta_s
        out = []
        for other, ox in sorted(self.extras.items()):
            if other != ccs and ox.embedding is not None and len(ox.embedding) == len(ex.embedding):
                s = cred.semantic_equivalence(ex.embedding, ox.embedding)
                if s > theta:
                    out.append((other, s))
        return out

    def claim_scores(self, ccs: str, now: int | None = None, truth: Iterable[str] = ()) -> dict[str, Any]:
        ccs = self.resolve(ccs)
        now = self.now() if now is None else int(now)
        params = self.config.credibility
        events = [e for e in self.citations.get(ccs, []) if e.t <= now]
        c_i, c_star = cred.citation_influence(events, now, params.lambda_c, params.epsilon)
        r_i, r_star = cred.replication_score(self.replications.get(ccs, []), self._provenance(ccs))
        eq = self.equivalents(ccs)
        eq_scores = [(s, cred.replication_score(self.replications.get(o, []), self._provenance(o))[1]) for o, s in eq]
        r_tilde = cred.extended_replication(r_star, eq_scores, params.eta, params.theta_s)
        support = cred.composite_support(c_star, r_star, [(s, self.graph.nodes[o].pi) for o, s in eq])
        pos, neg, tps = u.truth_promotion_score(self.graph, ccs, truth)
        return {
            "ccs": ccs,
            "pi": self.graph.nodes[ccs].pi,
            "status": self.graph.nodes[ccs].status,
            "citation": {"C": c_i, "C_star": c_star},
            "replication": {"R": r_i, "R_star": r_star, "R_extended": r_tilde},
            "composite_support": support,
            "tps": {"positive": pos, "negative": neg, "total": tps},
            "utility": self.utility_scores()[ccs],
        }

    def app(self, app_id: str) -> u.ApplicationClass:
        for a in self.config.utility.apps:
            if a.id == app_id:
                return u.ApplicationClass(
                    a.id,
                    frozenset(a.domains) if a.domains is not None else None,
                    frozenset(a.concepts) if a.concepts is not None else None,
                    frozenset(a.methods) if a.methods is not None else None,
                    a.risk_threshold, a.output, a.u_tp, a.lambda_fp,
                )
        raise KeyError(f"unknown application class {app_id!r}")

    def domain_risks(self) -> dict[str, float]:
        uc = self.config.utility
        by_domain: dict[str, list[tuple[float, float]]] = {}
        for c, r in self.store.claims.items():
            for d in r.domain_set:
                by_domain.setdefault(d, []).append(self.extras.get(c, ClaimExtras()).costs)
        return {d: u.domain_risk(costs, uc.max_fp, uc.max_fn) for d, costs in by_domain.items()}

    def rank(self, app_id: str, query: u.Query = u.Query(), k_top: int = 10, now: int | None = None) -> list[tuple[str, float]]:
        app = self.app(app_id)
        now = self.now() if now is None else int(now)
        candidates = []
        for c, state in sorted(self.graph.nodes.items()):
            if state.masked and state.status != "probational":
                continue
            rec = self.store.claims.get(c)
            if rec is None:
                continue
            md = self.store.metadata.get(c)
            candidates.append(u.Candidate(
                c, state.pi, rec.domain_set, rec.context.concept, rec.context.method,
                self.extras.get(c, ClaimExtras()).embedding, rec.asserted_at,
                md.replication_status if md else "untested",
            ))
        uc = self.config.utility
        return u.prioritize(candidates, app, query, k_top, now, self.domain_risks(), uc.freshness_days, uc.freshness_boost)

    # -- persistence ------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "store": self.store.to_dict(),
            "nodes": [_state_to_dict(s) for _, s in sorted(self.graph.nodes.items())],
            "edges": [asdict(e) for e in self.graph.edges.values()],
            "conflicts": [asdict(c) for c in self.graph.conflict_edges.values()],
            "attenuation": self.graph.attenuation,
            "unstable": sorted(self.graph.unstable),
            "epoch": self.graph.epoch,
            "extras": {c: _extras_to_dict(x) for c, x in self.extras.items()},
            "evidence": {c: [asdict(r) for r in rs] for c, rs in self.evidence.items()},
            "citations": {c: [asdict(e) for e in es] for c, es in self.citations.items()},
            "replications": {c: [_repl_to_dict(e) for e in es] for c, es in self.replications.items()},
            "profiles": {c: asdict(p) for c, p in self.profiles.items()},
            "declared_conflicts": sorted(list(p) for p in self.declared_conflicts),
            "conflict_seen": [[a, b, t] for (a, b), t in sorted(self.conflict_seen.items())],
            "retracted": self.retracted,
            "labels": self.labels,
            "registry": self.registry.to_dict(),
        }

    def save(self, directory: str | Path) -> None:
        with self._lock:
            d = Path(directory)
            d.mkdir(parents=True, exist_ok=True)
            key_path = d / KEY_FILE
            if not key_path.exists():
                key_path.write_bytes(private_bytes(self.key))
                os.chmod(key_path, 0o600)
            tmp = d / (STATE_FILE + ".tmp")
            tmp.write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")
            os.replace(tmp, d / STATE_FILE)
            self.ledger.save(d / LEDGER_FILE)

    @classmethod
    def load(cls, directory: str | Path, config: BewaConfig | None = None, clock: Callable[[], float] = time.time) -> Engine:
        d = Path(directory)
        key_path = d / KEY_FILE
        key = private_from_bytes(key_path.read_bytes()) if key_path.exists() else None
        engine = cls(config, key, clock)
        state_path = d / STATE_FILE
        if not state_path.exists():
            return engine
        data = json.loads(state_path.read_text(encoding="utf-8"))
        engine.store = ClaimStore.from_dict(data["store"])
        engine.registry = KeyRegistry.from_dict(data["registry"])
        engine.registry.register(SYSTEM_ACTOR, public_hex(engine.key))
        ledger_path = d / LEDGER_FILE
        engine.ledger = Ledger.load(ledger_path, engine.registry) if ledger_path.exists() else Ledger(engine.registry)
        engine.graph = g.BeliefGraph(
            nodes={s["ccs"]: _state_from_dict(s) for s in data["nodes"]},
            epoch=data.get("epoch", 0),
        )
        engine.graph.anchors = dict(engine.store.anchors)
        for e in data["edges"]:
            engine.graph.edges[(e["src"], e["dst"])] = g.Edge(**e)
        for c in data["conflicts"]:
            ce = g.ConflictEdge(**c)
            engine.graph.conflict_edges[ce.pair] = ce
        engine.graph.attenuation = dict(data["attenuation"])
        engine.graph.unstable = set(data["unstable"])
        engine.extras = {c: _extras_from_dict(x) for c, x in data["extras"].items()}
        engine.evidence = {c: [EvidenceRecord(**r) for r in rs] for c, rs in data["evidence"].items()}
        engine.citations = {c: [cred.CitationEvent(**e) for e in es] for c, es in data["citations"].items()}
        engine.replications = {c: [_repl_from_dict(e) for e in es] for c, es in data["replications"].items()}
        engine.profiles = {
            c: cred.AuthorProfile(**{**p, "reviews": tuple(cred.Review(**r) for r in p["reviews"])})
            for c, p in data["profiles"].items()
        }
        engine.declared_conflicts = {tuple(p) for p in data["declared_conflicts"]}
        engine.conflict_seen = {(a, b): t for a, b, t in data["conflict_seen"]}
        engine.retracted = dict(data["retracted"])
        engine.labels = dict(data["labels"])
        return engine

    @classmethod
    def seeded(cls, seed: str, config: BewaConfig | None = None, clock: Callable[[], float] = time.time) -> Engine:
        return cls(config, key_from_seed(seed), clock)


def _state_to_dict(s: k.BeliefState) -> dict[str, Any]:
    d = asdict(s)
    d["history"] = [list(h) for h in s.history]
    return d


def _state_from_dict(d: Mapping[str, Any]) -> k.BeliefState:
    d = dict(d)
    d["history"] = tuple((int(t), float(pi), str(c)) for t, pi, c in d["history"])
    return k.BeliefState(**d)


def _extras_to_dict(x: ClaimExtras) -> dict[str, Any]:
    return asdict(x)


def _extras_from_dict(d: Mapping[str, Any]) -> ClaimExtras:
    d = dict(d)
    d["embedding"] = tuple(d["embedding"]) if d.get("embedding") is not None else None
    d["costs"] = tuple(d["costs"])
    return ClaimExtras(**d)


def _repl_to_dict(e: cred.ReplicationEvent) -> dict[str, Any]:
    d = asdict(e)
    for key in ("authors", "institutions", "funding", "conditions"):
        d[key] = sorted(d[key])
    return d


def _repl_from_dict(d: Mapping[str, Any]) -> cred.ReplicationEvent:
    d = dict(d)
    for key in ("authors", "institutions", "funding", "conditions"):
        d[key] = frozenset(d[key])
    return cred.ReplicationEvent(**d)


def anchor_digest(obj: Any) -> str:
    return hash_json(obj)
