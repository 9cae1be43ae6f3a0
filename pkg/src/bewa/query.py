"""Structured queries, audit trajectories and visualisation exports."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from .errors import BewaError, UnknownClaim
from .graph import clusters
from .hashing import hash_json
from .timeutil import format_time

CONTEXT_KEYS = ("concept", "method", "statistical_frame")
FILTER_KEYS = ("ccs_prefix", "author", "domain", "context")
MODIFYING_CAUSES = {
    "collapse": "contradiction",
    "evidence:contradiction": "contradiction",
    "retraction": "retraction",
    "superseded": "revision",
    "conflict_resolution": "conflict_resolution",
    "quarantine": "quarantine",
    "replicative_reset": "replicative_reset",
}


class QueryError(BewaError):
    pass


class BadFilter(QueryError):
    pass


class AsOfInFuture(QueryError):
    pass


@dataclass(frozen=True)
class QueryRequest:
    filters: Mapping[str, Any] = field(default_factory=dict)
    as_of: int | None = None
    anchor: str | None = None
    distance: int | None = None
    include_justifications: bool = True
    include_contradictions: bool = True


def _check_filters(filters: Mapping[str, Any]) -> None:
    unknown = set(filters) - set(FILTER_KEYS)
    if unknown:
        raise BadFilter(f"unknown filter keys {sorted(unknown)}")
    for key in ("ccs_prefix", "author", "domain"):
        if key in filters and not isinstance(filters[key], str):
            raise BadFilter(f"{key} must be a string")
    ctx = filters.get("context")
    if ctx is not None:
        if not isinstance(ctx, Mapping) or set(ctx) - set(CONTEXT_KEYS):
            raise BadFilter(f"context filter accepts only {CONTEXT_KEYS}")


def _matches(engine, ccs: str, filters: Mapping[str, Any]) -> bool:
    rec = engine.store.claims.get(ccs)
    if rec is None:
        return False
    if "ccs_prefix" in filters and not ccs.startswith(filters["ccs_prefix"]):
        return False
    if "author" in filters and rec.author != filters["author"]:
        return False
    if "domain" in filters and filters["domain"] not in rec.domain_set:
        return False
    for key, value in (filters.get("context") or {}).items():
        if getattr(rec.context, key) != value:
            return False
    return True


def _neighbourhood(engine, anchor: str, distance: int) -> set[str]:
    adj: dict[str, set[str]] = {}
    for e in engine.graph.edges.values():
        adj.setdefault(e.src, set()).add(e.dst)
        adj.setdefault(e.dst, set()).add(e.src)
    for a, b in engine.graph.conflict_edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    seen = {anchor: 0}
    queue = deque([anchor])
    while queue:
        cur = queue.popleft()
        if seen[cur] == distance:
            continue
        for nxt in sorted(adj.get(cur, ())):
            if nxt not in seen:
                seen[nxt] = seen[cur] + 1
                queue.append(nxt)
    return set(seen)


def pi_at(engine, ccs: str, t: int) -> tuple[float, str] | None:
    """Belief and status of ``ccs`` as recorded in the ledger at time ``t``."""
    pi, status, found = None, None, False
    for e in engine.ledger.trace(ccs):
        if e.t > t:
            break
        found = True
        pi = e.pi_after
        status = e.details.get("status", status)
    if not found:
        return None
    return pi, status or "unknown"


def dag_serialization(engine, members: set[str], beliefs: Mapping[str, float]) -> list[list[Any]]:
    """Depth-first pre-order over support edges inside ``members``, roots sorted by ccs."""
    children: dict[str, list[str]] = {c: [] for c in members}
    has_parent: set[str] = set()
    for e in engine.graph.edges.values():
        if e.src in members and e.dst in members:
            children[e.src].append(e.dst)
            has_parent.add(e.dst)
    for c in children:
        children[c].sort()
    out: list[list[Any]] = []
    seen: set[str] = set()

    def visit(node: str) -> None:
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            out.append([cur, beliefs[cur], children[cur]])
            stack.extend(reversed(children[cur]))

    for root in sorted(members - has_parent):
        visit(root)
    for rest in sorted(members - seen):
        visit(rest)
    return out


def query_anchor(dag: list[list[Any]], justifications: list[Any], contradictions: list[Any]) -> str:
    return hash_json({"dag": dag, "justifications": justifications, "contradictions": contradictions})


def query(engine, req: QueryRequest, now: int | None = None) -> dict[str, Any]:
    _check_filters(req.filters)
    now = engine.now() if now is None else now
    if req.as_of is not None and req.as_of > now:
        raise AsOfInFuture(f"as-of {req.as_of} is after now {now}")
    if req.distance is not None and req.distance < 0:
        raise BadFilter("traversal distance must be non-negative")
    if (req.anchor is None) != (req.distance is None):
        raise BadFilter("traversal needs both anchor and distance")
    candidates = set(engine.graph.nodes)
    if req.anchor is not None:
        anchor = engine.resolve(req.anchor)
        candidates &= _neighbourhood(engine, anchor, req.distance)
    results = []
    beliefs: dict[str, float] = {}
    all_just: list[Any] = []
    all_contra: list[Any] = []
    for ccs in sorted(candidates):
        if not _matches(engine, ccs, req.filters):
            continue
        if req.as_of is None:
            state = engine.graph.nodes[ccs]
            pi, status, cutoff = state.pi, state.status, None
        else:
            snap = pi_at(engine, ccs, req.as_of)
            if snap is None:
                continue
            (pi, status), cutoff = snap, req.as_of
        row: dict[str, Any] = {"ccs": ccs, "pi_at_t": pi, "status": status}
        if req.include_justifications:
            just = [r.id for r in engine.evidence.get(ccs, []) if cutoff is None or r.t <= cutoff]
            row["justifications"] = just
            all_just.append([ccs, just])
        if req.include_contradictions:
            contra = sorted(
                b if a == ccs else a
                for (a, b), t in engine.conflict_seen.items()
                if ccs in (a, b) and (cutoff is None or t <= cutoff)
            )
            row["contradictions"] = contra
            all_contra.append([ccs, contra])
        beliefs[ccs] = pi
        results.append(row)
    dag = dag_serialization(engine, set(beliefs), beliefs)
    return {"results": results, "anchor": query_anchor(dag, all_just, all_contra)}


def audit(engine, ccs: str) -> list[dict[str, Any]]:
    """One row per ledger entry touching ``ccs``: time, belief, evidence refs, modifying tags."""
    if ccs not in engine.graph.nodes:
        raise UnknownClaim(ccs)
    rows = []
    for e in engine.ledger.trace(ccs):
        d = e.details
        cause = d.get("cause", e.op)
        mods = [MODIFYING_CAUSES[cause]] if cause in MODIFYING_CAUSES else []
        if e.tx_type == "DEPRECATE" and "revision" not in mods:
            mods.append("revision")
        rows.append({
            "seq": e.seq,
            "t": e.t,
            "pi": e.pi_after,
            "evidence": [d["evidence"]] if "evidence" in d else [],
            "modifications": mods,
            "tx_type": e.tx_type,
            "cause": cause,
        })
    return rows


def cluster_ids(engine) -> dict[str, list[str]]:
    """Map each claim to the ids of the non-trivial clusters it belongs to."""
    out: dict[str, list[str]] = {}
    for report in clusters(engine.graph, engine.config.graph):
        if len(report.members) < 2:
            continue
        members = sorted(report.members)
        concept = ""
        rec = engine.store.claims.get(members[0])
        if rec is not None:
            concept = rec.context.concept
        cid = f"Cluster:{concept or 'mixed'}:{hash_json(members)[:8]}"
        for c in members:
            out.setdefault(c, []).append(cid)
    return out


def export_trajectory(engine, ccs: str) -> dict[str, Any]:
    if ccs not in engine.graph.nodes:
        raise UnknownClaim(ccs)
    state = engine.graph.nodes[ccs]
    linked = []
    for e in sorted(engine.graph.edges.values(), key=lambda e: (e.src, e.dst)):
        if e.src == ccs:
            linked.append({"id": e.dst, "relation": "supports"})
        elif e.dst == ccs:
            linked.append({"id": e.src, "relation": "supported_by"})
    for a, b in sorted(engine.graph.conflict_edges):
        if ccs in (a, b):
            linked.append({"id": b if a == ccs else a, "relation": "contradicts"})
    return {
        "claim_id": ccs,
        "timestamps": [format_time(t) for t, _, _ in state.history],
        "beliefs": [pi for _, pi, _ in state.history],
        "linked_claims": linked,
        "current_status": state.status,
        "cluster_membership": cluster_ids(engine).get(ccs, []),
    }


def trajectory_schema() -> dict[str, Any]:
    text = resources.files("bewa.data").joinpath("trajectory.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
