"""HTTP surface over an :class:`~bewa.engine.Engine`.

Every route requires a bearer token.  Each principal gets a sliding-window
request budget.  Writes and reads both take the engine lock, so a request
never sees a half-applied batch.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import Depends, FastAPI, HTTPException, Request, status
from fastapi.responses import JSONResponse
from fastapi.security import HTTPAuthorizationCredentials, HTTPBearer

from .. import query as q
from ..errors import BewaError, UnknownClaim
from ..engine import Engine
from ..ledger import ForkRejected, verify_chain, verify_proof, zk_audit
from ..timeutil import parse_time
from ..utility import Query
from . import schemas as s


@dataclass
class ServiceSettings:
    tokens: dict[str, str] = field(default_factory=dict)
    rate_limit: int = 100
    window: float = 60.0
    clock: Callable[[], float] = time.monotonic
    on_change: Optional[Callable[[Engine], None]] = None

    @classmethod
    def from_env(cls, **overrides: Any) -> ServiceSettings:
        tokens: dict[str, str] = {}
        path = os.environ.get("BEWA_TOKENS_FILE")
        if path:
            tokens = load_tokens(path)
        settings = cls(tokens=tokens)
        limit = os.environ.get("BEWA_RATE_LIMIT")
        if limit:
            count, _, window = limit.partition("/")
            settings.rate_limit = int(count)
            if window:
                settings.window = float(window)
        for key, value in overrides.items():
            setattr(settings, key, value)
        return settings


def load_tokens(path: str | Path) -> dict[str, str]:
    """Read a JSON object mapping bearer token to principal name."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
        raise ValueError("tokens file must map token strings to principal names")
    return data


class RateLimiter:
    def __init__(self, limit: int, window: float, clock: Callable[[], float]) -> None:
        self.limit = limit
        self.window = window
        self.clock = clock
        self._hits: dict[str, deque[float]] = {}
        self._lock = threading.Lock()

    def check(self, principal: str) -> float | None:
        """Record a hit; return seconds to wait if the budget is exhausted."""
        now = self.clock()
        with self._lock:
            hits = self._hits.setdefault(principal, deque())
            while hits and hits[0] <= now - self.window:
                hits.popleft()
            if len(hits) >= self.limit:
                return max(0.0, hits[0] + self.window - now)
            hits.append(now)
            return None


def _time(value: int | str | None) -> int | None:
    if value is None:
        return None
    try:
        return parse_time(value)
    except ValueError as exc:
        raise HTTPException(422, f"bad timestamp: {exc}") from exc


def _belief(engine: Engine, ccs: str) -> s.BeliefOut:
    st = engine.state(ccs)
    return s.BeliefOut(
        ccs=ccs, pi=st.pi, status=st.status, created_at=st.created_at, last_reinforced_at=st.last_reinforced_at,
        contradiction_mass=st.contradiction_mass, marginal=engine.graph.marginals.get(ccs),
        history=[s.HistoryPoint(t=t, pi=pi, cause=c) for t, pi, c in st.history],
    )


def create_app(engine: Engine, settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings.from_env()
    limiter = RateLimiter(settings.rate_limit, settings.window, settings.clock)
    bearer = HTTPBearer(auto_error=False)
    app = FastAPI(title="bewa", version="0.1.0")
    lock = engine._lock

    def principal(creds: Optional[HTTPAuthorizationCredentials] = Depends(bearer)) -> str:
        if creds is None or creds.credentials not in settings.tokens:
            raise HTTPException(status.HTTP_401_UNAUTHORIZED, "missing or invalid bearer token",
                                headers={"WWW-Authenticate": "Bearer"})
        who = settings.tokens[creds.credentials]
        wait = limiter.check(who)
        if wait is not None:
            raise HTTPException(status.HTTP_429_TOO_MANY_REQUESTS, "rate limit exceeded",
                                headers={"Retry-After": str(max(1, round(wait)))})
        return who

    def changed() -> None:
        if settings.on_change is not None:
            settings.on_change(engine)

    @app.exception_handler(UnknownClaim)
    async def _unknown(_: Request, exc: UnknownClaim) -> JSONResponse:
        return JSONResponse({"detail": str(exc)}, status_code=404)

    @app.exception_handler(ForkRejected)
    async def _fork(_: Request, exc: ForkRejected) -> JSONResponse:
        return JSONResponse({"detail": str(exc), "error": "ForkRejected"}, status_code=409)

    @app.exception_handler(BewaError)
    async def _domain(_: Request, exc: BewaError) -> JSONResponse:
        return JSONResponse({"detail": str(exc), "error": type(exc).__name__}, status_code=422)

    @app.get("/claims/{ccs}", response_model=s.ClaimOut)
    def get_claim(ccs: str, who: str = Depends(principal)):
        with lock:
            ccs = engine.resolve(ccs)
            rec = engine.store.get(ccs)
            md = engine.store.metadata.get(ccs)
            return s.ClaimOut(
                ccs=ccs, normalized_form=rec.normalized_form, author=rec.author, asserted_at=rec.asserted_at,
                context={"concept": rec.context.concept, "method": rec.context.method,
                         "statistical_frame": rec.context.statistical_frame},
                domain_set=sorted(rec.domain_set), version=rec.version, parent_ccs=rec.parent_ccs,
                epistemic_status=rec.epistemic_status,
                metadata=None if md is None else {
                    "doi": md.doi, "published_at": md.published_at, "venue": md.venue.name if md.venue else None,
                    "replication_status": md.replication_status, "signed": md.signature is not None,
                },
                belief=_belief(engine, ccs),
            )

    @app.post("/claims", response_model=s.ClaimCreated)
    def post_claim(body: s.ClaimIn, who: str = Depends(principal)):
        with lock:
            ccs, reasons = engine.add_claim(body.model_dump(exclude_none=True))
            if ccs is not None:
                changed()
            return s.ClaimCreated(accepted=ccs is not None, ccs=ccs, reasons=reasons)

    @app.post("/claims/batch", response_model=s.IngestOut)
    def post_claims(body: s.ClaimBatchIn, who: str = Depends(principal)):
        with lock:
            result = engine.ingest_entries(body.entries, body.trusted_keys)
            if result.accepted:
                changed()
            return s.IngestOut(accepted=[r.ccs for r in result.accepted], rejected=result.rejected)

    @app.post("/evidence", response_model=s.BeliefOut)
    def post_evidence(body: s.EvidenceIn, who: str = Depends(principal)):
        with lock:
            st = engine.apply_evidence(
                body.ccs, body.kind, body.quality, _time(body.t), body.source, body.weight, body.intent,
                body.cluster, body.authors, body.institutions, body.funding,
            )
            changed()
            return _belief(engine, st.ccs)

    @app.post("/query", response_model=s.QueryOut)
    def post_query(body: s.QueryIn, who: str = Depends(principal)):
        filters = body.filters.model_dump(exclude_none=True)
        req = q.QueryRequest(
            filters=filters,
            as_of=_time(body.as_of),
            anchor=body.traversal.anchor if body.traversal else None,
            distance=body.traversal.distance if body.traversal else None,
            include_justifications=body.include.justifications,
            include_contradictions=body.include.contradictions,
        )
        with lock:
            return q.query(engine, req)

    @app.get("/audit/{ccs}", response_model=s.AuditOut)
    def get_audit(ccs: str, who: str = Depends(principal)):
        with lock:
            ccs = engine.resolve(ccs)
            return s.AuditOut(ccs=ccs, trajectory=q.audit(engine, ccs))

    @app.get("/claims/{ccs}/trajectory", response_model=s.TrajectoryOut)
    def get_trajectory(ccs: str, who: str = Depends(principal)):
        with lock:
            return q.export_trajectory(engine, engine.resolve(ccs))

    @app.post("/decay-tick", response_model=s.DecayOut)
    def post_decay(body: s.TimeIn, who: str = Depends(principal)):
        with lock:
            now = _time(body.now)
            now = engine.now() if now is None else now
            result = engine.decay_tick(now)
            changed()
            return s.DecayOut(now=now, changed=result)

    @app.post("/propagate", response_model=s.PropagateOut)
    def post_propagate(body: s.PropagateIn, who: str = Depends(principal)):
        with lock:
            r = engine.propagate(body.max_iters, body.schedule, body.damping)
            changed()
            return s.PropagateOut(iterations=r.iterations, converged=r.converged, frozen=sorted(r.frozen), beliefs=r.beliefs)

    @app.get("/conflicts", response_model=s.ConflictsOut)
    def get_conflicts(who: str = Depends(principal)):
        with lock:
            edges, violations = engine.detect_conflicts()
            hot = {v.pair for v in violations}
            changed()
            return s.ConflictsOut(conflicts=[
                s.ConflictOut(a=e.a, b=e.b, source=e.source, strength=e.strength, violation=e.pair in hot) for e in edges
            ])

    @app.post("/conflicts/resolve", response_model=s.ResolveOut)
    def post_resolve(body: s.TimeIn, who: str = Depends(principal)):
        with lock:
            out = engine.resolve_conflicts(_time(body.now))
            changed()
            return out

    @app.post("/retract", response_model=s.RetractOut)
    def post_retract(body: s.RetractIn, who: str = Depends(principal)):
        with lock:
            capped = engine.retract(body.ccs, _time(body.t))
            changed()
            return s.RetractOut(capped=capped)

    @app.post("/rank", response_model=s.RankOut)
    def post_rank(body: s.RankIn, who: str = Depends(principal)):
        with lock:
            try:
                engine.app(body.app)
            except KeyError as exc:
                raise HTTPException(status.HTTP_404_NOT_FOUND, str(exc)) from exc
            query = Query(tuple(body.query.embedding) if body.query.embedding else None, frozenset(body.query.tags))
            ranked = engine.rank(body.app, query, body.k, _time(body.now))
            return s.RankOut(app=body.app, results=[s.RankedClaim(ccs=c, score=v) for c, v in ranked])

    @app.get("/scores/author/{caid}")
    def get_author_score(caid: str, who: str = Depends(principal)) -> dict[str, Any]:
        with lock:
            return engine.author_scores(caid)

    @app.get("/scores/claim/{ccs}")
    def get_claim_score(ccs: str, now: Optional[str] = None, who: str = Depends(principal)) -> dict[str, Any]:
        with lock:
            return engine.claim_scores(ccs, _time(now))

    @app.get("/ledger/verify", response_model=s.VerifyOut)
    def get_verify(who: str = Depends(principal)):
        with lock:
            return verify_chain(engine.ledger).to_json()

    @app.post("/ledger/seal", response_model=s.EpochOut)
    def post_seal(body: s.SealIn, who: str = Depends(principal)):
        with lock:
            epoch = engine.seal(_time(body.t))
            changed()
            return epoch.to_json()

    @app.get("/ledger/epochs/{epoch}", response_model=s.EpochOut)
    def get_epoch(epoch: int, who: str = Depends(principal)):
        with lock:
            return engine.ledger.epoch(epoch).to_json()

    @app.get("/ledger/prove/{ccs}", response_model=s.ProofOut)
    def get_proof(ccs: str, epoch: int, who: str = Depends(principal)):
        with lock:
            ccs = engine.resolve(ccs)
            proof = engine.ledger.prove_claim(ccs, epoch)
            data = proof.to_json()
            return s.ProofOut(ccs=ccs, epoch=epoch, leaf=data["leaf"], path=data["path"], root=data["root"],
                              valid=verify_proof(proof, engine.ledger.epoch(epoch).merkle_root))

    @app.get("/ledger/zk/{ccs}", response_model=s.ZkOut)
    def get_zk(ccs: str, who: str = Depends(principal)):
        return zk_audit(ccs)

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    return app
