"""Shipped case-study corpus: 50 claims across six fields plus an event script for 2024.

The scenarios covered are conflicting updates, citation chains, replication tags,
a retraction cascade, a version refinement and probation expiry.
``scripts/make_case_study.py`` regenerates the files.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Any

from ..signing import key_from_seed, public_hex
from ..timeutil import parse_time

SIGNER_SEED = "case-study-signer"


def _load(name: str) -> Any:
    return json.loads(resources.files(__name__).joinpath(name).read_text(encoding="utf-8"))


def path(name: str = "case_study.json") -> str:
    return str(resources.files(__name__).joinpath(name))


def config():
    """Engine config used for the case study (slower decay than the default)."""
    from ..config import load_config

    return load_config(path("case_study.toml"))


def corpus() -> list[dict[str, Any]]:
    return _load("case_study.json")


def rejects() -> list[dict[str, Any]]:
    return _load("case_study_rejects.json")


def events() -> list[dict[str, Any]]:
    return _load("case_study_events.json")


def signer_public_key() -> str:
    return public_hex(key_from_seed(SIGNER_SEED))


def replay(engine, until: str | int | None = None) -> dict[str, Any]:
    """Ingest the corpus and apply the event script up to ``until`` (inclusive)."""
    result = engine.ingest_entries(corpus(), [signer_public_key()])
    limit = parse_time(until) if until is not None else None
    outcomes: dict[str, Any] = {"accepted": len(result.accepted), "rejected": result.rejected, "resolutions": [],
                                "retractions": {}, "epochs": []}
    for ev in events():
        t = parse_time(ev["t"])
        if limit is not None and t > limit:
            break
        op = ev["op"]
        if op == "evidence":
            engine.apply_evidence(ev["ccs"], ev["kind"], ev["quality"], t, ev.get("source", ""),
                                  intent=ev.get("intent", 1), cluster=ev.get("cluster"),
                                  authors=ev.get("authors", ()), institutions=ev.get("institutions", ()))
        elif op == "decay_tick":
            engine.decay_tick(t)
        elif op == "propagate":
            engine.propagate()
        elif op == "resolve_conflicts":
            outcomes["resolutions"].append(engine.resolve_conflicts(t))
        elif op == "retract":
            outcomes["retractions"][ev["ccs"]] = engine.retract(ev["ccs"], t)
        elif op == "seal":
            outcomes["epochs"].append(engine.seal(t, nonce=t.to_bytes(8, "big")).epoch)
        else:
            raise ValueError(f"unknown event op {op!r}")
    return outcomes
