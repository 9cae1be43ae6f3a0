import random
from dataclasses import replace

import jsonschema
import pytest

from bewa import query as q
from bewa.engine import Engine
from bewa.errors import UnknownClaim
from bewa.signing import key_from_seed

EMPTY_ANCHOR = "b540d72c39f3d15c25a132923b0a6085e4372fa865cff7cc8e84c8712ca5eebc"
SAMPLE_KEYS = ["claim_id", "timestamps", "beliefs", "linked_claims", "current_status", "cluster_membership"]


def small_engine() -> Engine:
    e = Engine(key=key_from_seed("query-tests"), clock=lambda: 10_000)
    e.add_synthetic_claim("A", 0.6, 100)
    e.add_synthetic_claim("B", 0.5, 200)
    e.add_synthetic_claim("C", 0.5, 300)
    e.add_synthetic_claim("D", 0.4, 400)
    e.add_edge("A", "B", "Evidential", 0.7)
    e.add_edge("B", "C", "Deductive", 0.8)
    for t in (500, 600, 700):
        e.apply_evidence("A", "replication", 0.8, t, source=f"lab{t}")
    return e


def test_empty_result_anchor_golden():
    e = small_engine()
    out = q.query(e, q.QueryRequest(filters={"ccs_prefix": "zz"}))
    assert out == {"results": [], "anchor": EMPTY_ANCHOR}
    assert q.query_anchor([], [], []) == EMPTY_ANCHOR


def test_anchor_is_reproducible():
    e = small_engine()
    req = q.QueryRequest(filters={"domain": "sim"})
    assert q.query(e, req)["anchor"] == q.query(e, req)["anchor"]
    assert q.query(e, req)["anchor"] != EMPTY_ANCHOR


def test_as_of_excludes_claims_asserted_later():
    e = small_engine()
    rows = q.query(e, q.QueryRequest(as_of=250))["results"]
    assert sorted(r["ccs"] for r in rows) == sorted(e.labels[x] for x in "AB")


def test_traversal_zero_returns_anchor_only():
    e = small_engine()
    rows = q.query(e, q.QueryRequest(anchor="B", distance=0))["results"]
    assert [r["ccs"] for r in rows] == [e.labels["B"]]
    rows = q.query(e, q.QueryRequest(anchor="B", distance=1))["results"]
    assert {r["ccs"] for r in rows} == {e.labels[x] for x in "ABC"}


def test_query_errors():
    e = small_engine()
    with pytest.raises(q.BadFilter):
        q.query(e, q.QueryRequest(filters={"colour": "red"}))
    with pytest.raises(q.BadFilter):
        q.query(e, q.QueryRequest(anchor="A"))
    with pytest.raises(q.AsOfInFuture):
        q.query(e, q.QueryRequest(as_of=20_000))


def test_justifications_and_contradictions():
    e = small_engine()
    e.declare_conflict("A", "D")
    e.graph.set_state(replace(e.state(e.labels["D"]), pi=0.7))
    e.detect_conflicts(800)
    rows = {r["ccs"]: r for r in q.query(e, q.QueryRequest())["results"]}
    assert rows[e.labels["A"]]["justifications"] == ["ev-1", "ev-2", "ev-3"]
    assert rows[e.labels["A"]]["contradictions"] == [e.labels["D"]]
    early = {r["ccs"]: r for r in q.query(e, q.QueryRequest(as_of=550))["results"]}
    assert early[e.labels["A"]]["justifications"] == ["ev-1"]
    assert early[e.labels["A"]]["contradictions"] == []


def test_audit_fresh_claim_single_insert():
    e = small_engine()
    rows = q.audit(e, e.labels["D"])
    assert len(rows) == 1 and rows[0]["tx_type"] == "INSERT"


def test_audit_after_three_updates_matches_history():
    e = small_engine()
    a = e.labels["A"]
    rows = q.audit(e, a)
    assert len(rows) == 4
    assert [r["pi"] for r in rows] == [pi for _, pi, _ in e.state(a).history]
    assert [r["evidence"] for r in rows[1:]] == [["ev-1"], ["ev-2"], ["ev-3"]]
    assert rows[-1]["pi"] == e.state(a).pi
    with pytest.raises(UnknownClaim):
        q.audit(e, "f" * 64)


def test_audit_tags_retraction():
    e = small_engine()
    e.retract("B", 900)
    tags = [m for r in q.audit(e, e.labels["C"]) for m in r["modifications"]]
    assert "retraction" in tags


@pytest.mark.parametrize("seed", range(10))
def test_as_of_never_sees_later_entries(seed):
    rng = random.Random(seed)
    e = Engine(key=key_from_seed(f"fuzz-{seed}"), clock=lambda: 10**7)
    names = [f"c{i}" for i in range(6)]
    t = 0
    for n in names:
        t += rng.randint(1, 50)
        e.add_synthetic_claim(n, rng.uniform(0.2, 0.8), t)
    for _ in range(40):
        t += rng.randint(0, 30)
        e.apply_evidence(rng.choice(names), rng.choice(["replication", "citation", "contradiction"]), rng.random(), t)
    for _ in range(20):
        cut = rng.randint(0, t + 10)
        for row in q.query(e, q.QueryRequest(as_of=cut))["results"]:
            visible = [x for x in e.ledger.trace(row["ccs"]) if x.t <= cut]
            assert visible, "claim listed before its first entry"
            assert row["pi_at_t"] == visible[-1].pi_after
        listed = {r["ccs"] for r in q.query(e, q.QueryRequest(as_of=cut))["results"]}
        for c in e.graph.nodes:
            assert (c in listed) == (e.ledger.trace(c)[0].t <= cut)


def test_trajectory_document_shape():
    e = small_engine()
    e.apply_evidence("D", "citation", 0.5, 800)
    doc = q.export_trajectory(e, e.labels["D"])
    assert list(doc) == SAMPLE_KEYS
    assert len(doc["timestamps"]) == len(doc["beliefs"]) == 2
    assert doc["timestamps"] == sorted(doc["timestamps"])
    assert doc["cluster_membership"] == []
    jsonschema.validate(doc, q.trajectory_schema())


def test_trajectory_links_and_clusters():
    e = small_engine()
    doc = q.export_trajectory(e, e.labels["B"])
    assert {(x["id"], x["relation"]) for x in doc["linked_claims"]} == {
        (e.labels["A"], "supported_by"), (e.labels["C"], "supports")}
    assert len(doc["cluster_membership"]) == 1 and doc["cluster_membership"][0].startswith("Cluster:sim:")
    jsonschema.validate(doc, q.trajectory_schema())


def test_schema_rejects_renamed_field():
    e = small_engine()
    doc = q.export_trajectory(e, e.labels["A"])
    doc["claimId"] = doc.pop("claim_id")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, q.trajectory_schema())
