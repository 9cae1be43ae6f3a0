"""The ten acceptance criteria, one test each, at their stated tolerances.

Each test wraps its checks in ``criterion(n, ...)`` so the terminal summary
prints one pass/fail line per criterion.
"""

import itertools
import math
import random
import struct
import time

import jsonschema
import pytest

import oracles
from bewa import credibility as cred
from bewa import fixtures, sim
from bewa import graph as g
from bewa import kernel as k
from bewa import ledger as L
from bewa import query as q
from bewa.engine import Engine
from bewa.signing import key_from_seed, public_hex

DAY = 86400
SAMPLE_KEYS = ["claim_id", "timestamps", "beliefs", "linked_claims", "current_status", "cluster_membership"]


def test_criterion_01_update_algebra(criterion):
    with criterion(1, "update algebra matches independent oracles (1e-12 / 1e-10, < 5 s)"):
        rng = random.Random(101)
        start = time.perf_counter()
        for _ in range(10_000):
            pi, w = rng.random(), rng.uniform(1e-9, 1 - 1e-9)
            assert abs(k.weighted_update(pi, w) - oracles.update(pi, w)) <= 1e-12
        no_clamp = k.KernelParams()
        for _ in range(10_000):
            pi0 = rng.uniform(0.001, 0.999)
            ws = [rng.uniform(0.01, 0.99) for _ in range(rng.randint(1, 12))]
            units = [k.EvidenceUnit("replication", 0.5, i, weight=w) for i, w in enumerate(ws)]
            got = k.cumulative_posterior(pi0, units, no_clamp, delta=1.0)
            assert abs(got - oracles.posterior_product(pi0, ws)) <= 1e-10
        assert time.perf_counter() - start < 5.0


def _random_op(rng: random.Random, state: k.BeliefState, t: int) -> k.BeliefState:
    op = rng.randrange(7)
    if op == 0:
        unit = k.EvidenceUnit(rng.choice(k.EVIDENCE_KINDS), rng.random(), t, weight=rng.choice([None, rng.random()]))
        return k.apply_evidence(state, unit)
    if op == 1:
        params = k.DecayParams(mode=rng.choice(["to_zero", "to_neutral"]), rate=rng.uniform(0, 0.5),
                               alpha_t=rng.uniform(0, 0.1), beta=rng.uniform(0, 0.5))
        return k.decay(state, t, params, isolation=rng.random())
    if op == 2:
        pi, kappa, status = k.contradict(state.pi, rng.random(), state.contradiction_mass, status=state.status)
        assert 0.0 <= pi <= 1.0 and not math.isnan(kappa)
        return state
    if op == 3 and state.status != "terminally_discredited":
        reps = [k.Replication(rng.uniform(0.51, 1.0), rng.uniform(0.1, 2.0)) for _ in range(rng.randint(2, 4))]
        return k.replicative_reset(state, reps, t)
    if op == 4 and state.status == "probational":
        return k.probation_step(state, rng.uniform(0, 3), rng.uniform(0, 3), t)
    if op == 5 and state.status != "terminally_discredited":
        return k.reinforce(state, rng.uniform(0.56, 0.999), t, max_step=rng.choice([None, 0.2]))
    value = k.smoothed(state.pi, k.weighted_update(state.pi, rng.uniform(1e-6, 1 - 1e-6)), rng.random())
    assert 0.0 <= value <= 1.0
    return state


def test_criterion_02_probability_axioms(criterion):
    with criterion(2, "every kernel output stays in [0, 1] over 10^5 fuzzed op sequences"):
        rng = random.Random(202)
        for seq in range(100_000):
            pi0 = rng.choice([0.0, 1.0, rng.random()])
            state = k.new_state("c", pi0, 0, rng.choice(["canonical", "probational"]))
            t = 0
            for _ in range(rng.randint(1, 4)):
                t += rng.randint(0, 400 * DAY)
                state = _random_op(rng, state, t)
                assert 0.0 <= state.pi <= 1.0 and math.isfinite(state.pi), (seq, state)
                assert all(0.0 <= p <= 1.0 and math.isfinite(p) for _, p, _ in state.history)


def _entropy(p: float) -> float:
    return 0.0 if p in (0.0, 1.0) else -(p * math.log(p) + (1 - p) * math.log(1 - p))


def test_criterion_03_decay_laws(criterion):
    with criterion(3, "to_zero halves at ln2/rate (1e-9); to_neutral entropy non-decreasing on a 10^3 grid"):
        rng = random.Random(303)
        for days in range(1, 366):
            rate = math.log(2) / days
            pi = rng.uniform(0.01, 1.0)
            state = k.new_state("c", pi, 0)
            out = k.decay(state, round(k.half_life(rate) * DAY), k.DecayParams(rate=rate))
            assert abs(out.pi - pi / 2) <= 1e-9
        for _ in range(1000):
            rate, pi = rng.uniform(1e-4, 2.0), rng.random()
            assert abs(k.decay_value(pi, rate * k.half_life(rate), "to_zero") - pi / 2) <= 1e-9
        params = k.DecayParams(mode="to_neutral", rate=0.05)
        for i in range(1000):
            state = k.new_state("c", i / 999, 0)
            prev = _entropy(state.pi)
            for step in range(1, 31):
                state = k.decay(state, step * DAY, params)
                h = _entropy(state.pi)
                assert h >= prev - 1e-15
                prev = h


def test_criterion_04_contradiction_protocol(criterion):
    with criterion(4, "resolved pairs sum <= 1 + 1e-9; kappa beyond max pins belief at 0 for good"):
        rng = random.Random(404)
        for _ in range(20_000):
            bg = g.BeliefGraph()
            bg.set_state(k.new_state("a", rng.random(), 0))
            bg.set_state(k.new_state("b", rng.random(), 0))
            mass = {"a": rng.choice([0.0, rng.uniform(0, 5)]), "b": rng.uniform(1e-9, 5)}
            if rng.random() < 0.5:
                mass = {"a": mass["b"], "b": mass["a"]}
            pa, pb = g.resolve_contradiction(bg, g.ConflictEdge("a", "b"), mass, 1)
            assert pa + pb <= 1 + 1e-9
            assert bg.pi("a") + bg.pi("b") <= 1 + 1e-9
        params = k.KernelParams()
        for trial in range(500):
            state = k.new_state("c", rng.random(), 0)
            t = 0
            while state.status != "terminally_discredited":
                t += DAY
                state = k.apply_evidence(state, k.EvidenceUnit("contradiction", rng.uniform(0.5, 1.0), t), params)
            assert state.pi == 0.0 and state.contradiction_mass > params.kappa_max
            for _ in range(5):
                t += DAY
                kind = rng.choice(["replication", "endorsement", "citation"])
                state = k.apply_evidence(state, k.EvidenceUnit(kind, 1.0, t), params)
                state = k.decay(state, t + DAY, k.DecayParams(mode="to_neutral"))
                assert state.pi == 0.0 and state.status == "terminally_discredited"
            with pytest.raises(k.TerminallyDiscredited):
                k.replicative_reset(state, [k.Replication(0.9), k.Replication(0.95)], t + 2 * DAY)


def test_criterion_05_propagation(criterion):
    with criterion(5, "Noisy-OR 0.75, fixpoint idempotence, influence depth <= 4 (< 1 s)"):
        start = time.perf_counter()
        bg = g.BeliefGraph()
        for c, p in (("a", 0.5), ("c", 0.5), ("b", 0.0)):
            bg.set_state(k.new_state(c, p, 0))
        bg.add_edge(g.Edge("a", "b", "Evidential", 1.0))
        bg.add_edge(g.Edge("c", "b", "Evidential", 1.0))
        assert abs(g.propagate(bg, g.GraphParams(damping=1.0)).beliefs["b"] - 0.75) <= 1e-12

        rng = random.Random(505)
        names = [f"n{i:02d}" for i in range(30)]
        bg = g.BeliefGraph()
        for c in names:
            bg.set_state(k.new_state(c, rng.random(), 0))
        for a, b in itertools.combinations(names, 2):
            if rng.random() < 0.15:
                bg.add_edge(g.Edge(a, b, rng.choice(["Evidential", "Semantic", "Deductive"]), rng.uniform(0.1, 0.9)))
        params = g.GraphParams()
        first = g.propagate(bg, params)
        assert first.converged
        second = g.propagate(bg, params)
        assert max(abs(second.beliefs[c] - first.beliefs[c]) for c in names) <= params.delta_conv

        path = g.BeliefGraph()
        hops = [f"p{i}" for i in range(10)]
        for c in hops:
            path.set_state(k.new_state(c, 0.0, 0))
        for a, b in zip(hops, hops[1:]):
            path.add_edge(g.Edge(a, b, "Evidential", 0.5))
        depth, bound = g.bounded_influence_check(path, "p0", 0.1, 0.01)
        assert bound == 4 and depth <= 4
        assert time.perf_counter() - start < 1.0


def test_criterion_06_quarantine_minimality(criterion):
    with criterion(6, "quarantine total belief equals exhaustive minimum on 500 components (<= 10 nodes)"):
        rng = random.Random(606)
        for _ in range(500):
            n = rng.randint(2, 10)
            names = [f"q{i}" for i in range(n)]
            bg = g.BeliefGraph()
            beliefs = {}
            for c in names:
                beliefs[c] = round(rng.uniform(0.61, 1.0), rng.choice([2, 6]))
                bg.set_state(k.new_state(c, beliefs[c], 0))
            # A random spanning tree keeps the component connected; extra edges add cycles.
            pairs = {tuple(sorted((names[i], names[rng.randrange(i)]))) for i in range(1, n)}
            pairs |= {p for p in itertools.combinations(names, 2) if rng.random() < 0.3}
            for a, b in pairs:
                bg.add_conflict(g.ConflictEdge(a, b))
            chosen = g.quarantine(bg)
            assert all(a in chosen or b in chosen for a, b in pairs)
            assert math.isclose(sum(beliefs[c] for c in chosen), oracles.min_quarantine(beliefs, sorted(pairs)),
                                rel_tol=0, abs_tol=1e-12)


def _record_offsets(data: bytes) -> list[int]:
    pos = len(L.MAGIC)
    (size,) = struct.unpack_from(">I", data, pos)
    pos += 4 + size
    out = []
    while pos < len(data):
        (size,) = struct.unpack_from(">I", data, pos)
        out.append(pos + 4)
        pos += 4 + size
    return out


def test_criterion_07_ledger_tamper_evidence(criterion):
    with criterion(7, "bit flips in a 1,000-entry ledger caught at or before the entry; Merkle proofs sound (< 10 s)"):
        start = time.perf_counter()
        key = key_from_seed("acceptance-ledger")
        reg = L.KeyRegistry()
        reg.register(L.SYSTEM_ACTOR, public_hex(key))
        led = L.Ledger(reg)
        for i in range(1000):
            led.append_tx("INSERT" if i % 50 == 0 else "UPDATE", f"c{i // 50}", "evidence", (i % 97) / 97, i,
                          L.SYSTEM_ACTOR, key, {"i": i})
        data = led.to_bytes()
        assert L.verify_chain(data) == L.VerifyResult(True, None, 1000)
        offsets = _record_offsets(data)
        rng = random.Random(707)
        targets = sorted(rng.sample(range(1000), 100))
        for idx in targets:
            (body_len,) = struct.unpack_from(">I", data, offsets[idx])
            flipped = bytearray(data)
            flipped[offsets[idx] + 4 + rng.randrange(body_len)] ^= 1 << rng.randrange(8)
            result = L.verify_chain(bytes(flipped))
            assert not result.ok and result.first_broken_seq <= idx + 1

        for n in (1, 2, 3, 7, 64, 255, 513, 1000, 1024):
            leaves = [oracles.sha(f"leaf-{n}-{i}") for i in range(n)]
            leaves = [bytes.fromhex(h) for h in leaves]
            root = L.merkle_root(leaves)
            assert root == oracles.merkle_root(leaves)
            levels = L._levels(leaves)
            for i, leaf in enumerate(leaves):
                proof = L.merkle_proof(leaves, leaf) if n <= 64 or i % 17 == 0 or i == n - 1 else None
                if proof is None:
                    continue
                assert proof.root == root and L.verify_proof(proof)
                assert len(proof.path) == L.proof_depth(n)
            outsider = bytes.fromhex(oracles.sha(f"outsider-{n}"))
            for i in range(0, n, max(1, n // 16)):
                proof = L.merkle_proof(leaves, leaves[i])
                assert not L.verify_proof(L.MembershipProof(outsider, proof.path, root))
            assert levels[-1][0] == root
        # Every leaf of the largest epoch gets a proof.
        leaves = [bytes.fromhex(oracles.sha(f"full-{i}")) for i in range(1024)]
        levels = L._levels(leaves)
        for i, leaf in enumerate(leaves):
            node, index = leaf, i
            path = []
            for level in levels[:-1]:
                path.append((level[index ^ 1], "L" if index % 2 else "R"))
                index //= 2
            assert L.verify_proof(L.MembershipProof(leaf, tuple(path), levels[-1][0]))
        assert time.perf_counter() - start < 10.0


SIM_SEED = 7


def test_criterion_08_simulation(criterion):
    with criterion(8, "n=100 rho=0.02 gamma=0.15 100 epochs: < 60 s, tau < 0.05, kappa > 0, lift > 0, byte-identical"):
        cfg = sim.SimConfig(n_nodes=100, edge_density=0.02, contradiction_ratio=0.15, epochs=100, seed=SIM_SEED)
        start = time.perf_counter()
        rep = sim.simulate(cfg)
        assert time.perf_counter() - start < 60.0
        assert rep["mean_tau_true"] < 0.05
        assert rep["final_mean_abs_dev_true"] < 0.05
        assert rep["kappa"] is not None and rep["kappa"] > 0
        assert rep["replication_lift"] is not None and rep["replication_lift"] > 0
        jsonschema.validate(rep, sim.report_schema())
        assert sim.report_bytes(sim.simulate(cfg)) == sim.report_bytes(rep)


def test_criterion_09_api_contract(criterion):
    with criterion(9, "trajectory exports match the schema; audit equals live state; as-of never leaks later entries"):
        engine = Engine(fixtures.config(), key=key_from_seed("acceptance-api"), clock=lambda: 1735689600)
        fixtures.replay(engine)
        schema = q.trajectory_schema()
        for ccs in sorted(engine.graph.nodes):
            doc = q.export_trajectory(engine, ccs)
            assert list(doc) == SAMPLE_KEYS
            jsonschema.validate(doc, schema)
            assert len(doc["timestamps"]) == len(doc["beliefs"])
            assert q.audit(engine, ccs)[-1]["pi"] == engine.state(ccs).pi

        rng = random.Random(909)
        violations = 0
        engines = [engine]
        for seed in range(5):
            e = Engine(key=key_from_seed(f"acceptance-fuzz-{seed}"), clock=lambda: 10**8)
            names = [f"c{i}" for i in range(8)]
            t = 0
            for n in names:
                t += rng.randint(0, 1000)
                e.add_synthetic_claim(n, rng.uniform(0.1, 0.9), t)
            for _ in range(80):
                t += rng.randint(0, 500)
                e.apply_evidence(rng.choice(names), rng.choice(k.EVIDENCE_KINDS), rng.random(), t)
            engines.append(e)
        for e in engines:
            last = max(x.t for x in e.ledger.entries)
            first = min(x.t for x in e.ledger.entries)
            for _ in range(60):
                cut = rng.randint(first - 10, last + 10)
                for row in q.query(e, q.QueryRequest(as_of=cut))["results"]:
                    visible = [x for x in e.ledger.trace(row["ccs"]) if x.t <= cut]
                    if not visible or row["pi_at_t"] != visible[-1].pi_after:
                        violations += 1
                    for ref in row["justifications"]:
                        rec = next(r for r in e.evidence[row["ccs"]] if r.id == ref)
                        violations += rec.t > cut
        assert violations == 0


def test_criterion_10_author_scoring(criterion):
    with criterion(10, "author score monotone under 10^4 perturbations; sigma(0)=0.5; citation marginal shrinks"):
        assert cred.sigmoid(0.0) == 0.5
        assert cred.author_score(cred.AuthorProfile("zero")) == 0.5
        rng = random.Random(1010)
        params = cred.CredibilityParams()

        def profile() -> cred.AuthorProfile:
            return cred.AuthorProfile(
                "a", replication_rate=rng.random(), retraction_rate=rng.random(), citation_norm=rng.uniform(0, 1e4),
                reviews=tuple(cred.Review(rng.random()) for _ in range(rng.randint(0, 6))),
                editorial_roles=rng.randint(0, 3), years_active=rng.uniform(0, 30), institutional_trust=rng.random(),
            )

        for _ in range(10_000):
            p = profile()
            base = cred.author_score(p, params)
            step = rng.uniform(1e-3, 0.5)
            if p.replication_rate + step <= 1:
                assert cred.author_score(cred.AuthorProfile(**{**p.__dict__, "replication_rate": p.replication_rate + step}), params) > base
            if p.rho + step <= 1:
                assert cred.author_score(cred.AuthorProfile(**{**p.__dict__, "retraction_rate": p.rho + step}), params) < base
            more = cred.AuthorProfile(**{**p.__dict__, "reviews": p.reviews + (cred.Review(rng.uniform(0.1, 1.0)),)})
            mu_before = cred.peer_engagement(p, params.theta1, params.theta2, params.mu_max)[2]
            mu_after = cred.peer_engagement(more, params.theta1, params.theta2, params.mu_max)[2]
            after = cred.author_score(more, params)
            assert after > base if mu_after > mu_before else after == base

        for _ in range(200):
            p = profile()
            scores = [cred.author_score(cred.AuthorProfile(**{**p.__dict__, "citation_norm": 10.0**e}), params) for e in range(2, 7)]
            gains = [b - a for a, b in zip(scores, scores[1:])]
            assert all(later < earlier for earlier, later in zip(gains, gains[1:]))
