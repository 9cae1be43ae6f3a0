import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bewa import kernel as k

DAY = 86400
probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
open_weights = st.floats(min_value=1e-6, max_value=1 - 1e-6, allow_nan=False)


def test_prior_defaults_and_fixed_point():
    assert k.prior(k.PriorInputs()) == 0.5
    assert k.prior(k.PriorInputs(0.5, 0.5, 0.5, 0.5), (0.7, 0.1, 0.1, 0.1)) == 0.5
    assert k.prior(k.PriorInputs(1, 1, 1, 1), (0.25, 0.25, 0.25, 0.25)) == 0.99


def test_prior_partial_inputs_keep_missing_mass_neutral():
    assert k.prior(k.PriorInputs(A=1.0), (0.4, 0.2, 0.2, 0.2)) == pytest.approx(0.4 + 0.6 * 0.5)


def test_exclusive_set_normalization():
    out = k.normalize_exclusive({"a": 0.6, "b": 0.6, "c": 0.3})
    assert sum(out.values()) == pytest.approx(1.0)
    assert k.normalize_exclusive({"a": 0.2, "b": 0.3}) == {"a": 0.2, "b": 0.3}


def test_evidence_weights():
    p = k.KernelParams()
    assert k.evidence_weight(k.EvidenceUnit("replication", 0.0, 0), p) == 0.5
    assert k.evidence_weight(k.EvidenceUnit("citation", 1.0, 0), p) == pytest.approx(0.8 * oracles.sigmoid(1), abs=1e-12)
    assert k.evidence_weight(k.EvidenceUnit("citation", 1.0, 0), p) == pytest.approx(0.584847, abs=1e-6)
    assert k.evidence_weight(k.EvidenceUnit("contradiction", 1.0, 0), p) == pytest.approx(0.26894, abs=1e-5)


def test_weighted_update_examples():
    assert k.weighted_update(0.2, 0.5) == pytest.approx(0.2, abs=1e-15)
    assert k.weighted_update(0.5, 0.7) == pytest.approx(0.7, abs=1e-15)
    assert k.weighted_update(0.6, 0.9) == pytest.approx(0.54 / 0.58, abs=1e-12)
    with pytest.raises(k.DegenerateWeight):
        k.weighted_update(0.5, 1.0)
    with pytest.raises(k.InputOutOfRange):
        k.weighted_update(1.5, 0.5)


@given(probs, open_weights)
def test_weighted_update_matches_odds_oracle(pi, w):
    assert k.weighted_update(pi, w) == pytest.approx(oracles.update(pi, w), abs=1e-12)


@given(st.floats(min_value=0.01, max_value=0.99), st.lists(open_weights, min_size=2, max_size=6))
def test_order_independence_without_clamp(pi0, ws):
    fwd, rev = pi0, pi0
    for w in ws:
        fwd = k.weighted_update(fwd, w)
    for w in reversed(ws):
        rev = k.weighted_update(rev, w)
    assert fwd == pytest.approx(rev, abs=1e-9)


def _support(w, t=0):
    return k.EvidenceUnit("endorsement", 0.5, t, weight=w)


def test_cumulative_posterior_examples():
    assert k.cumulative_posterior(0.3, []) == 0.3
    two = k.cumulative_posterior(0.5, [_support(0.7), _support(0.7, 1)], delta=1.0)
    assert two == pytest.approx(0.49 / 0.58, abs=1e-12)
    assert two == pytest.approx(oracles.posterior_product(0.5, [0.7, 0.7]), abs=1e-12)
    assert k.cumulative_posterior(0.5, [_support(0.99)], delta=0.2) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(k.UnsortedEvidence):
        k.cumulative_posterior(0.5, [_support(0.7, 5), _support(0.7, 1)])


def test_contradiction_examples():
    assert k.contradiction_value(0.6, 0.0) == 0.6
    assert k.contradiction_value(0.6, 1.0) == 0.0
    assert k.contradiction_value(0.6, 0.5) == pytest.approx(0.3)
    assert k.contradiction_value(0.6, 0.5, "bayes") == pytest.approx(k.weighted_update(0.6, 0.5))


def test_contradiction_collapse_and_discredit():
    p = k.KernelParams(theta_contradict=1.0, kappa_max=2.0, pi_dagger=0.01)
    pi, kappa, status = k.contradict(0.9, 0.6, 0.5, p)
    assert (pi, status) == (0.01, "probational") and kappa == pytest.approx(1.1)
    pi, kappa, status = k.contradict(0.9, 0.6, 1.5, p)
    assert (pi, status) == (0.0, "terminally_discredited")
    assert k.contradict(0.0, 0.2, kappa, p, status)[::2] == (0.0, "terminally_discredited")


def test_discredited_state_ignores_support():
    s = replace(k.new_state("c", 0.0, 0), status="terminally_discredited")
    assert k.apply_evidence(s, _support(0.99, 10)) is s
    with pytest.raises(k.TerminallyDiscredited):
        k.replicative_reset(s, [k.Replication(0.9), k.Replication(0.9)], 10)


def test_apply_evidence_refuses_past_and_records_history():
    s = k.apply_evidence(k.new_state("c", 0.5, 100), _support(0.7, 200))
    assert s.history[-1] == (200, s.pi, "evidence:endorsement")
    assert s.last_reinforced_at == 200
    with pytest.raises(k.ClockRegression):
        k.apply_evidence(s, _support(0.7, 150))


def test_weak_support_does_not_reset_decay_clock():
    s = k.apply_evidence(k.new_state("c", 0.5, 100), _support(0.52, 200))
    assert s.last_reinforced_at == 100


def test_decay_examples():
    s = k.new_state("c", 0.8, 0)
    assert k.decay(s, 0).pi == 0.8
    ln2 = math.log(2)
    assert k.decay(s, DAY, k.DecayParams(rate=ln2)).pi == pytest.approx(0.4, abs=1e-12)
    s9 = k.new_state("c", 0.9, 0)
    assert k.decay(s9, DAY, k.DecayParams(mode="to_neutral", rate=ln2)).pi == pytest.approx(0.7, abs=1e-12)


def test_decay_ticks_compose():
    p = k.DecayParams(rate=0.03, alpha_t=0.01, beta=0.2)
    s = k.new_state("c", 0.9, 0)
    stepped = s
    for day in range(1, 31):
        stepped = k.decay(stepped, day * DAY, p, isolation=0.3)
    once = k.decay(s, 30 * DAY, p, isolation=0.3)
    assert stepped.pi == pytest.approx(once.pi, abs=1e-12)


def test_decay_immunity_and_snapshot():
    p = k.DecayParams(rate=0.1, immunity_replications=2, immunity_citations=3)
    s = k.new_state("c", 0.9, 0)
    assert k.decay(s, 10 * DAY, p, replications=2, citations=3).pi == 0.9
    decayed = k.decay(s, 10 * DAY, p, replications=1, citations=3)
    assert decayed.pi < 0.9 and decayed.pi_star == 0.9


def test_decay_marks_stale_and_skips_probation():
    s = k.decay(k.new_state("c", 0.5, 0), 100 * DAY, k.DecayParams(rate=0.1))
    assert s.status == "stale"
    p = k.new_state("c", 0.05, 0, "probational")
    assert k.decay(p, 100 * DAY) is p


def test_decay_rejects_clock_regression():
    with pytest.raises(k.ClockRegression):
        k.decay(k.new_state("c", 0.5, 100), 50)


def test_half_life():
    assert k.half_life(math.log(2)) == pytest.approx(1.0)
    assert k.half_life(0.1) == pytest.approx(6.9315, abs=1e-4)
    assert k.half_life(2 * math.log(2)) == pytest.approx(0.5)
    with pytest.raises(k.ZeroRate):
        k.half_life(0.0)


def test_reinforce_examples():
    s = k.new_state("c", 0.2, 0)
    with pytest.raises(k.BelowThreshold):
        k.reinforce(s, 0.55, 10)
    stale = replace(s, status="stale")
    r = k.reinforce(stale, 0.9, 10)
    assert r.pi == pytest.approx(0.18 / 0.26, abs=1e-12)
    assert r.status == "canonical" and r.last_reinforced_at == 10
    again = k.reinforce(r, 0.9, 10)
    assert again.last_reinforced_at == 10


def test_replicative_reset_examples():
    s = k.new_state("c", 1.0, 0)
    out = k.replicative_reset(s, [k.Replication(0.8), k.Replication(0.9)], 5, k.ResetParams(eta=1.0))
    assert out.pi == pytest.approx(0.85, abs=1e-12)
    s = replace(k.new_state("c", 0.3, 0), pi_star=0.8)
    bound = k.replicative_reset(s, [k.Replication(0.8), k.Replication(0.9)], 5, k.ResetParams(eta=0.5 / math.log(3)))
    assert bound.pi == pytest.approx(0.4, abs=1e-12)
    assert bound.history[-1][2] == "replicative_reset"


def test_replicative_reset_guards():
    s = k.new_state("c", 0.5, 0, domain="bio")
    with pytest.raises(k.InsufficientReplications):
        k.replicative_reset(s, [k.Replication(0.9)], 1)
    with pytest.raises(k.InsufficientReplications):
        k.replicative_reset(s, [k.Replication(0.9), k.Replication(0.4)], 1)
    with pytest.raises(k.DomainMismatch):
        k.replicative_reset(s, [k.Replication(0.9, domain="physics"), k.Replication(0.9)], 1)
    ok = k.replicative_reset(s, [k.Replication(0.9, domain="chem"), k.Replication(0.9)], 1,
                             k.ResetParams(cross_map={"bio": frozenset({"chem"})}))
    assert ok.pi > 0


def test_probation_examples():
    s = k.new_state("c", 0.05, 0, "probational")
    stay = k.probation_step(s, 0.0, 0.0, 10 * DAY)
    assert (stay.pi, stay.status) == (0.05, "probational")
    assert k.maturation(2.0, 1.0) == pytest.approx(0.55)
    promoted = k.probation_step(s, 2.0, 1.0, 10 * DAY)
    assert promoted.status == "canonical" and promoted.pi == pytest.approx(0.55)
    edge = k.probation_step(s, 0.0, 0.0, 180 * DAY)
    assert edge.pi == 0.05 and edge.expiring and edge.status == "probational"
    late = k.probation_step(s, 0.0, 0.0, 200 * DAY)
    assert late.status == "stale" and late.pi == pytest.approx(0.05 * math.exp(-0.05 * 20))
    with pytest.raises(k.NotProbational):
        k.probation_step(promoted, 0, 0, 11 * DAY)


def test_history_only_grows_on_change():
    s = k.new_state("c", 0.5, 0)
    same = k.apply_evidence(s, _support(0.5, 1))
    assert len(same.history) == 1


ops = st.one_of(
    st.tuples(st.just("support"), open_weights),
    st.tuples(st.just("contra"), st.floats(0.0, 1.0)),
    st.tuples(st.just("decay"), st.floats(0.0, 5.0)),
    st.tuples(st.just("neutral"), st.floats(0.0, 5.0)),
    st.tuples(st.just("reset"), st.floats(0.51, 1.0)),
)


@settings(max_examples=300, deadline=None)
@given(probs, st.lists(ops, max_size=25))
def test_belief_stays_a_probability(pi0, seq):
    s = k.new_state("c", pi0, 0)
    t = 0
    for op, x in seq:
        t += DAY
        if op == "support":
            s = k.apply_evidence(s, k.EvidenceUnit("endorsement", 0.5, t, weight=x))
        elif op == "contra":
            s = k.apply_evidence(s, k.EvidenceUnit("contradiction", 0.5, t, weight=min(max(x, 1e-6), 1 - 1e-6)))
        elif op in ("decay", "neutral"):
            mode = "to_zero" if op == "decay" else "to_neutral"
            s = k.decay(s, t, k.DecayParams(mode=mode, rate=x))
        elif s.status != "terminally_discredited":
            s = k.replicative_reset(s, [k.Replication(x), k.Replication(x)], t)
        assert 0.0 <= s.pi <= 1.0 and math.isfinite(s.pi)
        assert [h[0] for h in s.history] == sorted(h[0] for h in s.history)
        if s.status == "terminally_discredited":
            assert s.pi == 0.0
