"""Per-claim belief algebra: priors, updates, contradiction, decay, resets, probation.

Every operation is a pure transition: a :class:`BeliefState` goes in and a new
one comes out.  Times are epoch seconds; rate constants are per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .credibility import sigmoid
from .errors import BewaError
from .timeutil import DAY

STATUSES = ("probational", "canonical", "stale", "quarantined", "terminally_discredited")
EVIDENCE_KINDS = ("replication", "endorsement", "citation", "contradiction")
# Nodes in these states do not emit influence during graph propagation.
MASKED_STATUSES = frozenset({"probational", "quarantined", "terminally_discredited", "stale"})
W_FLOOR = 1e-6


class KernelError(BewaError):
    pass


class InputOutOfRange(KernelError):
    pass


class DegenerateWeight(KernelError):
    pass


class UnsortedEvidence(KernelError):
    pass


class ClockRegression(KernelError):
    pass


class ZeroRate(KernelError):
    pass


class BelowThreshold(KernelError):
    pass


class InsufficientReplications(KernelError):
    pass


class DomainMismatch(KernelError):
    pass


class TerminallyDiscredited(KernelError):
    pass


class NotProbational(KernelError):
    pass


@dataclass(frozen=True)
class KernelParams:
    lambda_plus: float = 1.0
    lambda_minus: float = 1.0
    eta: float = 0.8
    theta_r: float = 0.55
    theta_contradict: float = 1.5
    pi_dagger: float = 0.01
    kappa_max: float = 3.0
    delta: float = 0.2
    epsilon_stale: float = 0.01
    contradiction_form: str = "multiplicative"  # or "bayes"
    prior_weights: tuple[float, float, float, float] = (0.4, 0.2, 0.2, 0.2)


@dataclass(frozen=True)
class DecayParams:
    mode: str = "to_zero"
    rate: float = 0.01
    alpha_t: float = 0.0
    beta: float = 0.0
    domain: str = ""
    immunity_replications: int = 3
    immunity_citations: int = 10

    def __post_init__(self) -> None:
        if self.mode not in ("to_zero", "to_neutral"):
            raise ValueError(f"unknown decay mode {self.mode!r}")
        if min(self.rate, self.alpha_t, self.beta) < 0:
            raise ValueError("decay coefficients must be non-negative")


@dataclass(frozen=True)
class ResetParams:
    gamma_r: int = 2
    delta_r: float = 0.5
    eta: float = 0.5
    cross_map: Mapping[str, frozenset[str]] = field(default_factory=dict)


@dataclass(frozen=True)
class ProbationParams:
    pi0: float = 0.05
    lambda_c: float = 0.1
    lambda_r: float = 0.3
    pi_min: float = 0.5
    delta_max_days: float = 180.0
    lambda_d: float = 0.05


@dataclass(frozen=True)
class PriorInputs:
    A: float | None = None
    V: float | None = None
    M: float | None = None
    D: float | None = None


@dataclass(frozen=True)
class EvidenceUnit:
    kind: str
    quality: float
    t: int
    source: str = ""
    weight: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in EVIDENCE_KINDS:
            raise ValueError(f"unknown evidence kind {self.kind!r}")
        if not 0.0 <= self.quality <= 1.0:
            raise InputOutOfRange(f"quality {self.quality} outside [0, 1]")


HistoryEntry = tuple[int, float, str]


@dataclass(frozen=True)
class BeliefState:
    ccs: str
    pi: float
    status: str
    created_at: int
    last_reinforced_at: int
    last_decay_at: int | None = None
    pi_star: float | None = None
    contradiction_mass: float = 0.0
    domain: str = ""
    expiring: bool = False
    history: tuple[HistoryEntry, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.pi <= 1.0:
            raise InputOutOfRange(f"belief {self.pi} outside [0, 1]")
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def masked(self) -> bool:
        return self.status in MASKED_STATUSES

    @property
    def snapshot(self) -> float:
        return self.pi if self.pi_star is None else self.pi_star

    @property
    def last_event_at(self) -> int:
        return self.history[-1][0] if self.history else self.created_at


def new_state(ccs: str, pi0: float, t: int, status: str = "canonical", domain: str = "") -> BeliefState:
    return BeliefState(
        ccs=ccs,
        pi=pi0,
        status=status,
        created_at=t,
        last_reinforced_at=t,
        last_decay_at=t,
        domain=domain,
        history=((t, pi0, "prior"),),
    )


def _record(state: BeliefState, t: int, cause: str, **changes) -> BeliefState:
    new = replace(state, **changes)
    if new.pi != state.pi or new.status != state.status:
        new = replace(new, history=state.history + ((t, new.pi, cause),))
    return new


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


# -- priors and weights -------------------------------------------------------


def prior(inputs: PriorInputs, weights: Sequence[float] = KernelParams.prior_weights) -> float:
    """Convex combination of the present inputs; missing mass sits at 0.5."""
    values = (inputs.A, inputs.V, inputs.M, inputs.D)
    if any(w < 0 for w in weights):
        raise InputOutOfRange("prior weights must be non-negative")
    total_w = sum(weights)
    if total_w <= 0:
        raise InputOutOfRange("prior weights must not all be zero")
    present = [(v, w / total_w) for v, w in zip(values, weights) if v is not None]
    if not present:
        return 0.5
    for v, _ in present:
        if not 0.0 <= v <= 1.0:
            raise InputOutOfRange(f"prior input {v} outside [0, 1]")
    mass = sum(w for _, w in present)
    value = sum(v * w for v, w in present) + (1.0 - mass) * 0.5
    return clamp(value, 0.01, 0.99)


def normalize_exclusive(priors: Mapping[str, float]) -> dict[str, float]:
    """Scale priors of a mutually exclusive set so that they sum to at most one."""
    total = sum(priors.values())
    if total <= 1.0:
        return dict(priors)
    return {k: v / total for k, v in priors.items()}


def evidence_weight(e: EvidenceUnit, params: KernelParams = KernelParams()) -> float:
    if e.weight is not None:
        return clamp(e.weight, W_FLOOR, 1.0 - W_FLOOR)
    if e.kind in ("replication", "endorsement"):
        raw = params.lambda_plus * sigmoid(e.quality)
    elif e.kind == "contradiction":
        raw = params.lambda_minus * sigmoid(-e.quality)
    else:
        raw = params.eta * sigmoid(e.quality)
    return clamp(raw, W_FLOOR, 1.0 - W_FLOOR)


# -- update algebra -------------------------------------------------------------


def weighted_update(pi: float, w: float) -> float:
    if not 0.0 < w < 1.0:
        raise DegenerateWeight(f"weight {w} outside (0, 1)")
    if not 0.0 <= pi <= 1.0:
        raise InputOutOfRange(f"belief {pi} outside [0, 1]")
    num = pi * w
    return num / (num + (1.0 - pi) * (1.0 - w))


def contradiction_value(pi: float, w_counter: float, form: str = "multiplicative") -> float:
    if not 0.0 <= w_counter <= 1.0:
        raise InputOutOfRange(f"counter-weight {w_counter} outside [0, 1]")
    if form == "bayes":
        return weighted_update(pi, clamp(w_counter, W_FLOOR, 1.0 - W_FLOOR))
    return pi * (1.0 - w_counter)


def contradict(
    pi: float, w_counter: float, kappa: float = 0.0, params: KernelParams = KernelParams(), status: str = "canonical"
) -> tuple[float, float, str]:
    """Apply one counter-weight; returns ``(pi, kappa, status)``.

    Accumulated counter-weight above ``theta_contradict`` collapses belief to
    ``pi_dagger`` and above ``kappa_max`` discredits the claim permanently.
    """
    if status == "terminally_discredited":
        return 0.0, kappa + w_counter, status
    new_pi = contradiction_value(pi, w_counter, params.contradiction_form)
    kappa = kappa + w_counter
    if kappa > params.kappa_max:
        return 0.0, kappa, "terminally_discredited"
    if kappa > params.theta_contradict:
        return min(new_pi, params.pi_dagger), kappa, "probational"
    return new_pi, kappa, status


def smoothed(prev: float, new: float, delta: float) -> float:
    return clamp(new, prev - delta, prev + delta)


def cumulative_posterior(
    pi0: float, evidence: Sequence[EvidenceUnit], params: KernelParams = KernelParams(), delta: float | None = None
) -> float:
    cap = params.delta if delta is None else delta
    pi = pi0
    last_t: int | None = None
    for e in evidence:
        if last_t is not None and e.t < last_t:
            raise UnsortedEvidence(f"evidence at {e.t} precedes {last_t}")
        last_t = e.t
        w = evidence_weight(e, params)
        if e.kind == "contradiction":
            nxt = contradiction_value(pi, w, params.contradiction_form)
        else:
            nxt = weighted_update(pi, w)
        pi = smoothed(pi, nxt, cap)
    return pi


def apply_evidence(
    state: BeliefState, e: EvidenceUnit, params: KernelParams = KernelParams(), cause: str | None = None
) -> BeliefState:
    """Fold one evidence unit into a state.

    Support above ``theta_r`` also resets the decay clock.  Evidence older
    than the latest history entry is refused so that the past stays fixed.
    """
    if e.t < state.last_event_at:
        raise ClockRegression(f"evidence at {e.t} precedes last event at {state.last_event_at}")
    if state.status == "terminally_discredited":
        return state
    w = evidence_weight(e, params)
    cause = cause or f"evidence:{e.kind}"
    if e.kind == "contradiction":
        pi, kappa, status = contradict(state.pi, w, state.contradiction_mass, params, state.status)
        if status == state.status:
            pi = smoothed(state.pi, pi, params.delta)
        tag = "collapse" if status != state.status else cause
        return _record(state, e.t, tag, pi=pi, contradiction_mass=kappa, status=status)
    pi = smoothed(state.pi, weighted_update(state.pi, w), params.delta)
    if w > params.theta_r:
        status = "canonical" if state.status == "stale" else state.status
        return _record(
            state, e.t, cause, pi=pi, status=status, last_reinforced_at=e.t, last_decay_at=e.t, pi_star=None
        )
    return _record(state, e.t, cause, pi=pi)


def reinforce(
    state: BeliefState, w: float, t: int, theta_r: float = KernelParams.theta_r, max_step: float | None = None
) -> BeliefState:
    if w <= theta_r:
        raise BelowThreshold(f"weight {w} does not exceed {theta_r}")
    if t < state.last_reinforced_at:
        raise ClockRegression(f"reinforcement at {t} precedes {state.last_reinforced_at}")
    if state.status == "terminally_discredited":
        raise TerminallyDiscredited(state.ccs)
    pi = weighted_update(state.pi, w)
    if max_step is not None:
        pi = smoothed(state.pi, pi, max_step)
    status = "canonical" if state.status == "stale" else state.status
    return _record(state, t, "reinforce", pi=pi, status=status, last_reinforced_at=t, last_decay_at=t, pi_star=None)


# -- decay ----------------------------------------------------------------------


def decay_rate(params: DecayParams, elapsed_days: float, isolation: float = 0.0) -> float:
    return params.rate + params.alpha_t * math.log1p(elapsed_days) + params.beta * isolation


def _exponent(params: DecayParams, elapsed_days: float, isolation: float) -> float:
    return decay_rate(params, elapsed_days, isolation) * elapsed_days


def decay_value(pi: float, exponent: float, mode: str) -> float:
    factor = math.exp(-exponent)
    if mode == "to_neutral":
        return 0.5 + (pi - 0.5) * factor
    return pi * factor


def decay(
    state: BeliefState,
    now: int,
    params: DecayParams = DecayParams(),
    isolation: float = 0.0,
    replications: int = 0,
    citations: int = 0,
    epsilon_stale: float = KernelParams.epsilon_stale,
) -> BeliefState:
    """Decay belief from the last tick to ``now``.

    The compound rate depends on time since the last reinforcement, so the
    exponent applied here is the increment of ``rate(age) * age`` between the
    previous tick and ``now``.  Successive ticks therefore compose to a single
    tick over the whole span.
    """
    if now < state.last_reinforced_at:
        raise ClockRegression(f"now={now} precedes last reinforcement {state.last_reinforced_at}")
    if state.status in ("terminally_discredited", "probational"):
        return state
    if replications >= params.immunity_replications and citations >= params.immunity_citations:
        return replace(state, last_decay_at=now)
    start = state.last_reinforced_at if state.last_decay_at is None else max(state.last_decay_at, state.last_reinforced_at)
    if now <= start:
        return state
    age_now = (now - state.last_reinforced_at) / DAY
    age_prev = (start - state.last_reinforced_at) / DAY
    exponent = _exponent(params, age_now, isolation) - _exponent(params, age_prev, isolation)
    pi = decay_value(state.pi, exponent, params.mode)
    status = state.status
    if pi < epsilon_stale and status == "canonical":
        status = "stale"
    pi_star = state.pi if state.pi_star is None else state.pi_star
    return _record(state, now, "decay", pi=pi, status=status, last_decay_at=now, pi_star=pi_star)


def half_life(rate: float) -> float:
    if rate <= 0:
        raise ZeroRate("half-life needs a positive rate")
    return math.log(2) / rate


# -- replication reset and probation -------------------------------------------


@dataclass(frozen=True)
class Replication:
    pi: float
    weight: float = 1.0
    domain: str = ""
    conditions: frozenset[str] = frozenset()


def reset_modifier(count: int, eta: float) -> float:
    return min(1.0, math.log1p(count) * eta)


def replicative_reset(
    state: BeliefState, replications: Sequence[Replication], t: int, params: ResetParams = ResetParams()
) -> BeliefState:
    if state.status == "terminally_discredited":
        raise TerminallyDiscredited(state.ccs)
    qualifying = [r for r in replications if r.pi > params.delta_r]
    if len(qualifying) < params.gamma_r or len(qualifying) != len(replications):
        raise InsufficientReplications(
            f"{len(qualifying)} of {len(replications)} replications exceed {params.delta_r}; need {params.gamma_r}"
        )
    allowed = {state.domain} | set(params.cross_map.get(state.domain, ()))
    for r in replications:
        if r.domain and state.domain and r.domain not in allowed:
            raise DomainMismatch(f"replication domain {r.domain!r} not mapped from {state.domain!r}")
    total_w = sum(r.weight for r in replications)
    if total_w <= 0:
        raise InsufficientReplications("replication weights sum to zero")
    mean = sum(r.weight * r.pi for r in replications) / total_w
    mu = reset_modifier(len(replications), params.eta)
    pi = clamp(min(mean, mu * state.snapshot), 0.0, 1.0)
    status = "canonical" if state.status in ("stale", "probational") else state.status
    return _record(
        state, t, "replicative_reset", pi=pi, status=status, last_reinforced_at=t, last_decay_at=t, pi_star=None
    )


def maturation(citations: float, replications: float, params: ProbationParams = ProbationParams()) -> float:
    return params.pi0 + params.lambda_c * citations + params.lambda_r * replications


def probation_step(
    state: BeliefState, citations: float, replications: float, now: int, params: ProbationParams = ProbationParams()
) -> BeliefState:
    if state.status != "probational":
        raise NotProbational(state.ccs)
    deadline = state.created_at + params.delta_max_days * DAY
    value = maturation(citations, replications, params)
    if now <= deadline and value >= params.pi_min:
        return _record(state, now, "promotion", pi=clamp(value, 0.0, 1.0), status="canonical", expiring=False,
                       last_reinforced_at=now, last_decay_at=now)
    if now < deadline:
        return _record(state, now, "probation", pi=params.pi0)
    if now == deadline:
        return _record(state, now, "probation_expiring", pi=params.pi0, expiring=True)
    overdue = (now - deadline) / DAY
    return _record(state, now, "probation_expired", pi=params.pi0 * math.exp(-params.lambda_d * overdue),
                   status="stale", expiring=False, last_decay_at=now)


def fold(state: BeliefState, evidence: Iterable[EvidenceUnit], params: KernelParams = KernelParams()) -> BeliefState:
    for e in evidence:
        state = apply_evidence(state, e, params)
    return state
