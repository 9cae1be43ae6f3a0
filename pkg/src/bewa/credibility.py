"""Author and claim credibility scores.

All logarithms are natural.  These are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import BewaError


class CredibilityError(BewaError):
    pass


class NegativeWeight(CredibilityError):
    pass


class FutureCitation(CredibilityError):
    pass


class DimensionMismatch(CredibilityError):
    pass


class ThresholdViolation(CredibilityError):
    pass


class AffinityOutOfRange(CredibilityError):
    pass


@dataclass(frozen=True)
class CredibilityParams:
    beta: tuple[float, float, float, float] = (2.0, 0.5, 2.0, 1.0)
    gamma: float = 0.5
    eta: float = 0.25
    theta1: float = 1.0
    theta2: float = 2.0
    mu_max: float = 5.0
    epsilon: float = 0.5
    lambda_c: float = math.log(2) / 365.0  # per day
    theta_s: float = 0.85


@dataclass(frozen=True)
class Review:
    quality: float | None = None
    verified: bool = True
    t: int = 0


@dataclass(frozen=True)
class AuthorProfile:
    caid: str
    replication_rate: float = 0.0
    retraction_rate: float | None = None
    citation_norm: float = 0.0
    reviews: tuple[Review, ...] = ()
    editorial_roles: int = 0
    years_active: float = 0.0
    total_pubs: int = 0
    retracted_pubs: int = 0
    institutional_trust: float = 1.0

    def __post_init__(self) -> None:
        if self.retracted_pubs > self.total_pubs:
            raise ValueError("retracted_pubs exceeds total_pubs")
        if self.years_active < 0:
            raise ValueError("years_active must be non-negative")

    @property
    def rho(self) -> float:
        if self.retraction_rate is not None:
            return self.retraction_rate
        return self.retracted_pubs / self.total_pubs if self.total_pubs else 0.0


@dataclass(frozen=True)
class CitationEvent:
    citing_doc_id: str
    cited_ccs: str
    t: int
    credibility: float
    intent: int = 1
    cluster_id: str = ""

    def __post_init__(self) -> None:
        if self.intent not in (-1, 0, 1):
            raise ValueError("citation intent must be -1, 0 or +1")


@dataclass(frozen=True)
class ReplicationEvent:
    replicating_doc_id: str
    target_ccs: str
    outcome: int
    weight: float = 1.0
    authors: frozenset[str] = frozenset()
    institutions: frozenset[str] = frozenset()
    funding: frozenset[str] = frozenset()
    conditions: frozenset[str] = frozenset()
    domain: str = ""

    def __post_init__(self) -> None:
        if self.outcome not in (-1, 0, 1):
            raise ValueError("replication outcome must be -1, 0 or +1")


@dataclass(frozen=True)
class Provenance:
    """Author, institution and funding sets of an original claim."""

    authors: frozenset[str] = frozenset()
    institutions: frozenset[str] = frozenset()
    funding: frozenset[str] = frozenset()


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def replication_rate(outcomes: Iterable[tuple[str, bool]]) -> float:
    """Share of replicated claims among testable ones; theoretical claims are skipped.

    ``outcomes`` yields ``(method, replicated)`` pairs.
    """
    testable = [ok for method, ok in outcomes if method != "theoretical"]
    return sum(testable) / len(testable) if testable else 0.0


def peer_engagement(
    p: AuthorProfile, theta1: float = 1.0, theta2: float = 2.0, mu_max: float = 5.0
) -> tuple[float, float, float]:
    """Return raw, quality-adjusted and trust-weighted engagement."""
    reviews = [r for r in p.reviews if r.verified]
    denom = 1.0 + math.log1p(p.years_active)
    mu = (theta1 * len(reviews) + theta2 * p.editorial_roles) / denom
    quality_mass = sum(0.5 if r.quality is None else r.quality for r in reviews)
    mu_star = (theta1 * quality_mass + theta2 * p.editorial_roles) / denom
    mu_dagger = min(p.institutional_trust * mu_star, mu_max)
    return mu, mu_star, mu_dagger


def author_score(p: AuthorProfile, params: CredibilityParams = CredibilityParams()) -> float:
    if any(b < 0 for b in params.beta) or params.theta1 < 0 or params.theta2 < 0:
        raise NegativeWeight("author score weights must be non-negative")
    b1, b2, b3, b4 = params.beta
    _, _, mu = peer_engagement(p, params.theta1, params.theta2, params.mu_max)
    return sigmoid(b1 * p.replication_rate + b2 * math.log1p(p.citation_norm) - b3 * p.rho + b4 * mu)


def retraction_penalty(retracted: int, total: int, gamma: float = 0.5) -> float:
    return gamma * retracted / (1.0 + math.log1p(total))


def retraction_adjusted_score(p: AuthorProfile, params: CredibilityParams = CredibilityParams()) -> float:
    """Author score minus the retraction penalty plus a replication credit.

    Once any retraction exists the result is held strictly below one.
    """
    if params.gamma < 0 or params.eta < 0:
        raise NegativeWeight("gamma and eta must be non-negative")
    penalty = retraction_penalty(p.retracted_pubs, p.total_pubs, params.gamma)
    raw = author_score(p, params) - penalty + params.eta * p.replication_rate
    if p.retracted_pubs > 0:
        raw = min(raw, 1.0 - penalty)
    return raw


def citation_influence(
    events: Sequence[CitationEvent],
    now: int,
    lambda_c: float = CredibilityParams.lambda_c,
    epsilon: float = 0.5,
    k: int | None = None,
) -> tuple[float, float]:
    """Decayed, intent-signed citation mass and its entropy-penalised form.

    ``lambda_c`` is per day; timestamps are epoch seconds.  ``k`` defaults
    to the number of distinct clusters.
    """
    if lambda_c <= 0:
        raise ValueError("lambda_c must be positive")
    total = 0.0
    for e in events:
        if e.t > now:
            raise FutureCitation(f"citation {e.citing_doc_id} at {e.t} is after {now}")
        total += e.intent * math.exp(-lambda_c * (now - e.t) / 86400.0) * e.credibility
    counts = Counter(e.cluster_id for e in events)
    if k is None:
        k = max(len(counts), 1)
    if k < 1:
        raise ValueError("cluster count must be >= 1")
    n = sum(counts.values())
    entropy = -sum((c / n) * math.log(c / n) for c in counts.values()) if n else 0.0
    ratio = entropy / math.log(k) if k > 1 else 0.0
    return total, total * (1.0 - epsilon * (1.0 - ratio))


def citation_entropy(events: Sequence[CitationEvent]) -> float:
    counts = Counter(e.cluster_id for e in events)
    n = sum(counts.values())
    return -sum((c / n) * math.log(c / n) for c in counts.values()) if n else 0.0


def is_independent(e: ReplicationEvent, origin: Provenance) -> bool:
    return (
        not (e.authors & origin.authors)
        and not (e.institutions & origin.institutions)
        and not (e.funding & origin.funding)
    )


def damp(r: float) -> float:
    """Log damping extended to negative totals with odd symmetry."""
    return math.log1p(r) if r >= 0 else -math.log1p(-r)


def replication_score(
    events: Iterable[ReplicationEvent], origin: Provenance = Provenance()
) -> tuple[float, float]:
    r = math.fsum(e.outcome * e.weight for e in events if is_independent(e, origin))
    return r, damp(r)


def semantic_equivalence(v1: Sequence[float], v2: Sequence[float]) -> float:
    if len(v1) != len(v2):
        raise DimensionMismatch(f"{len(v1)} != {len(v2)}")
    return math.fsum(a * b for a, b in zip(v1, v2))


def unit_vector(values: Sequence[float]) -> list[float]:
    norm = math.sqrt(math.fsum(x * x for x in values))
    if norm == 0:
        raise ValueError("cannot normalise a zero vector")
    return [x / norm for x in values]


def extended_replication(
    own: float,
    equivalents: Iterable[tuple[float, float]],
    eta: float = 0.5,
    theta_s: float = 0.85,
) -> float:
    """``own`` plus ``eta`` times similarity-weighted damped scores of equivalents.

    ``equivalents`` yields ``(similarity, damped_score)`` pairs.
    """
    extra = 0.0
    for alpha, r in equivalents:
        if alpha <= theta_s:
            raise ThresholdViolation(f"similarity {alpha} does not exceed {theta_s}")
        extra += alpha * r
    return own + eta * extra


def composite_support(
    citation: float, replication: float, neighbours: Iterable[tuple[float, float]] = ()
) -> float:
    """Citation term plus replication term plus sum of weight * belief over equivalents."""
    return citation + replication + math.fsum(w * pi for w, pi in neighbours)


def cross_domain_score(score: float, affinity: float) -> float:
    if not 0.0 <= affinity <= 1.0:
        raise AffinityOutOfRange(f"affinity {affinity} outside [0, 1]")
    return score * affinity


@dataclass
class ClaimEvidence:
    """Citation and replication events held against one claim."""

    citations: list[CitationEvent] = field(default_factory=list)
    replications: list[ReplicationEvent] = field(default_factory=list)
