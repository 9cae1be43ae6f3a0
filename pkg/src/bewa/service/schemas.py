"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class AuthorIn(BaseModel):
    orcid: Optional[str] = None
    name: str
    affiliation: str = ""
    profile: Optional[dict[str, Any]] = None


class ContextIn(BaseModel):
    concept: str = ""
    method: Literal["RCT", "observational", "meta-analysis", "theoretical", "simulation", "other"] = "other"
    statistical_frame: Literal["frequentist", "bayesian", "nonparametric", "none"] = "none"


class VenueIn(BaseModel):
    name: str
    R: float = Field(0.0, ge=0, le=1)
    T: float = Field(0.0, ge=0, le=1)
    C: float = Field(0.0, ge=0, le=1)


class SourceFlagsIn(BaseModel):
    verifiable: bool = False
    indexed: bool = False
    peer_reviewed: bool = False


class MetadataIn(BaseModel):
    doi: Optional[str] = None
    published_at: Optional[Union[str, int]] = None
    venue: Optional[VenueIn] = None
    funding: Optional[str] = None
    replication_status: Literal["untested", "replicated", "failed", "mixed"] = "untested"
    source_flags: SourceFlagsIn = SourceFlagsIn()


class ClaimIn(BaseModel):
    """One corpus entry."""

    model_config = ConfigDict(extra="allow", populate_by_name=True)

    id: Optional[str] = None
    normalized_form: str = Field(min_length=1)
    author: AuthorIn
    asserted_at: Union[str, int]
    context: ContextIn = ContextIn()
    metadata: MetadataIn = MetadataIn()
    signature: Optional[str] = None
    signer_key: Optional[str] = None


class ClaimBatchIn(BaseModel):
    entries: list[dict[str, Any]]
    trusted_keys: list[str] = []


class IngestOut(BaseModel):
    accepted: list[str]
    rejected: list[dict[str, Any]]


class ClaimCreated(BaseModel):
    accepted: bool
    ccs: Optional[str] = None
    reasons: list[str] = []


class HistoryPoint(BaseModel):
    t: int
    pi: float
    cause: str


class BeliefOut(BaseModel):
    ccs: str
    pi: float
    status: str
    created_at: int
    last_reinforced_at: int
    contradiction_mass: float
    marginal: Optional[float] = None
    history: list[HistoryPoint]


class ClaimOut(BaseModel):
    ccs: str
    normalized_form: str
    author: str
    asserted_at: int
    context: dict[str, str]
    domain_set: list[str]
    version: int
    parent_ccs: Optional[str]
    epistemic_status: str
    metadata: Optional[dict[str, Any]] = None
    belief: BeliefOut


class EvidenceIn(BaseModel):
    ccs: str
    kind: Literal["replication", "endorsement", "citation", "contradiction"]
    quality: float = Field(ge=0, le=1)
    t: Optional[Union[int, str]] = None
    source: str = ""
    weight: Optional[float] = Field(None, gt=0, lt=1)
    intent: Literal[-1, 0, 1] = 1
    cluster: Optional[str] = None
    authors: list[str] = []
    institutions: list[str] = []
    funding: list[str] = []


class ContextFilter(BaseModel):
    model_config = ConfigDict(extra="forbid")

    concept: Optional[str] = None
    method: Optional[str] = None
    statistical_frame: Optional[str] = None


class QueryFilters(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ccs_prefix: Optional[str] = None
    author: Optional[str] = None
    domain: Optional[str] = None
    context: Optional[ContextFilter] = None


class Traversal(BaseModel):
    anchor: str
    distance: int = Field(ge=0)


class IncludeFlags(BaseModel):
    justifications: bool = True
    contradictions: bool = True


class QueryIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    filters: QueryFilters = QueryFilters()
    as_of: Optional[Union[int, str]] = None
    traversal: Optional[Traversal] = None
    include: IncludeFlags = IncludeFlags()


class QueryRow(BaseModel):
    ccs: str
    pi_at_t: Optional[float]
    status: str
    justifications: Optional[list[str]] = None
    contradictions: Optional[list[str]] = None


class QueryOut(BaseModel):
    results: list[QueryRow]
    anchor: str


class AuditRow(BaseModel):
    seq: int
    t: int
    pi: Optional[float]
    evidence: list[str]
    modifications: list[str]
    tx_type: str
    cause: str


class AuditOut(BaseModel):
    ccs: str
    trajectory: list[AuditRow]


class LinkedClaim(BaseModel):
    id: str
    relation: str


class TrajectoryOut(BaseModel):
    claim_id: str
    timestamps: list[str]
    beliefs: list[float]
    linked_claims: list[LinkedClaim]
    current_status: str
    cluster_membership: list[str]


class TimeIn(BaseModel):
    now: Optional[Union[int, str]] = None


class DecayOut(BaseModel):
    now: int
    changed: list[str]


class PropagateIn(BaseModel):
    max_iters: Optional[int] = Field(None, ge=1)
    schedule: Optional[Literal["deterministic", "priority"]] = None
    damping: Optional[float] = Field(None, gt=0, le=1)


class PropagateOut(BaseModel):
    iterations: int
    converged: bool
    frozen: list[str]
    beliefs: dict[str, float]


class ConflictOut(BaseModel):
    a: str
    b: str
    source: str
    strength: float
    violation: bool


class ConflictsOut(BaseModel):
    conflicts: list[ConflictOut]


class ResolveOut(BaseModel):
    resolved: list[list[str]]
    unresolved: list[list[str]]
    quarantined: list[str]


class RetractIn(BaseModel):
    ccs: str
    t: Optional[Union[int, str]] = None


class RetractOut(BaseModel):
    capped: list[str]


class RankQuery(BaseModel):
    embedding: Optional[list[float]] = None
    tags: list[str] = []


class RankIn(BaseModel):
    app: str = "default"
    query: RankQuery = RankQuery()
    k: int = Field(10, ge=1)
    now: Optional[Union[int, str]] = None


class RankedClaim(BaseModel):
    ccs: str
    score: float


class RankOut(BaseModel):
    app: str
    results: list[RankedClaim]


class VerifyOut(BaseModel):
    ok: bool
    first_broken_seq: Optional[int]
    entries: int


class ProofOut(BaseModel):
    ccs: str
    epoch: int
    leaf: str
    path: list[list[str]]
    root: str
    valid: bool


class EpochOut(BaseModel):
    epoch: int
    leaf_count: int
    merkle_root: str
    committed_at: int
    nonce: str
    commitment: str


class SealIn(BaseModel):
    t: Optional[Union[int, str]] = None


class ZkOut(BaseModel):
    verdict: str
