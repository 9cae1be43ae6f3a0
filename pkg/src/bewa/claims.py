"""Claim store: canonical identifiers, metadata admission, version chains.

Author and claim identifiers are SHA-256 digests over length-prefixed fields
(see :mod:`bewa.hashing`), so they can be recomputed from stored fields at any
time.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .errors import BewaError, UnknownClaim
from .hashing import hash_hex
from .signing import verify_signature
from .timeutil import format_time, parse_time

log = logging.getLogger(__name__)

METHODS = frozenset({"RCT", "observational", "meta-analysis", "theoretical", "simulation", "other"})
STAT_FRAMES = frozenset({"frequentist", "bayesian", "nonparametric", "none"})
REPLICATION_STATUSES = frozenset({"untested", "replicated", "failed", "mixed"})
EPISTEMIC_STATUSES = frozenset({"verifiable", "refutable", "undecidable"})
RELATIONS = frozenset({"refines", "corrects", "restates"})


class ClaimStoreError(BewaError):
    pass


class EmptyName(ClaimStoreError):
    pass


class EmptyClaim(ClaimStoreError):
    pass


class NonMonotoneTimestamp(ClaimStoreError):
    pass


class BrokenParentLink(ClaimStoreError):
    pass


class VersionGap(ClaimStoreError):
    pass


class RestatementMismatch(ClaimStoreError):
    pass


class InvertedInterval(ClaimStoreError):
    pass


class MalformedCorpus(ClaimStoreError):
    pass


@dataclass(frozen=True)
class AuthorIdentity:
    caid: str
    orcid: str | None
    disambiguated_name: str
    affiliation: str


@dataclass(frozen=True)
class ContextTag:
    concept: str
    method: str = "other"
    statistical_frame: str = "none"

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.statistical_frame not in STAT_FRAMES:
            raise ValueError(f"unknown statistical frame {self.statistical_frame!r}")


@dataclass(frozen=True)
class ClaimRecord:
    ccs: str
    normalized_form: str
    author: str
    asserted_at: int
    context: ContextTag
    domain_set: frozenset[str] = frozenset()
    version: int = 1
    parent_ccs: str | None = None
    epistemic_status: str = "verifiable"

    def __post_init__(self) -> None:
        if self.version < 1:
            raise VersionGap("version must be >= 1")
        if (self.parent_ccs is not None) != (self.version > 1):
            raise BrokenParentLink("parent_ccs is required exactly when version > 1")

    def equivalent_to(self, other: ClaimRecord) -> bool:
        """Epistemic equivalence: same normalized form under the same context."""
        return self.normalized_form == other.normalized_form and self.context == other.context


@dataclass(frozen=True)
class VenueInfo:
    name: str
    R: float = 0.0
    T: float = 0.0
    C: float = 0.0

    def __post_init__(self) -> None:
        for v in (self.R, self.T, self.C):
            if not 0.0 <= v <= 1.0:
                raise ValueError("venue indices must lie in [0, 1]")


@dataclass(frozen=True)
class SourceFlags:
    verifiable: bool = False
    indexed: bool = False
    peer_reviewed: bool = False

    @property
    def authoritative(self) -> bool:
        return self.verifiable and self.indexed and self.peer_reviewed


@dataclass(frozen=True)
class MetadataRecord:
    caid: str
    ccs: str
    doi: str
    published_at: int | None
    venue: VenueInfo | None
    funding: str | None = None
    replication_status: str = "untested"
    source_flags: SourceFlags = SourceFlags()
    content_hash: str = ""
    signature: bytes | None = None
    signer_key: str | None = None

    @property
    def missing_fields(self) -> list[str]:
        missing = [name for name in ("caid", "ccs", "doi") if not getattr(self, name)]
        if self.published_at is None:
            missing.append("published_at")
        if self.venue is None or not self.venue.name:
            missing.append("venue")
        return missing

    @property
    def schema_complete(self) -> bool:
        return not self.missing_fields


@dataclass(frozen=True)
class AdmissibilityReport:
    complete: bool
    signature_ok: bool | None
    reasons: tuple[str, ...] = ()

    @property
    def admissible(self) -> bool:
        return self.complete and self.signature_ok is not False


@dataclass(frozen=True)
class VersionEntry:
    version: int
    record: ClaimRecord
    recorded_at: int


@dataclass(frozen=True)
class VersionChain:
    ccs_root: str
    entries: tuple[VersionEntry, ...]

    @classmethod
    def start(cls, record: ClaimRecord) -> VersionChain:
        return cls(record.ccs, (VersionEntry(record.version, record, record.asserted_at),))

    @property
    def head(self) -> ClaimRecord:
        return self.entries[-1].record


@dataclass(frozen=True)
class TemporalAnchor:
    ccs: str
    tau_start: int
    tau_end: int | None = None

    def covers(self, t: int) -> bool:
        return self.tau_start <= t and (self.tau_end is None or t <= self.tau_end)


def canonical_author_id(orcid: str | None, name: str, affiliation: str) -> AuthorIdentity:
    name = (name or "").strip()
    if not name:
        raise EmptyName("author name is blank")
    orcid = (orcid or "").strip() or None
    caid = hash_hex(orcid or "", name, affiliation or "")
    return AuthorIdentity(caid, orcid, name, affiliation or "")


def canonical_claim_signature(normalized_form: str, author: str, asserted_at: int) -> str:
    if not normalized_form or not normalized_form.strip():
        raise EmptyClaim("normalized form is blank")
    return hash_hex(normalized_form, author, int(asserted_at))


def metadata_content_hash(
    caid: str, ccs: str, doi: str, published_at: int | None, venue_name: str
) -> str:
    """Hash that a metadata signature must cover."""
    return hash_hex(caid, ccs, doi, published_at if published_at is not None else None, venue_name)


def validate_metadata(
    record: MetadataRecord, trusted_keys: Iterable[str] | None = None
) -> AdmissibilityReport:
    reasons = [f"MissingField({name})" for name in record.missing_fields]
    signature_ok: bool | None = None
    if record.signature is not None:
        trusted = set(trusted_keys or ())
        if record.signer_key is None or record.signer_key not in trusted:
            signature_ok = False
            reasons.append("UntrustedKey")
        else:
            expected = metadata_content_hash(
                record.caid,
                record.ccs,
                record.doi,
                record.published_at,
                record.venue.name if record.venue else "",
            )
            signature_ok = expected == record.content_hash and verify_signature(
                bytes.fromhex(record.content_hash), record.signature, record.signer_key
            )
            if not signature_ok:
                reasons.append("BadSignature")
    report = AdmissibilityReport(not record.missing_fields, signature_ok, tuple(reasons))
    if not report.admissible:
        log.info("metadata for %s rejected: %s", record.ccs or "<no ccs>", ", ".join(reasons))
    return report


def append_version(
    chain: VersionChain,
    next_record: ClaimRecord,
    relation: str = "refines",
    recorded_at: int | None = None,
) -> VersionChain:
    last = chain.head
    if relation not in RELATIONS:
        raise ValueError(f"unknown version relation {relation!r}")
    if next_record.version != last.version + 1:
        raise VersionGap(f"expected version {last.version + 1}, got {next_record.version}")
    if next_record.asserted_at <= last.asserted_at:
        raise NonMonotoneTimestamp(
            f"version {next_record.version} asserted at {next_record.asserted_at}, "
            f"not after {last.asserted_at}"
        )
    if next_record.parent_ccs != last.ccs:
        raise BrokenParentLink(f"parent {next_record.parent_ccs} does not match head {last.ccs}")
    if relation == "restates" and next_record.normalized_form != last.normalized_form:
        raise RestatementMismatch("a restatement must keep the normalized form byte-equal")
    at = next_record.asserted_at if recorded_at is None else recorded_at
    if at <= chain.entries[-1].recorded_at:
        raise NonMonotoneTimestamp("recorded_at must strictly increase")
    return replace(chain, entries=chain.entries + (VersionEntry(next_record.version, next_record, at),))


def anchor_interval(claim: str, start: int, end: int | None = None) -> TemporalAnchor:
    if end is not None and end < start:
        raise InvertedInterval(f"interval end {end} precedes start {start}")
    return TemporalAnchor(claim, int(start), None if end is None else int(end))


# -- corpus ingestion -------------------------------------------------------


@dataclass
class ParsedEntry:
    index: int
    raw: dict[str, Any]
    author: AuthorIdentity
    record: ClaimRecord
    metadata: MetadataRecord


@dataclass
class IngestResult:
    accepted: list[ClaimRecord] = field(default_factory=list)
    rejected: list[dict[str, Any]] = field(default_factory=list)
    entries: list[ParsedEntry] = field(default_factory=list)


def _parse_entry(index: int, raw: Mapping[str, Any]) -> ParsedEntry:
    a = raw["author"]
    author = canonical_author_id(a.get("orcid"), a.get("name", ""), a.get("affiliation", ""))
    asserted_at = parse_time(raw["asserted_at"])
    ctx = raw.get("context") or {}
    context = ContextTag(
        concept=ctx.get("concept", ""),
        method=ctx.get("method", "other"),
        statistical_frame=ctx.get("statistical_frame", "none"),
    )
    ccs = canonical_claim_signature(raw["normalized_form"], author.caid, asserted_at)
    status = raw.get("epistemic_status", "verifiable")
    if status not in EPISTEMIC_STATUSES:
        raise ValueError(f"unknown epistemic status {status!r}")
    record = ClaimRecord(
        ccs=ccs,
        normalized_form=raw["normalized_form"],
        author=author.caid,
        asserted_at=asserted_at,
        context=context,
        domain_set=frozenset(raw.get("domains") or ([context.concept] if context.concept else [])),
        epistemic_status=status,
    )
    m = raw.get("metadata") or {}
    v = m.get("venue")
    venue = VenueInfo(v.get("name", ""), v.get("R", 0.0), v.get("T", 0.0), v.get("C", 0.0)) if v else None
    published_at = parse_time(m["published_at"]) if m.get("published_at") not in (None, "") else None
    flags = m.get("source_flags") or {}
    repl = m.get("replication_status", "untested")
    if repl not in REPLICATION_STATUSES:
        raise ValueError(f"unknown replication status {repl!r}")
    doi = m.get("doi") or ""
    metadata = MetadataRecord(
        caid=author.caid,
        ccs=ccs,
        doi=doi,
        published_at=published_at,
        venue=venue,
        funding=m.get("funding"),
        replication_status=repl,
        source_flags=SourceFlags(
            bool(flags.get("verifiable")), bool(flags.get("indexed")), bool(flags.get("peer_reviewed"))
        ),
        content_hash=metadata_content_hash(author.caid, ccs, doi, published_at, venue.name if venue else ""),
        signature=bytes.fromhex(raw["signature"]) if raw.get("signature") else None,
        signer_key=raw.get("signer_key"),
    )
    return ParsedEntry(index, dict(raw), author, record, metadata)


def load_corpus(path: str | Path) -> list[dict[str, Any]]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedCorpus(f"cannot read corpus {path}: {exc}") from exc
    if not isinstance(data, list) or not all(isinstance(e, dict) for e in data):
        raise MalformedCorpus("corpus must be a JSON array of objects")
    return data


AdmissionGate = Callable[[ClaimRecord, MetadataRecord], "str | None"]


class ClaimStore:
    """Holds accepted claims.  Mutations go through a single writer lock."""

    def __init__(self) -> None:
        self.authors: dict[str, AuthorIdentity] = {}
        self.claims: dict[str, ClaimRecord] = {}
        self.metadata: dict[str, MetadataRecord] = {}
        self.chains: dict[str, VersionChain] = {}
        self.chain_root: dict[str, str] = {}
        self.anchors: dict[str, TemporalAnchor] = {}
        self._lock = threading.RLock()

    def __contains__(self, ccs: object) -> bool:
        return ccs in self.claims

    def get(self, ccs: str) -> ClaimRecord:
        try:
            return self.claims[ccs]
        except KeyError:
            raise UnknownClaim(ccs) from None

    def chain_for(self, ccs: str) -> VersionChain:
        self.get(ccs)
        return self.chains[self.chain_root[ccs]]

    def add(self, author: AuthorIdentity, record: ClaimRecord, metadata: MetadataRecord | None = None) -> None:
        with self._lock:
            self.authors.setdefault(author.caid, author)
            self.claims[record.ccs] = record
            if metadata is not None:
                self.metadata[record.ccs] = metadata
            self.chains[record.ccs] = VersionChain.start(record)
            self.chain_root[record.ccs] = record.ccs
            self.anchors.setdefault(record.ccs, TemporalAnchor(record.ccs, record.asserted_at))

    def supersede(
        self,
        parent_ccs: str,
        author: AuthorIdentity,
        record: ClaimRecord,
        metadata: MetadataRecord | None = None,
        relation: str = "refines",
    ) -> VersionChain:
        with self._lock:
            root = self.chain_root[self.get(parent_ccs).ccs]
            chain = append_version(self.chains[root], record, relation)
            self.authors.setdefault(author.caid, author)
            self.claims[record.ccs] = record
            if metadata is not None:
                self.metadata[record.ccs] = metadata
            self.chains[root] = chain
            self.chain_root[record.ccs] = root
            old = self.anchors.get(parent_ccs)
            if old is not None and old.tau_end is None:
                self.anchors[parent_ccs] = TemporalAnchor(parent_ccs, old.tau_start, max(old.tau_start, record.asserted_at))
            self.anchors.setdefault(record.ccs, TemporalAnchor(record.ccs, record.asserted_at))
            return chain

    def set_anchor(self, ccs: str, start: int, end: int | None = None) -> TemporalAnchor:
        self.get(ccs)
        anchor = anchor_interval(ccs, start, end)
        with self._lock:
            self.anchors[ccs] = anchor
        return anchor

    def ingest(
        self,
        entries: list[dict[str, Any]],
        trusted_keys: Iterable[str] | None = None,
        gate: AdmissionGate | None = None,
    ) -> IngestResult:
        trusted = set(trusted_keys or ())
        result = IngestResult()
        labels: dict[str, str] = {}
        with self._lock:
            for i, raw in enumerate(entries):
                try:
                    parsed = _parse_entry(i, raw)
                except (KeyError, TypeError, ValueError, ClaimStoreError) as exc:
                    result.rejected.append(_trace(i, raw, [f"Unparseable({type(exc).__name__}: {exc})"]))
                    continue
                report = validate_metadata(parsed.metadata, trusted)
                reasons = list(report.reasons)
                if not parsed.metadata.source_flags.authoritative:
                    reasons.append("SourceNotAuthoritative")
                if not reasons and gate is not None:
                    gate_reason = gate(parsed.record, parsed.metadata)
                    if gate_reason:
                        reasons.append(gate_reason)
                if not reasons and parsed.record.ccs in self.claims:
                    reasons.append("DuplicateClaim")
                parent = raw.get("supersedes")
                if not reasons and parent is not None:
                    parent_ccs = labels.get(parent, parent)
                    if parent_ccs not in self.claims:
                        reasons.append(f"UnknownParent({parent})")
                    else:
                        head = self.chain_for(parent_ccs).head
                        parsed.record = replace(parsed.record, version=head.version + 1, parent_ccs=head.ccs)
                        try:
                            self.supersede(head.ccs, parsed.author, parsed.record, parsed.metadata, raw.get("relation", "refines"))
                        except (ClaimStoreError, ValueError) as exc:
                            reasons.append(type(exc).__name__)
                if reasons:
                    result.rejected.append(_trace(i, raw, reasons))
                    continue
                if parent is None:
                    self.add(parsed.author, parsed.record, parsed.metadata)
                if "id" in raw:
                    labels[str(raw["id"])] = parsed.record.ccs
                result.accepted.append(parsed.record)
                result.entries.append(parsed)
        for trace in result.rejected:
            log.warning("rejected corpus entry %d: %s", trace["index"], "; ".join(trace["reasons"]))
        return result

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "authors": [asdict(a) for a in self.authors.values()],
            "claims": [_record_to_dict(r) for r in self.claims.values()],
            "metadata": [_metadata_to_dict(m) for m in self.metadata.values()],
            "chains": {
                root: [[e.version, e.record.ccs, e.recorded_at] for e in chain.entries]
                for root, chain in self.chains.items()
            },
            "anchors": [asdict(a) for a in self.anchors.values()],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ClaimStore:
        store = cls()
        for a in data.get("authors", []):
            store.authors[a["caid"]] = AuthorIdentity(**a)
        for r in data.get("claims", []):
            rec = _record_from_dict(r)
            store.claims[rec.ccs] = rec
        for m in data.get("metadata", []):
            md = _metadata_from_dict(m)
            store.metadata[md.ccs] = md
        for root, entries in data.get("chains", {}).items():
            chain = VersionChain(
                root, tuple(VersionEntry(v, store.claims[c], at) for v, c, at in entries)
            )
            store.chains[root] = chain
            for e in chain.entries:
                store.chain_root[e.record.ccs] = root
        for a in data.get("anchors", []):
            store.anchors[a["ccs"]] = TemporalAnchor(**a)
        return store


def ingest_corpus(
    path: str | Path,
    trusted_keys: Iterable[str] | None = None,
    store: ClaimStore | None = None,
    gate: AdmissionGate | None = None,
) -> IngestResult:
    entries = load_corpus(path)
    return (store or ClaimStore()).ingest(entries, trusted_keys, gate)


def _trace(index: int, raw: Mapping[str, Any], reasons: list[str]) -> dict[str, Any]:
    return {
        "index": index,
        "id": raw.get("id") if isinstance(raw, Mapping) else None,
        "doi": (raw.get("metadata") or {}).get("doi") if isinstance(raw, Mapping) else None,
        "reasons": reasons,
    }


def _record_to_dict(r: ClaimRecord) -> dict[str, Any]:
    d = asdict(r)
    d["domain_set"] = sorted(r.domain_set)
    return d


def _record_from_dict(d: Mapping[str, Any]) -> ClaimRecord:
    d = dict(d)
    d["context"] = ContextTag(**d["context"])
    d["domain_set"] = frozenset(d.get("domain_set", ()))
    return ClaimRecord(**d)


def _metadata_to_dict(m: MetadataRecord) -> dict[str, Any]:
    d = asdict(m)
    d["signature"] = m.signature.hex() if m.signature else None
    return d


def _metadata_from_dict(d: Mapping[str, Any]) -> MetadataRecord:
    d = dict(d)
    d["venue"] = VenueInfo(**d["venue"]) if d.get("venue") else None
    d["source_flags"] = SourceFlags(**d.get("source_flags", {}))
    d["signature"] = bytes.fromhex(d["signature"]) if d.get("signature") else None
    return MetadataRecord(**d)


def describe(record: ClaimRecord) -> dict[str, Any]:
    out = _record_to_dict(record)
    out["asserted_at_iso"] = format_time(record.asserted_at)
    return out
