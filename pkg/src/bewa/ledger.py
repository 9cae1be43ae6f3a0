"""Hash-chained, signed transaction ledger with per-epoch Merkle anchoring.

File layout: the magic bytes ``BEWALDG1``, one length-prefixed JSON header
naming the hash and signature algorithms, then one length-prefixed record
per entry.  A record is itself a length-prefixed tuple of
``(body, prev_hash, entry_hash, signature, signer_key)``.

Chain rule: the first entry's hash is ``H(body)``; every later entry's hash
is ``H(body || prev_hash)``.  Signatures cover ``H(body)``.
"""

from __future__ import annotations

import json
import math
import os
import secrets
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .errors import BewaError
from .hashing import HASH_ALG, ZERO_HASH, canonical_json, concat_hash, decode_fields, digest, encode, encode_field
from .signing import SIG_ALG, UnknownKey, public_hex, sign_claim, verify_signature

__all__ = [
    "LedgerEntry", "Ledger", "KeyRegistry", "EpochRoot", "MembershipProof", "VerifyResult",
    "merkle_root", "merkle_proof", "verify_proof", "verify_chain", "sign_claim", "verify_signature",
    "UnknownKey", "UnauthorizedWriter", "SignatureFailure", "EmptyEpoch", "UnknownLeaf",
    "InvertedRange", "ForkRejected", "zk_audit",
]

MAGIC = b"BEWALDG1"
TX_TYPES = ("INSERT", "UPDATE", "DEPRECATE", "ANCHOR")
SYSTEM_ACTOR = "system"
FORMAT_VERSION = 1


class LedgerError(BewaError):
    pass


class UnauthorizedWriter(LedgerError):
    pass


class SignatureFailure(LedgerError):
    pass


class EmptyEpoch(LedgerError):
    pass


class UnknownLeaf(LedgerError):
    pass


class InvertedRange(LedgerError):
    pass


class ForkRejected(LedgerError):
    pass


class CorruptLedger(LedgerError):
    pass


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    tx_type: str
    ccs: str
    op: str
    pi_after: float | None
    t: int
    actor: str
    detail: str
    signature: bytes
    signer_key: str
    entry_hash: bytes
    prev_hash: bytes

    @property
    def body(self) -> bytes:
        return entry_body(self.seq, self.tx_type, self.ccs, self.op, self.pi_after, self.t, self.actor, self.detail)

    @property
    def details(self) -> dict[str, Any]:
        return json.loads(self.detail) if self.detail else {}

    def to_json(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "tx_type": self.tx_type,
            "ccs": self.ccs,
            "op": self.op,
            "pi_after": self.pi_after,
            "t": self.t,
            "actor": self.actor,
            "detail": self.details,
            "signature": self.signature.hex(),
            "signer_key": self.signer_key,
            "entry_hash": self.entry_hash.hex(),
            "prev_hash": self.prev_hash.hex(),
        }


def entry_body(
    seq: int, tx_type: str, ccs: str, op: str, pi_after: float | None, t: int, actor: str, detail: str
) -> bytes:
    return encode(seq, tx_type, ccs, op, None if pi_after is None else float(pi_after), t, actor, detail)


def chain_hash(body: bytes, prev: bytes) -> bytes:
    return digest(body) if prev == ZERO_HASH else digest(body + prev)


def _parse_body(body: bytes) -> tuple[int, str, str, str, float | None, int, str, str]:
    f = decode_fields(body)
    if len(f) != 8 or len(f[0]) != 8 or len(f[5]) != 8 or len(f[4]) not in (0, 8):
        raise ValueError("malformed entry body")
    (seq,) = struct.unpack(">q", f[0])
    (t,) = struct.unpack(">q", f[5])
    pi = struct.unpack(">d", f[4])[0] if f[4] else None
    return seq, f[1].decode(), f[2].decode(), f[3].decode(), pi, t, f[6].decode(), f[7].decode()


# -- Merkle trees ------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipProof:
    leaf: bytes
    path: tuple[tuple[bytes, str], ...]
    root: bytes

    def to_json(self) -> dict[str, Any]:
        return {
            "leaf": self.leaf.hex(),
            "path": [[s.hex(), side] for s, side in self.path],
            "root": self.root.hex(),
        }

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> MembershipProof:
        return cls(bytes.fromhex(d["leaf"]), tuple((bytes.fromhex(s), side) for s, side in d["path"]), bytes.fromhex(d["root"]))


@dataclass(frozen=True)
class EpochRoot:
    epoch: int
    leaves: tuple[bytes, ...]
    merkle_root: bytes
    committed_at: int
    nonce: bytes
    commitment: bytes

    def to_json(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "leaf_count": len(self.leaves),
            "merkle_root": self.merkle_root.hex(),
            "committed_at": self.committed_at,
            "nonce": self.nonce.hex(),
            "commitment": self.commitment.hex(),
        }


def _levels(leaves: Sequence[bytes]) -> list[list[bytes]]:
    if not leaves:
        raise EmptyEpoch("cannot build a Merkle tree over no leaves")
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        cur = levels[-1]
        if len(cur) % 2:
            cur = cur + [cur[-1]]
        levels.append([concat_hash((cur[i], cur[i + 1])) for i in range(0, len(cur), 2)])
    return levels


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Binary tree root; an odd node at any level is paired with itself."""
    return _levels(leaves)[-1][0]


def merkle_proof(leaves: Sequence[bytes], leaf: bytes) -> MembershipProof:
    try:
        index = list(leaves).index(leaf)
    except ValueError:
        raise UnknownLeaf(leaf.hex()) from None
    levels = _levels(leaves)
    path = []
    for level in levels[:-1]:
        sibling = index ^ 1
        path.append((level[sibling] if sibling < len(level) else level[index], "L" if index % 2 else "R"))
        index //= 2
    return MembershipProof(leaf, tuple(path), levels[-1][0])


def verify_proof(proof: MembershipProof, root: bytes | None = None) -> bool:
    node = proof.leaf
    for sibling, side in proof.path:
        if side == "L":
            node = concat_hash((sibling, node))
        elif side == "R":
            node = concat_hash((node, sibling))
        else:
            return False
    return node == (proof.root if root is None else root) and node == proof.root


def anchor_commitment(root: bytes, nonce: bytes) -> bytes:
    return digest(root + nonce)


# -- keys --------------------------------------------------------------------------


@dataclass
class KeyRegistry:
    """One active public key per author; older keys are kept as revoked."""

    active: dict[str, str] = field(default_factory=dict)
    revoked: dict[str, list[str]] = field(default_factory=dict)

    def register(self, caid: str, public_key: str) -> None:
        old = self.active.get(caid)
        if old is not None and old != public_key:
            self.revoked.setdefault(caid, []).append(old)
        self.active[caid] = public_key

    def revoke(self, caid: str) -> None:
        old = self.active.pop(caid, None)
        if old is not None:
            self.revoked.setdefault(caid, []).append(old)

    def key_for(self, caid: str) -> str:
        try:
            return self.active[caid]
        except KeyError:
            raise UnknownKey(f"no active key for {caid}") from None

    def is_trusted(self, public_key: str) -> bool:
        return public_key in self.active.values()

    def to_dict(self) -> dict[str, Any]:
        return {"active": dict(self.active), "revoked": {k: list(v) for k, v in self.revoked.items()}}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> KeyRegistry:
        return cls(dict(d.get("active", {})), {k: list(v) for k, v in d.get("revoked", {}).items()})


# -- verification -------------------------------------------------------------------


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_broken_seq: int | None = None
    entries: int = 0

    def to_json(self) -> dict[str, Any]:
        return {"ok": self.ok, "first_broken_seq": self.first_broken_seq, "entries": self.entries}


def _read_header(data: bytes) -> tuple[dict[str, Any], int]:
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + 4:
        raise CorruptLedger("bad magic")
    pos = len(MAGIC)
    (size,) = struct.unpack_from(">I", data, pos)
    pos += 4
    header = json.loads(data[pos : pos + size].decode("utf-8"))
    if header.get("hash_alg") != HASH_ALG or header.get("sig_alg") != SIG_ALG:
        raise CorruptLedger(f"unsupported algorithms {header}")
    return header, pos + size


def _iter_records(data: bytes, pos: int) -> Iterable[bytes | None]:
    """Yield raw records; yields None once if the framing is broken."""
    n = len(data)
    while pos < n:
        if pos + 4 > n:
            yield None
            return
        (size,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + size > n:
            yield None
            return
        yield data[pos : pos + size]
        pos += size


def _record_to_entry(raw: bytes) -> LedgerEntry:
    parts = decode_fields(raw)
    if len(parts) != 5:
        raise ValueError("record must have five parts")
    body, prev, entry_hash, signature, signer = parts
    seq, tx, ccs, op, pi, t, actor, detail = _parse_body(body)
    return LedgerEntry(seq, tx, ccs, op, pi, t, actor, detail, signature, signer.decode(), entry_hash, prev)


def verify_chain(data: bytes | str | Path | Ledger) -> VerifyResult:
    """Recompute every link and signature; report the first broken position.

    Position 0 denotes a damaged header.  Any record that cannot be parsed
    counts as broken at its position.
    """
    if isinstance(data, Ledger):
        data = data.to_bytes()
    elif isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    if not data:
        return VerifyResult(True, None, 0)
    try:
        _, pos = _read_header(data)
    except (CorruptLedger, ValueError, UnicodeDecodeError, struct.error):
        return VerifyResult(False, 0, 0)
    prev = ZERO_HASH
    count = 0
    for position, raw in enumerate(_iter_records(data, pos), start=1):
        count = position
        if raw is None:
            return VerifyResult(False, position, position - 1)
        try:
            e = _record_to_entry(raw)
        except (ValueError, UnicodeDecodeError, struct.error):
            return VerifyResult(False, position, position - 1)
        if (
            e.seq != position
            or e.tx_type not in TX_TYPES
            or e.prev_hash != prev
            or e.entry_hash != chain_hash(raw_body(raw), prev)
            or not verify_signature(digest(raw_body(raw)), e.signature, e.signer_key)
        ):
            return VerifyResult(False, position, position - 1)
        prev = e.entry_hash
    return VerifyResult(True, None, count)


def raw_body(raw: bytes) -> bytes:
    return decode_fields(raw)[0]


def zk_audit(*_: Any) -> dict[str, str]:
    """Zero-knowledge audits are not implemented; callers get a fixed verdict."""
    return {"verdict": "zk_unsupported"}


# -- the ledger ----------------------------------------------------------------------


class Ledger:
    """Append-only ledger.  A single writer appends; readers see immutable entries."""

    def __init__(self, registry: KeyRegistry | None = None) -> None:
        self.entries: list[LedgerEntry] = []
        self.registry = registry or KeyRegistry()
        self.spaces: dict[str, set[str]] = {}
        self.superseded: dict[str, str] = {}
        self.epochs: list[EpochRoot] = []
        self._sealed_upto = 0
        self._lock = threading.Lock()

    @property
    def head(self) -> bytes:
        return self.entries[-1].entry_hash if self.entries else ZERO_HASH

    def grant(self, ccs: str, caid: str) -> None:
        """Add ``caid`` to the set of writers for ``ccs``."""
        self.spaces.setdefault(ccs, set()).add(caid)

    def _authorize(self, tx_type: str, ccs: str, actor: str, key: Ed25519PrivateKey | None) -> str:
        if key is None:
            raise UnknownKey("no signing key supplied")
        expected = self.registry.key_for(actor)
        pub = public_hex(key)
        if pub != expected:
            raise SignatureFailure(f"key {pub[:12]} is not the active key of {actor}")
        if tx_type != "ANCHOR" and actor != SYSTEM_ACTOR:
            space = self.spaces.get(ccs)
            if space is not None and actor not in space:
                raise UnauthorizedWriter(f"{actor} may not write to {ccs}")
        if tx_type != "ANCHOR" and ccs in self.superseded and tx_type != "DEPRECATE":
            raise ForkRejected(f"{ccs} was superseded by {self.superseded[ccs]}")
        return pub

    def append_tx(
        self,
        tx_type: str,
        ccs: str,
        op: str,
        pi_after: float | None,
        t: int,
        actor: str,
        key: Ed25519PrivateKey | None,
        detail: Mapping[str, Any] | None = None,
    ) -> LedgerEntry:
        if tx_type not in TX_TYPES:
            raise ValueError(f"unknown transaction type {tx_type!r}")
        with self._lock:
            pub = self._authorize(tx_type, ccs, actor, key)
            seq = len(self.entries) + 1
            detail_text = canonical_json(dict(detail)) if detail else ""
            body = entry_body(seq, tx_type, ccs, op, pi_after, int(t), actor, detail_text)
            signature = sign_claim(digest(body), key)
            if not verify_signature(digest(body), signature, pub):
                raise SignatureFailure("fresh signature does not verify")
            prev = self.head
            entry = LedgerEntry(
                seq, tx_type, ccs, op, None if pi_after is None else float(pi_after), int(t), actor,
                detail_text, signature, pub, chain_hash(body, prev), prev,
            )
            self.entries.append(entry)
            if tx_type == "INSERT" and ccs not in self.spaces:
                self.spaces[ccs] = {actor}
            if tx_type == "DEPRECATE" and detail and detail.get("superseded_by"):
                self.superseded[ccs] = str(detail["superseded_by"])
            return entry

    # -- epochs ---------------------------------------------------------------------

    def pending_leaves(self) -> list[bytes]:
        return [e.entry_hash for e in self.entries[self._sealed_upto :] if e.tx_type != "ANCHOR"]

    def seal_epoch(self, t: int, key: Ed25519PrivateKey, actor: str = SYSTEM_ACTOR, nonce: bytes | None = None) -> EpochRoot:
        leaves = self.pending_leaves()
        if not leaves:
            raise EmptyEpoch("no entries since the last seal")
        nonce = secrets.token_bytes(16) if nonce is None else nonce
        root = merkle_root(leaves)
        epoch = EpochRoot(len(self.epochs) + 1, tuple(leaves), root, int(t), nonce, anchor_commitment(root, nonce))
        self.append_tx(
            "ANCHOR", "", "seal", None, t, actor, key,
            {"epoch": epoch.epoch, "merkle_root": root.hex(), "nonce": nonce.hex(),
             "commitment": epoch.commitment.hex(), "leaf_count": len(leaves)},
        )
        self.epochs.append(epoch)
        self._sealed_upto = len(self.entries)
        return epoch

    def epoch(self, number: int) -> EpochRoot:
        if not 1 <= number <= len(self.epochs):
            raise EmptyEpoch(f"no sealed epoch {number}")
        return self.epochs[number - 1]

    def prove(self, leaf: bytes, epoch: int) -> MembershipProof:
        return merkle_proof(self.epoch(epoch).leaves, leaf)

    def prove_claim(self, ccs: str, epoch: int) -> MembershipProof:
        """Proof for the latest entry of ``ccs`` sealed in ``epoch``."""
        ep = self.epoch(epoch)
        members = set(ep.leaves)
        for e in reversed(self.entries):
            if e.ccs == ccs and e.entry_hash in members:
                return merkle_proof(ep.leaves, e.entry_hash)
        raise UnknownLeaf(f"{ccs} has no entry in epoch {epoch}")

    # -- queries -------------------------------------------------------------------

    def trace(self, ccs: str) -> list[LedgerEntry]:
        return [e for e in self.entries if e.ccs == ccs]

    def audit_query(self, ccs: str, t_a: int, t_b: int) -> list[LedgerEntry]:
        if t_a > t_b:
            raise InvertedRange(f"{t_a} > {t_b}")
        return [e for e in self.entries if e.ccs == ccs and t_a <= e.t <= t_b]

    def lineage(self, ccs: str) -> list[str]:
        """Follow supersession links from ``ccs`` to the active version."""
        chain = [ccs]
        while chain[-1] in self.superseded and len(chain) <= len(self.superseded) + 1:
            chain.append(self.superseded[chain[-1]])
        return chain

    def system_digest(self) -> bytes:
        """Merkle root over each claim's latest trace hash, ordered by ccs."""
        heads: dict[str, bytes] = {}
        for e in self.entries:
            if e.tx_type != "ANCHOR":
                heads[e.ccs] = e.entry_hash
        if not heads:
            return ZERO_HASH
        return merkle_root([heads[c] for c in sorted(heads)])

    def anchor_for(self, ccs: str, t: int) -> LedgerEntry | None:
        """Latest entry for ``ccs`` at or before ``t``."""
        found = None
        for e in self.entries:
            if e.ccs == ccs and e.t <= t:
                found = e
        return found

    # -- persistence -------------------------------------------------------------

    def header(self) -> dict[str, Any]:
        return {"hash_alg": HASH_ALG, "sig_alg": SIG_ALG, "version": FORMAT_VERSION}

    def to_bytes(self) -> bytes:
        out = [MAGIC, encode_field(canonical_json(self.header()))]
        for e in self.entries:
            record = encode(e.body, e.prev_hash, e.entry_hash, e.signature, e.signer_key)
            out.append(encode_field(record))
        return b"".join(out)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        os.replace(tmp, path)

    @classmethod
    def from_bytes(cls, data: bytes, registry: KeyRegistry | None = None) -> Ledger:
        result = verify_chain(data)
        if not result.ok:
            raise CorruptLedger(f"ledger broken at position {result.first_broken_seq}")
        ledger = cls(registry)
        _, pos = _read_header(data)
        for raw in _iter_records(data, pos):
            assert raw is not None
            e = _record_to_entry(raw)
            ledger.entries.append(e)
            if e.tx_type == "INSERT" and e.ccs not in ledger.spaces:
                ledger.spaces[e.ccs] = {e.actor}
            d = e.details
            if e.tx_type == "DEPRECATE" and d.get("superseded_by"):
                ledger.superseded[e.ccs] = d["superseded_by"]
            if e.tx_type == "ANCHOR":
                leaves = tuple(
                    x.entry_hash for x in ledger.entries[ledger._sealed_upto : -1] if x.tx_type != "ANCHOR"
                )
                nonce = bytes.fromhex(d["nonce"])
                root = bytes.fromhex(d["merkle_root"])
                ledger.epochs.append(EpochRoot(d["epoch"], leaves, root, e.t, nonce, anchor_commitment(root, nonce)))
                ledger._sealed_upto = len(ledger.entries)
        return ledger

    @classmethod
    def load(cls, path: str | Path, registry: KeyRegistry | None = None) -> Ledger:
        return cls.from_bytes(Path(path).read_bytes(), registry)


def proof_depth(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0
