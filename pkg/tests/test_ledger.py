import hashlib
import random
import struct

import pytest

import oracles
from bewa import ledger as L
from bewa.signing import UnknownKey, key_from_seed, public_hex, sign_claim, verify_signature

ALICE = key_from_seed("alice")
BOB = key_from_seed("bob")
SYSTEM = key_from_seed("system")


def fresh() -> L.Ledger:
    reg = L.KeyRegistry()
    reg.register("alice", public_hex(ALICE))
    reg.register("bob", public_hex(BOB))
    reg.register(L.SYSTEM_ACTOR, public_hex(SYSTEM))
    return L.Ledger(reg)


def filled(n: int) -> L.Ledger:
    led = fresh()
    for i in range(n):
        tx = "INSERT" if i == 0 else "UPDATE"
        led.append_tx(tx, "c1", "evidence", 0.5 + i / (4 * n), 1000 + i, "alice", ALICE, {"i": i})
    return led


def record_offsets(data: bytes) -> list[int]:
    """Start of each record body field, walking the framing directly."""
    pos = len(L.MAGIC)
    (size,) = struct.unpack_from(">I", data, pos)
    pos += 4 + size
    out = []
    while pos < len(data):
        (size,) = struct.unpack_from(">I", data, pos)
        out.append(pos + 4)
        pos += 4 + size
    return out


def test_genesis_entry():
    e = filled(1).entries[0]
    assert e.prev_hash == bytes(32)
    assert e.entry_hash == hashlib.sha256(e.body).digest()


def test_chain_link():
    a, b = filled(2).entries
    assert b.prev_hash == a.entry_hash
    assert b.entry_hash == hashlib.sha256(b.body + a.entry_hash).digest()


def test_unauthorized_writer():
    led = filled(1)
    with pytest.raises(L.UnauthorizedWriter):
        led.append_tx("UPDATE", "c1", "evidence", 0.6, 2000, "bob", BOB)
    led.grant("c1", "bob")
    led.append_tx("UPDATE", "c1", "evidence", 0.6, 2000, "bob", BOB)


def test_wrong_or_missing_key():
    led = fresh()
    with pytest.raises(L.SignatureFailure):
        led.append_tx("INSERT", "c1", "insert", 0.5, 1, "alice", BOB)
    with pytest.raises(UnknownKey):
        led.append_tx("INSERT", "c1", "insert", 0.5, 1, "alice", None)
    with pytest.raises(UnknownKey):
        led.append_tx("INSERT", "c1", "insert", 0.5, 1, "mallory", ALICE)
    with pytest.raises(ValueError):
        led.append_tx("DELETE", "c1", "x", None, 1, "alice", ALICE)


def test_verify_untampered_and_empty():
    assert L.verify_chain(filled(100)) == L.VerifyResult(True, None, 100)
    assert L.verify_chain(b"").ok
    assert L.verify_chain(fresh()).ok


def test_tamper_entry_seven():
    data = bytearray(filled(100).to_bytes())
    start = record_offsets(bytes(data))[6]
    # Record = len-prefixed body first; flip a byte inside that body.
    data[start + 4 + 20] ^= 0x01
    result = L.verify_chain(bytes(data))
    assert not result.ok and result.first_broken_seq == 7


def test_single_bit_flips_are_detected_at_or_before_the_entry():
    data = filled(30).to_bytes()
    offsets = record_offsets(data)
    rng = random.Random(0)
    for _ in range(300):
        idx = rng.randrange(len(offsets))
        start = offsets[idx]
        (body_len,) = struct.unpack_from(">I", data, start)
        pos = start + 4 + rng.randrange(body_len)
        flipped = bytearray(data)
        flipped[pos] ^= 1 << rng.randrange(8)
        result = L.verify_chain(bytes(flipped))
        assert not result.ok and result.first_broken_seq <= idx + 1


def test_two_verifiers_agree():
    data = bytearray(filled(20).to_bytes())
    data[record_offsets(bytes(data))[3] + 10] ^= 0xFF
    assert L.verify_chain(bytes(data)) == L.verify_chain(bytes(data))


def test_append_only_prefix():
    led = filled(5)
    before = led.to_bytes()
    led.append_tx("UPDATE", "c1", "evidence", 0.9, 5000, "alice", ALICE)
    assert led.to_bytes().startswith(before)


def test_merkle_single_and_pair():
    h = hashlib.sha256(b"leaf").digest()
    assert L.merkle_root([h]) == h
    h1, h2 = hashlib.sha256(b"leaf-1").digest(), hashlib.sha256(b"leaf-2").digest()
    assert L.merkle_root([h1, h2]) == hashlib.sha256(h1 + h2).digest()
    assert L.merkle_root([h1, h2]).hex() == "436f8729cd6371869e8ddfaee3bd95e7b1c50ab83fd4773f810fac4138b02ac6"
    with pytest.raises(L.EmptyEpoch):
        L.merkle_root([])


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 64, 100, 1024])
def test_merkle_proofs_sound(n):
    leaves = [hashlib.sha256(str(i).encode()).digest() for i in range(n)]
    root = L.merkle_root(leaves)
    assert root == oracles.merkle_root(leaves)
    for i in sorted({0, n // 2, n - 1}):
        proof = L.merkle_proof(leaves, leaves[i])
        assert len(proof.path) == L.proof_depth(n)
        assert L.verify_proof(proof)
        assert L.verify_proof(L.MembershipProof.from_json(proof.to_json()))
    outsider = hashlib.sha256(b"outsider").digest()
    with pytest.raises(L.UnknownLeaf):
        L.merkle_proof(leaves, outsider)
    proof = L.merkle_proof(leaves, leaves[0])
    assert not L.verify_proof(L.MembershipProof(outsider, proof.path, root))


def test_merkle_flipped_sibling_fails():
    leaves = [hashlib.sha256(bytes([i])).digest() for i in range(4)]
    proof = L.merkle_proof(leaves, leaves[1])
    sib, side = proof.path[0]
    bad = L.MembershipProof(proof.leaf, ((bytes([sib[0] ^ 1]) + sib[1:], side),) + proof.path[1:], proof.root)
    assert not L.verify_proof(bad)


def test_sign_and_verify():
    h = hashlib.sha256(b"claim").digest()
    sig = sign_claim(h, ALICE)
    assert verify_signature(h, sig, public_hex(ALICE))
    assert not verify_signature(h, sig, public_hex(BOB))
    assert not verify_signature(hashlib.sha256(b"other").digest(), sig, public_hex(ALICE))


def test_key_rotation_keeps_one_active_key():
    reg = L.KeyRegistry()
    reg.register("a", "k1")
    reg.register("a", "k2")
    assert reg.key_for("a") == "k2" and reg.revoked["a"] == ["k1"]
    reg.revoke("a")
    with pytest.raises(UnknownKey):
        reg.key_for("a")


def test_audit_query_bounds():
    led = filled(5)
    assert led.audit_query("c1", 0, 999) == []
    assert led.audit_query("c1", 0, 10**9) == led.trace("c1")
    assert [e.t for e in led.audit_query("c1", 1002, 1003)] == [1002, 1003]
    with pytest.raises(L.InvertedRange):
        led.audit_query("c1", 5, 1)


def test_seal_and_prove():
    led = filled(5)
    ep = led.seal_epoch(2000, SYSTEM, nonce=b"\x00" * 8)
    assert ep.epoch == 1 and len(ep.leaves) == 5
    assert ep.commitment == hashlib.sha256(ep.merkle_root + b"\x00" * 8).digest()
    assert L.verify_proof(led.prove_claim("c1", 1))
    with pytest.raises(L.EmptyEpoch):
        led.seal_epoch(2001, SYSTEM)
    with pytest.raises(L.EmptyEpoch):
        led.epoch(2)


def test_fork_prevention():
    led = filled(1)
    led.append_tx("INSERT", "c2", "insert", 0.5, 2000, "alice", ALICE)
    led.append_tx("DEPRECATE", "c1", "supersede", None, 2001, "alice", ALICE, {"superseded_by": "c2"})
    with pytest.raises(L.ForkRejected):
        led.append_tx("UPDATE", "c1", "evidence", 0.7, 2002, "alice", ALICE)
    assert led.lineage("c1") == ["c1", "c2"]


def test_system_digest_changes_with_any_trace():
    led = filled(3)
    led.append_tx("INSERT", "c2", "insert", 0.5, 2000, "alice", ALICE)
    before = led.system_digest()
    led.append_tx("UPDATE", "c2", "evidence", 0.6, 2001, "alice", ALICE)
    assert led.system_digest() != before


def test_save_load_round_trip(tmp_path):
    led = filled(10)
    led.seal_epoch(5000, SYSTEM, nonce=b"n")
    led.append_tx("UPDATE", "c1", "evidence", 0.8, 6000, "alice", ALICE)
    path = tmp_path / "ledger.bin"
    led.save(path)
    again = L.Ledger.load(path, led.registry)
    assert again.to_bytes() == led.to_bytes()
    assert again.epochs == led.epochs
    assert again.pending_leaves() == led.pending_leaves()
    bad = bytearray(path.read_bytes())
    bad[record_offsets(bytes(bad))[2] + 12] ^= 1
    with pytest.raises(L.CorruptLedger):
        L.Ledger.from_bytes(bytes(bad))


def test_zk_audit_unsupported():
    assert L.zk_audit("anything") == {"verdict": "zk_unsupported"}
