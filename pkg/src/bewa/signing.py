"""Ed25519 signing over 32-byte hashes."""

from __future__ import annotations

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import BewaError
from .hashing import digest

SIG_ALG = "ed25519"


class UnknownKey(BewaError):
    pass


def generate_key() -> Ed25519PrivateKey:
    return Ed25519PrivateKey.generate()


def key_from_seed(seed: bytes | str) -> Ed25519PrivateKey:
    """Deterministic key derivation, for simulations and tests."""
    if isinstance(seed, str):
        seed = seed.encode("utf-8")
    return Ed25519PrivateKey.from_private_bytes(digest(seed))


def private_bytes(key: Ed25519PrivateKey) -> bytes:
    return key.private_bytes(
        serialization.Encoding.Raw,
        serialization.PrivateFormat.Raw,
        serialization.NoEncryption(),
    )


def private_from_bytes(raw: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(raw)


def public_bytes(key: Ed25519PrivateKey | Ed25519PublicKey) -> bytes:
    if isinstance(key, Ed25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def public_hex(key: Ed25519PrivateKey | Ed25519PublicKey) -> str:
    return public_bytes(key).hex()


def sign_claim(claim_hash: bytes, key: Ed25519PrivateKey | None) -> bytes:
    if key is None:
        raise UnknownKey("no private key supplied")
    return key.sign(claim_hash)


def verify_signature(claim_hash: bytes, signature: bytes, public_key: bytes | str) -> bool:
    if isinstance(public_key, str):
        try:
            public_key = bytes.fromhex(public_key)
        except ValueError:
            return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, claim_hash)
    except (InvalidSignature, ValueError):
        return False
    return True
