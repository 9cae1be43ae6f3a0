"""Canonical byte encoding and hashing.

Every hashed structure in the engine is serialized the same way: each field is
written as a 4-byte big-endian length followed by its bytes.  Strings are
UTF-8, integers (timestamps, sequence numbers) are 8-byte big-endian signed,
floats are 8-byte IEEE-754 big-endian.  Length-prefixing makes the
concatenation unambiguous, so ``("ab", "c")`` and ``("a", "bc")`` never
collide.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Any, Iterable, Union

HASH_ALG = "sha256"
HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)

Field = Union[str, bytes, int, float, None]


def encode_field(value: Field) -> bytes:
    if value is None:
        payload = b""
    elif isinstance(value, bool):
        raise TypeError("bool is not a canonical field type")
    elif isinstance(value, bytes):
        payload = value
    elif isinstance(value, str):
        payload = value.encode("utf-8")
    elif isinstance(value, int):
        payload = struct.pack(">q", value)
    elif isinstance(value, float):
        payload = struct.pack(">d", value)
    else:
        raise TypeError(f"cannot encode {type(value).__name__}")
    return struct.pack(">I", len(payload)) + payload


def encode(*fields: Field) -> bytes:
    return b"".join(encode_field(f) for f in fields)


def decode_fields(data: bytes) -> list[bytes]:
    """Split a length-prefixed byte string back into raw field payloads.

    Raises ValueError if the lengths do not exactly cover ``data``.
    """
    out: list[bytes] = []
    pos = 0
    n = len(data)
    while pos < n:
        if pos + 4 > n:
            raise ValueError("truncated length prefix")
        (size,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + size > n:
            raise ValueError("field overruns buffer")
        out.append(data[pos : pos + size])
        pos += size
    return out


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_fields(*fields: Field) -> bytes:
    return digest(encode(*fields))


def hash_hex(*fields: Field) -> str:
    return hash_fields(*fields).hex()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def hash_json(obj: Any) -> str:
    return digest(canonical_json(obj).encode("utf-8")).hex()


def concat_hash(parts: Iterable[bytes]) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()
