"""Reference implementations written without importing the package.

Tests compare package output against these, and golden values in the tests
were produced by running them once.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import struct


def lp(payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + payload


def field_bytes(value) -> bytes:
    if value is None:
        return b""
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, bool):
        raise TypeError("bool is not a hashable field")
    if isinstance(value, int):
        return struct.pack(">q", value)
    if isinstance(value, float):
        return struct.pack(">d", value)
    return bytes(value)


def sha(*fields) -> str:
    return hashlib.sha256(b"".join(lp(field_bytes(f)) for f in fields)).hexdigest()


def caid(orcid, name, affiliation) -> str:
    return sha(orcid or "", name, affiliation)


def ccs(form, author_caid, asserted_at) -> str:
    return sha(form, author_caid, asserted_at)


def update(pi: float, w: float) -> float:
    """Weighted update evaluated through odds rather than the direct ratio."""
    if pi == 0.0 or w == 0.0:
        return 0.0
    if pi == 1.0 or w == 1.0:
        return 1.0
    odds = (pi / (1 - pi)) * (w / (1 - w))
    return odds / (1 + odds)


def posterior_product(pi0: float, weights) -> float:
    """Closed product form: prior times all weights over the same plus the complement product."""
    num = pi0 * math.prod(weights)
    den = num + (1 - pi0) * math.prod(1 - w for w in weights)
    return num / den


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def noisy_or(parents) -> float:
    """parents: iterable of (weight, belief)."""
    return 1.0 - math.prod(1.0 - w * p for w, p in parents)


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def merkle_root(leaves: list[bytes]) -> bytes:
    level = list(leaves)
    if len(level) == 1:
        return level[0]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hashlib.sha256(level[i] + level[i + 1]).digest() for i in range(0, len(level), 2)]
    return level[0]


def min_quarantine(nodes: dict[str, float], conflicts: list[tuple[str, str]]) -> float:
    """Smallest total belief of a node set touching every conflict, by exhaustive search."""
    names = sorted(nodes)
    best = math.inf
    for r in range(len(names) + 1):
        for subset in itertools.combinations(names, r):
            s = set(subset)
            if all(a in s or b in s for a, b in conflicts):
                best = min(best, sum(nodes[n] for n in subset))
    return best


def min_cut(nodes: list[str], weights: dict[tuple[str, str], float]) -> float:
    """Minimum weight over all bipartitions by enumeration."""
    best = math.inf
    first, rest = nodes[0], nodes[1:]
    for r in range(len(rest)):
        for subset in itertools.combinations(rest, r):
            side = {first, *subset}
            w = sum(v for (a, b), v in weights.items() if (a in side) != (b in side))
            best = min(best, w)
    return best
