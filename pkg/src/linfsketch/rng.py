"""Reproducible randomness for sketch construction and Monte-Carlo trials.

Every random object is drawn from a Philox stream keyed by
``(master_seed, stream_id)``. Philox is counter based, so two streams never
share state and the order in which streams are created does not matter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParameters

U64 = 2**64
MERSENNE_61 = (1 << 61) - 1
_P = np.uint64(MERSENNE_61)
_LOW31 = np.uint64((1 << 31) - 1)
_LOW30 = np.uint64((1 << 30) - 1)


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise BadParameters(f"stream tags must be non-negative, got {tag}")
        return int(tag)
    return int.from_bytes(str(tag).encode("utf-8"), "little")


@dataclass(frozen=True)
class SeedSpec:
    """Names one independent random stream."""

    master_seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value < U64:
                raise BadParameters(f"{name} must be a 64-bit unsigned integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def child(self, *tags) -> "SeedSpec":
        """Derive a sub-stream; distinct tag tuples give unrelated stream ids."""
        entropy = [self.stream_id, *(_tag_int(t) for t in tags)]
        mixed = np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0]
        return SeedSpec(self.master_seed, int(mixed))

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def rademacher_vector(seed: SeedSpec, n: int) -> np.ndarray:
    """``n`` independent uniform signs as float64 values in {-1, +1}."""
    if n < 1:
        raise BadParameters(f"n must be >= 1, got {n}")
    bits = seed.generator().integers(0, 2, size=n, dtype=np.int8)
    return (2.0 * bits - 1.0).astype(np.float64)


def sample_rows(seed: SeedSpec, m: int, n: int) -> np.ndarray:
    """``m`` indices drawn i.i.d. uniformly from ``range(n)``, with replacement."""
    if m < 1 or n < 1:
        raise BadParameters(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    return seed.generator().integers(0, n, size=m, dtype=np.int64)


def mulmod61(a, b) -> np.ndarray:
    """Elementwise ``a * b mod (2**61 - 1)`` for uint64 inputs already below the prime."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    s31, s30, s61 = np.uint64(31), np.uint64(30), np.uint64(61)
    a_hi, a_lo = a >> s31, a & _LOW31
    b_hi, b_lo = b >> s31, b & _LOW31
    # a*b = hh*2^62 + mid*2^31 + ll, and 2^61 == 1 (mod p)
    hh = a_hi * b_hi
    mid = a_hi * b_lo + a_lo * b_hi
    ll = a_lo * b_lo
    total = (hh << np.uint64(1)) + (mid >> s30) + ((mid & _LOW30) << s31) + ll
    out = (total & _P) + (total >> s61)
    out = np.where(out >= _P, out - _P, out)
    return np.where(out >= _P, out - _P, out)


def _addmod61(a, b):
    s = a + b
    return np.where(s >= _P, s - _P, s)


@dataclass(frozen=True)
class FourWiseHash:
    """Degree-3 polynomial over GF(2**61 - 1); coefficients ordered from constant term up."""

    coefficients: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.coefficients) != 4 or not all(0 <= c < MERSENNE_61 for c in self.coefficients):
            raise BadParameters("need four coefficients in [0, 2**61 - 1)")


def draw_hashes(seed: SeedSpec, count: int) -> np.ndarray:
    """Coefficient table of shape (count, 4) for ``count`` independent hash functions."""
    return seed.generator().integers(0, MERSENNE_61, size=(count, 4), dtype=np.uint64)


def hash_values(coefficients, points) -> np.ndarray:
    """Evaluate each polynomial (rows of ``coefficients``) at every field point.

    Returns an array of shape (count, len(points)).
    """
    C = np.atleast_2d(np.asarray(coefficients, dtype=np.uint64))
    x = np.asarray(points, dtype=np.uint64)[None, :] % _P
    acc = np.broadcast_to(C[:, 3:4], (C.shape[0], x.shape[1]))
    for k in (2, 1, 0):
        acc = _addmod61(mulmod61(acc, x), C[:, k : k + 1])
    return acc


def hash_signs(coefficients, points) -> np.ndarray:
    """Sign table: +1 where the hash value is even, -1 where it is odd."""
    low = hash_values(coefficients, points) & np.uint64(1)
    return 1.0 - 2.0 * low.astype(np.float64)


def fourwise_sign(h: FourWiseHash, j: int) -> int:
    return int(hash_signs([h.coefficients], [j])[0, 0])
