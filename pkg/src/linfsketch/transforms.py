"""Fast structured transforms: Walsh-Hadamard, radix-2 FFT and circulant products.

All kernels act along axis 0, so a matrix argument is transformed column by
column in a single vectorized pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BadParameters, DimensionMismatch, NotPowerOfTwo


def is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def pad_pow2(v: np.ndarray) -> np.ndarray:
    """Zero-pad along axis 0 up to the next power of two (no copy if already one)."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    target = next_pow2(n)
    if target == n:
        return v
    out = np.zeros((target,) + v.shape[1:], dtype=np.float64, order="F")
    out[:n] = v
    return out


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform ``H v``, overwriting ``v``.

    ``H`` is the Sylvester matrix with H_2 = [[1, 1], [1, -1]]. ``v`` must be a
    float array whose leading dimension is a power of two; it is also returned.
    """
    n = v.shape[0]
    if not is_pow2(n):
        raise NotPowerOfTwo(f"length {n} is not a power of two")
    if n == 1:
        return v
    tail = v.shape[1:]
    if not v.flags.c_contiguous and not (v.ndim == 1 and v.flags.f_contiguous):
        # the butterflies below reshape a view; a strided input needs its own buffer
        work = np.ascontiguousarray(v)
        fwht_inplace(work)
        v[...] = work
        return v
    scratch = np.empty((n // 2,) + tail, dtype=v.dtype)
    h = n // 2
    while h >= 1:
        blocks = v.reshape((n // (2 * h), 2, h) + tail)
        top = blocks[:, 0]
        bottom = blocks[:, 1]
        diff = scratch.reshape(top.shape)
        np.subtract(top, bottom, out=diff)
        top += bottom
        bottom[...] = diff
        h //= 2
    return v


def fwht(v) -> np.ndarray:
    """Out-of-place variant of :func:`fwht_inplace`."""
    return fwht_inplace(np.array(v, dtype=np.float64, order="C", copy=True))


@lru_cache(maxsize=64)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(n // 2) / n)


def fft_radix2(x, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time FFT along axis 0; length must be a power of two.

    The inverse includes the 1/n factor.
    """
    x = np.asarray(x)
    n = x.shape[0]
    if not is_pow2(n):
        raise NotPowerOfTwo(f"FFT length {n} is not a power of two")
    y = x[_bit_reverse(n)].astype(np.complex128)
    tail = y.shape[1:]
    expand = (slice(None),) + (None,) * len(tail)
    table = _twiddles(n)
    if inverse:
        table = table.conj()
    h = 1
    while h < n:
        w = table[:: n // (2 * h)][expand]
        blocks = y.reshape((n // (2 * h), 2, h) + tail)
        even = blocks[:, 0].copy()
        odd = blocks[:, 1] * w
        blocks[:, 0] = even + odd
        blocks[:, 1] = even - odd
        h *= 2
    if inverse:
        y /= n
    return y


@dataclass(frozen=True)
class CirculantGenerator:
    """Circulant matrix given by its first row; each later row is rotated one step right.

    So ``G[i, j] = gen[(j - i) mod n]`` and the first column is
    ``[gen[0], gen[n-1], ..., gen[1]]``. ``spectrum`` caches the FFT of that
    first column (zero-padded to the convolution length when n is not a power of two).
    """

    gen: np.ndarray
    signs_only: bool = True
    spectrum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gen = np.array(self.gen, dtype=np.float64)
        if gen.ndim != 1 or gen.size == 0:
            raise DimensionMismatch("generator must be a non-empty vector")
        if self.signs_only and not np.all(np.abs(gen) == 1.0):
            raise BadParameters("circulant generator entries must be +1 or -1")
        gen.setflags(write=False)
        object.__setattr__(self, "gen", gen)
        column = np.roll(gen[::-1], 1)
        size = self.n if is_pow2(self.n) else next_pow2(2 * self.n - 1)
        padded = np.zeros(size)
        padded[: self.n] = column
        spectrum = fft_radix2(padded)
        spectrum.setflags(write=False)
        object.__setattr__(self, "spectrum", spectrum)

    @property
    def n(self) -> int:
        return self.gen.shape[0]

    @classmethod
    def from_real(cls, gen) -> "CirculantGenerator":
        """Generator with arbitrary real entries; used for testing."""
        return cls(gen, signs_only=False)

    def first_column(self) -> np.ndarray:
        return np.roll(self.gen[::-1], 1)


def circulant_apply(c: CirculantGenerator, v) -> np.ndarray:
    """``G v`` via FFT, for a vector or column-stacked matrix ``v``."""
    v = np.asarray(v, dtype=np.float64)
    n = c.n
    if v.shape[0] != n:
        raise DimensionMismatch(f"vector length {v.shape[0]} != circulant size {n}")
    spec = c.spectrum[(slice(None),) + (None,) * (v.ndim - 1)]
    size = spec.shape[0]
    if size == n:
        return fft_radix2(spec * fft_radix2(v), inverse=True).real
    padded = np.zeros((size,) + v.shape[1:])
    padded[:n] = v
    linear = fft_radix2(spec * fft_radix2(padded), inverse=True).real
    out = linear[:n].copy()
    out[: 2 * n - 1 - n] += linear[n : 2 * n - 1]
    return out


def hadamard_matrix(n: int) -> np.ndarray:
    """Dense Sylvester Hadamard matrix, built by repeated Kronecker products."""
    if not is_pow2(n):
        raise NotPowerOfTwo(f"{n} is not a power of two")
    H = np.ones((1, 1))
    H2 = np.array([[1.0, 1.0], [1.0, -1.0]])
    while H.shape[0] < n:
        H = np.kron(H2, H)
    return H


def circulant_matrix(gen) -> np.ndarray:
    """Dense circulant matrix with first row ``gen``, rows rotating right."""
    gen = np.asarray(gen, dtype=np.float64)
    n = gen.shape[0]
    i = np.arange(n)
    return gen[(i[None, :] - i[:, None]) % n]
