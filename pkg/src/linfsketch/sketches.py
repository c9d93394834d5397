"""Dense sketching matrices and their fast application.

Six families share one interface:

* ``gaussian``: i.i.d. N(0, 1/m) entries, generated row by row from the seed.
* ``ams``: entries h_k(j) / sqrt(m) with h_k drawn from a 4-wise independent sign family.
* ``srht``: (1/sqrt(m)) P H D with H the Walsh-Hadamard matrix.
* ``srct``: (1/sqrt(m)) P G D with G a random-sign circulant matrix.
* ``tensorsrht``: (1/sqrt(m)) P (H D1 (x) H D2), acting on x (x) y.
* ``tensorsrct``: (1/sqrt(m)) P (G1 D1 (x) G2 D2), with independent G1 and G2.

P samples m rows uniformly with replacement. Row and column indices are
0-based; a sampled row k of a tensor sketch refers to the pair
(k // n, k % n) of factor rows, the usual Kronecker ordering.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    BadDimension,
    BadParameters,
    DimensionMismatch,
    TooLarge,
    WrongKind,
)
from .linalg import as_matrix, as_vector
from .rng import SeedSpec, draw_hashes, hash_signs, rademacher_vector, sample_rows
from .transforms import (
    CirculantGenerator,
    circulant_apply,
    circulant_matrix,
    fwht_inplace,
    hadamard_matrix,
    is_pow2,
)

MAX_MATERIALIZE = 2**26
_DENSE_CACHE_LIMIT = 2**22


class SketchKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    AMS = "ams"
    SRHT = "srht"
    SRCT = "srct"
    TENSOR_SRHT = "tensorsrht"
    TENSOR_SRCT = "tensorsrct"

    @property
    def is_tensor(self) -> bool:
        return self in (SketchKind.TENSOR_SRHT, SketchKind.TENSOR_SRCT)

    @property
    def is_fast(self) -> bool:
        """Kinds applied through an FFT-style transform (power-of-two n required)."""
        return self not in (SketchKind.GAUSSIAN, SketchKind.AMS)

    @property
    def is_circulant(self) -> bool:
        return self in (SketchKind.SRCT, SketchKind.TENSOR_SRCT)

    @classmethod
    def parse(cls, name) -> "SketchKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise BadParameters(f"unknown sketch kind {name!r}; choose from {[k.value for k in cls]}")


@dataclass(frozen=True)
class SketchConfig:
    kind: SketchKind
    m: int
    n: int
    seed: SeedSpec = SeedSpec()

    def __post_init__(self):
        object.__setattr__(self, "kind", SketchKind.parse(self.kind))
        if int(self.m) < 1 or int(self.n) < 1:
            raise BadDimension(f"need m >= 1 and n >= 1, got m={self.m}, n={self.n}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        if self.kind.is_fast and not is_pow2(self.n):
            raise BadDimension(f"{self.kind.value} needs n to be a power of two, got {self.n}")

    @property
    def input_dim(self) -> int:
        return self.n * self.n if self.kind.is_tensor else self.n


class Sketch:
    """A realized sketch: the random structure needed for fast application.

    Instances are immutable; the only internal state written after
    construction is a memo of dense Gaussian/AMS tables, which is idempotent.
    """

    def __init__(self, config: SketchConfig):
        self.config = config
        kind, m, n, seed = config.kind, config.m, config.n, config.seed
        self.scale = 1.0 / math.sqrt(m)
        self.sampled_rows = None
        self.sign_diagonals: tuple[np.ndarray, ...] = ()
        self.circulant_gens: tuple[CirculantGenerator, ...] = ()
        self.hash_family = None
        self.gaussian_state = None
        if kind is SketchKind.GAUSSIAN:
            self.gaussian_state = seed.child("gaussian")
        elif kind is SketchKind.AMS:
            self.hash_family = draw_hashes(seed.child("ams"), m)
        else:
            factors = 2 if kind.is_tensor else 1
            self.sampled_rows = sample_rows(seed.child("rows"), m, config.input_dim)
            self.sign_diagonals = tuple(
                rademacher_vector(seed.child("sign", f), n) for f in range(1, factors + 1)
            )
            if kind.is_circulant:
                self.circulant_gens = tuple(
                    CirculantGenerator(rademacher_vector(seed.child("circulant", f), n))
                    for f in range(1, factors + 1)
                )
        for arr in (self.sampled_rows, self.hash_family, *self.sign_diagonals):
            if arr is not None:
                arr.setflags(write=False)
        self._dense = None

    @property
    def kind(self) -> SketchKind:
        return self.config.kind

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def __repr__(self):
        c = self.config
        return f"Sketch({c.kind.value}, m={c.m}, n={c.n}, seed={c.seed})"

    # -- explicit tables for the non-structured kinds --------------------

    def _row_blocks(self, block: int):
        """Yield (start, rows) blocks of the scaled sketch matrix in row order.

        Gaussian rows are read sequentially from one Philox stream, so row k
        always holds the same values no matter how the rows are blocked.
        """
        m, n = self.m, self.n
        points = np.arange(n)
        gen = self.gaussian_state.generator() if self.kind is SketchKind.GAUSSIAN else None
        for start in range(0, m, block):
            stop = min(m, start + block)
            if gen is not None:
                rows = gen.standard_normal((stop - start, n))
            else:
                rows = hash_signs(self.hash_family[start:stop], points)
            yield start, rows * self.scale

    def _table(self):
        if self._dense is None and self.m * self.n <= _DENSE_CACHE_LIMIT:
            (_, table), = self._row_blocks(self.m)
            table.setflags(write=False)
            self._dense = table
        return self._dense

    def _apply_unstructured(self, A: np.ndarray) -> np.ndarray:
        table = self._table()
        if table is not None:
            return table @ A
        out = np.empty((self.m,) + A.shape[1:])
        for start, rows in self._row_blocks(max(1, _DENSE_CACHE_LIMIT // self.n)):
            out[start : start + rows.shape[0]] = rows @ A
        return out

    # -- structured transforms -------------------------------------------

    def _transform(self, X: np.ndarray, factor: int) -> np.ndarray:
        """Apply T_f D_f along axis 0, where T is H or the circulant G_f."""
        D = self.sign_diagonals[factor]
        Y = D.reshape((-1,) + (1,) * (X.ndim - 1)) * X
        if self.kind.is_circulant:
            return circulant_apply(self.circulant_gens[factor], Y)
        return fwht_inplace(np.ascontiguousarray(Y))

    def _decoded_rows(self):
        return np.divmod(self.sampled_rows, self.n)

    def _apply_tensor_dense(self, A: np.ndarray) -> np.ndarray:
        """Apply a tensor sketch to length-n^2 columns (no factorization assumed)."""
        n = self.n
        tail = A.shape[1:]
        V = np.reshape(A, (n, n) + tail)
        V = self._transform(V.reshape((n, -1)), 0).reshape((n, n) + tail)
        V = np.swapaxes(V, 0, 1)
        V = self._transform(np.ascontiguousarray(V).reshape((n, -1)), 1).reshape((n, n) + tail)
        i1, i2 = self._decoded_rows()
        return V[i2, i1] * self.scale

    def _apply(self, A: np.ndarray) -> np.ndarray:
        kind = self.kind
        if not kind.is_fast:
            return self._apply_unstructured(A)
        if kind.is_tensor:
            return self._apply_tensor_dense(A)
        return self._transform(A, 0)[self.sampled_rows] * self.scale

    # -- public surface ---------------------------------------------------

    def apply_vec(self, v) -> np.ndarray:
        v = as_vector(v)
        if v.shape[0] != self.input_dim:
            raise DimensionMismatch(f"vector length {v.shape[0]} != sketch input dim {self.input_dim}")
        return self._apply(v)

    def apply_mat(self, A) -> np.ndarray:
        A = as_matrix(A)
        if A.shape[0] != self.input_dim:
            raise DimensionMismatch(f"matrix has {A.shape[0]} rows, sketch input dim is {self.input_dim}")
        return np.asfortranarray(self._apply(A))

    def apply_tensor(self, x, y) -> np.ndarray:
        """``S (x (x) y)`` in O(n log n + m) without forming the tensor."""
        if not self.kind.is_tensor:
            raise WrongKind(f"apply_tensor needs a tensor sketch, got {self.kind.value}")
        x, y = as_vector(x), as_vector(y)
        if x.shape[0] != self.n or y.shape[0] != self.n:
            raise DimensionMismatch(f"factor lengths {x.shape[0]}, {y.shape[0]} != n = {self.n}")
        u = self._transform(x, 0)
        w = self._transform(y, 1)
        i1, i2 = self._decoded_rows()
        return u[i1] * w[i2] * self.scale

    def apply_kron(self, A1, A2) -> np.ndarray:
        """``S (A1 (x) A2)`` column by column; column j1*d2 + j2 uses A1[:, j1], A2[:, j2]."""
        if not self.kind.is_tensor:
            raise WrongKind(f"apply_kron needs a tensor sketch, got {self.kind.value}")
        A1, A2 = as_matrix(A1), as_matrix(A2)
        if A1.shape[0] != self.n or A2.shape[0] != self.n:
            raise DimensionMismatch(f"factor rows {A1.shape[0]}, {A2.shape[0]} != n = {self.n}")
        i1, i2 = self._decoded_rows()
        U1 = self._transform(A1, 0)[i1]
        U2 = self._transform(A2, 1)[i2]
        out = (U1[:, :, None] * U2[:, None, :]).reshape(self.m, -1) * self.scale
        return np.asfortranarray(out)

    def materialize(self) -> np.ndarray:
        """The explicit m x input_dim matrix, built directly from its definition."""
        m, n, kind = self.m, self.n, self.kind
        if m * self.input_dim > MAX_MATERIALIZE:
            raise TooLarge(f"{m} x {self.input_dim} sketch exceeds {MAX_MATERIALIZE} entries")
        if not kind.is_fast:
            table = self._table()
            if table is None:
                (_, table), = self._row_blocks(m)
            return np.array(table, order="F")
        if kind.is_circulant:
            bases = [circulant_matrix(g.gen) for g in self.circulant_gens]
        else:
            bases = [hadamard_matrix(n)] * len(self.sign_diagonals)
        factors = [B * D[None, :] for B, D in zip(bases, self.sign_diagonals)]
        if kind.is_tensor:
            i1, i2 = self._decoded_rows()
            rows = factors[0][i1][:, :, None] * factors[1][i2][:, None, :]
            dense = rows.reshape(m, n * n)
        else:
            dense = factors[0][self.sampled_rows]
        return np.asfortranarray(dense * self.scale)


def build_sketch(config: SketchConfig) -> Sketch:
    return Sketch(config)


def apply_vec(S: Sketch, v) -> np.ndarray:
    return S.apply_vec(v)


def apply_mat(S: Sketch, A) -> np.ndarray:
    return S.apply_mat(A)


def apply_tensor(S: Sketch, x, y) -> np.ndarray:
    return S.apply_tensor(x, y)


def materialize(S: Sketch) -> np.ndarray:
    return S.materialize()


class Recommendation(NamedTuple):
    m: int
    clamped: bool
    raw: float


def recommend_m(kind, eps: float, delta: float, n: int, d: int, c: float = 1.0) -> Recommendation:
    """Row count suggested by the sketch's guarantee, times a user constant ``c``.

    Natural logs throughout. The result is clamped to the usable range
    [columns + 1, input dimension]; ``clamped`` reports whether that bit.
    ``n`` and ``d`` are per-factor sizes for tensor kinds.
    """
    kind = SketchKind.parse(kind)
    if not (0 < eps <= 1) or not (0 < delta < 0.1) or not c > 0 or n < 1 or d < 1:
        raise BadParameters(f"need 0<eps<=1, 0<delta<0.1, c>0, n,d>=1; got eps={eps}, delta={delta}, c={c}, n={n}, d={d}")
    L = math.log(n / delta)
    base = {
        SketchKind.GAUSSIAN: d * L**3,
        SketchKind.AMS: d * L**3,
        SketchKind.SRHT: d * L**3,
        SketchKind.TENSOR_SRHT: d**2 * L**3,
        SketchKind.SRCT: d**2 * L**2,
        SketchKind.TENSOR_SRCT: d**4 * L**3,
    }[kind]
    raw = c * base / eps**2
    cols = d * d if kind.is_tensor else d
    dim = n * n if kind.is_tensor else n
    lo, hi = cols + 1, dim
    if lo > hi:
        raise BadParameters(f"input dimension {dim} leaves no room for {cols} columns")
    m = math.ceil(raw)
    clamped = not lo <= m <= hi
    return Recommendation(min(max(m, lo), hi), clamped, raw)
