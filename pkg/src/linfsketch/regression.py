"""Exact and sketch-and-solve least squares, plain and two-factor Kronecker."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BadParameters, DimensionMismatch, RankDeficient, TooLarge, WrongKind
from .linalg import as_matrix, as_vector, solve_ls_exact
from .rng import SeedSpec
from .sketches import Sketch, SketchConfig, SketchKind, build_sketch
from .transforms import next_pow2

MAX_KRON_COLS = 4096


@dataclass(frozen=True)
class RegressionProblem:
    """``min ||A x - b||`` either directly or with ``A = A1 (x) A2``, ``b = b1 (x) b2``."""

    mode: str
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    A1: Optional[np.ndarray] = None
    A2: Optional[np.ndarray] = None
    b1: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None

    @classmethod
    def plain(cls, A, b) -> "RegressionProblem":
        A, b = as_matrix(A), as_vector(b)
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        return cls("plain", A=A, b=b)

    @classmethod
    def kronecker(cls, A1, A2, b1, b2) -> "RegressionProblem":
        A1, A2 = as_matrix(A1), as_matrix(A2)
        b1, b2 = as_vector(b1), as_vector(b2)
        if not (A1.shape[0] == A2.shape[0] == b1.shape[0] == b2.shape[0]):
            raise DimensionMismatch("Kronecker factors must share the row count n")
        if A1.shape[1] * A2.shape[1] > MAX_KRON_COLS:
            raise TooLarge(f"d1*d2 = {A1.shape[1] * A2.shape[1]} exceeds {MAX_KRON_COLS}")
        return cls("kronecker", A1=A1, A2=A2, b1=b1, b2=b2)

    @property
    def rows(self) -> int:
        return self.A.shape[0] if self.mode == "plain" else self.A1.shape[0]

    @property
    def cols(self) -> int:
        return self.A.shape[1] if self.mode == "plain" else self.A1.shape[1] * self.A2.shape[1]

    def residual_norm(self, x) -> float:
        """``||A x - b||_2`` of the original system (never forms a Kronecker product)."""
        if self.mode == "plain":
            return float(np.linalg.norm(self.A @ x - self.b))
        X = np.reshape(x, (self.A1.shape[1], self.A2.shape[1]))
        return float(np.linalg.norm(self.A1 @ X @ self.A2.T - np.outer(self.b1, self.b2)))


@dataclass
class SolveStats:
    m: Optional[int] = None
    wall_time: float = 0.0
    clamped: bool = False
    padded_n: Optional[int] = None


@dataclass
class RegressionSolution:
    x: np.ndarray
    residual_norm: float
    sketch_used: Optional[SketchConfig] = None
    solve_stats: SolveStats = field(default_factory=SolveStats)


def padded_size(kind, rows: int) -> int:
    """The sketch ``n`` a system with ``rows`` rows is padded to.

    Gaussian and AMS take any n; SRHT/SRCT round up to a power of two; tensor
    kinds in plain mode need rows <= n**2 with n a power of two.
    """
    kind = SketchKind.parse(kind)
    if not kind.is_fast:
        return rows
    if kind.is_tensor:
        return next_pow2(math.isqrt(rows - 1) + 1) if rows > 1 else 1
    return next_pow2(rows)


def config_for(kind, m: int, rows: int, seed: SeedSpec = SeedSpec()) -> SketchConfig:
    return SketchConfig(SketchKind.parse(kind), m, padded_size(kind, rows), seed)


def _pad_rows(X: np.ndarray, target: int) -> np.ndarray:
    if X.shape[0] == target:
        return X
    out = np.zeros((target,) + X.shape[1:], order="F")
    out[: X.shape[0]] = X
    return out


def _sketched_solve(SA: np.ndarray, Sb: np.ndarray, cfg: SketchConfig) -> np.ndarray:
    try:
        return solve_ls_exact(SA, Sb)
    except RankDeficient as exc:
        raise RankDeficient(
            f"sketched matrix SA ({cfg.kind.value}, m={cfg.m}) is rank deficient: {exc}; "
            "increase m or change the seed"
        ) from exc


def solve_plain_exact(p: RegressionProblem) -> RegressionSolution:
    if p.mode != "plain":
        raise BadParameters("solve_plain_exact needs a plain problem")
    t0 = time.perf_counter()
    x = solve_ls_exact(p.A, p.b)
    stats = SolveStats(wall_time=time.perf_counter() - t0)
    return RegressionSolution(x, p.residual_norm(x), None, stats)


def solve_plain_sketched(p: RegressionProblem, cfg: SketchConfig, clamped: bool = False,
                         sketch: Optional[Sketch] = None) -> RegressionSolution:
    """``x' = argmin ||S A x - S b||``; the residual is reported on the original system.

    Rows of A and b are zero-padded to the sketch's input dimension, which
    changes neither the column span nor the minimizer. Pass ``sketch`` to
    reuse an already realized S built from ``cfg``.
    """
    if p.mode != "plain":
        raise BadParameters("solve_plain_sketched needs a plain problem")
    n, d = p.A.shape
    expected = padded_size(cfg.kind, n)
    if cfg.n != expected:
        raise DimensionMismatch(f"{cfg.kind.value} sketch for {n} rows needs n={expected}, got {cfg.n}")
    if cfg.m < d + 1:
        raise DimensionMismatch(f"sketch rows m={cfg.m} must be at least d+1={d + 1}")
    t0 = time.perf_counter()
    S = sketch if sketch is not None else build_sketch(cfg)
    A = _pad_rows(p.A, cfg.input_dim)
    b = _pad_rows(p.b, cfg.input_dim)
    x = _sketched_solve(S.apply_mat(A), S.apply_vec(b), cfg)
    stats = SolveStats(cfg.m, time.perf_counter() - t0, clamped, cfg.input_dim)
    return RegressionSolution(x, p.residual_norm(x), cfg, stats)


def solve_kron_exact(p: RegressionProblem) -> RegressionSolution:
    """Uses ``(A1 (x) A2)^+ (b1 (x) b2) = (A1^+ b1) (x) (A2^+ b2)``."""
    if p.mode != "kronecker":
        raise BadParameters("solve_kron_exact needs a Kronecker problem")
    t0 = time.perf_counter()
    x = np.outer(solve_ls_exact(p.A1, p.b1), solve_ls_exact(p.A2, p.b2)).ravel()
    stats = SolveStats(wall_time=time.perf_counter() - t0)
    return RegressionSolution(x, p.residual_norm(x), None, stats)


def solve_kron_sketched(p: RegressionProblem, cfg: SketchConfig, clamped: bool = False,
                        sketch: Optional[Sketch] = None) -> RegressionSolution:
    """Sketched Kronecker regression without forming ``A1 (x) A2``.

    Column (j1, j2) of S(A1 (x) A2) is S(A1[:, j1] (x) A2[:, j2]), computed by the
    tensor fast path; x is returned in the matching order j1*d2 + j2.
    """
    if p.mode != "kronecker":
        raise BadParameters("solve_kron_sketched needs a Kronecker problem")
    if not cfg.kind.is_tensor:
        raise WrongKind(f"Kronecker regression needs a tensor sketch, got {cfg.kind.value}")
    n = p.rows
    if cfg.n != next_pow2(n):
        raise DimensionMismatch(f"factors with {n} rows need sketch n={next_pow2(n)}, got {cfg.n}")
    if cfg.m < p.cols + 1:
        raise DimensionMismatch(f"sketch rows m={cfg.m} must be at least d1*d2+1={p.cols + 1}")
    t0 = time.perf_counter()
    S = sketch if sketch is not None else build_sketch(cfg)
    A1, A2 = _pad_rows(p.A1, cfg.n), _pad_rows(p.A2, cfg.n)
    b1, b2 = _pad_rows(p.b1, cfg.n), _pad_rows(p.b2, cfg.n)
    x = _sketched_solve(S.apply_kron(A1, A2), S.apply_tensor(b1, b2), cfg)
    stats = SolveStats(cfg.m, time.perf_counter() - t0, clamped, cfg.n)
    return RegressionSolution(x, p.residual_norm(x), cfg, stats)


def linf_deviation(a, x_star, x_prime) -> float:
    """``|<a, x*> - <a, x'>|``."""
    a, x_star, x_prime = as_vector(a), as_vector(x_star), as_vector(x_prime)
    if not a.shape == x_star.shape == x_prime.shape:
        raise DimensionMismatch(f"lengths differ: {a.shape[0]}, {x_star.shape[0]}, {x_prime.shape[0]}")
    return float(abs(a @ x_star - a @ x_prime))
