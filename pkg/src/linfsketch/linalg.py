"""Dense real linear algebra for tall, skinny problems.

Matrices are plain float64 numpy arrays kept in column-major (Fortran) order,
since every sketch is applied column by column. Sizes of interest are
n up to about 2**20 rows and d up to 64 columns.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonFinite,
    RankDeficient,
    TooLarge,
    ZeroColumn,
)

EPS = np.finfo(np.float64).eps
RANK_TOL = 1e-10
MAX_KRON_ENTRIES = 2**26
MAX_TENSOR_LEN = 2**24
JACOBI_MAX_SWEEPS = 60


def as_matrix(data, copy: bool = False) -> np.ndarray:
    """Validate ``data`` as a finite 2-D real matrix in column-major order."""
    A = np.array(data, dtype=np.float64, order="F", copy=copy or None, ndmin=2)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix has NaN or infinite entries")
    return A


def as_vector(data, copy: bool = False) -> np.ndarray:
    v = np.array(data, dtype=np.float64, copy=copy or None)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite("vector has NaN or infinite entries")
    return v


class SvdResult(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def _householder(A: np.ndarray, strict: bool):
    n, d = A.shape
    qr, tau, _, info = lapack.dgeqrf(A)
    if info != 0:
        raise ValueError(f"dgeqrf failed with info={info}")
    R = np.triu(qr[:d, :])
    pivots = np.abs(np.diag(R))
    floor = n * EPS * np.linalg.norm(A)
    weak = np.flatnonzero((pivots <= floor) | (pivots == 0.0))
    if strict and weak.size:
        raise ZeroColumn(f"column {weak[0]} is numerically dependent on earlier columns")
    Q, _, info = lapack.dorgqr(qr[:, :d], tau)
    if info != 0:
        raise ValueError(f"dorgqr failed with info={info}")
    return Q, R


def householder_qr(A) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization by Householder reflections.

    Returns ``Q`` (n x d, orthonormal columns) and upper-triangular ``R``
    (d x d) with ``Q @ R == A``. Raises ``ZeroColumn`` when a pivot column
    has no mass left beyond rounding level, which means ``A`` is rank deficient.
    """
    A = as_matrix(A)
    n, d = A.shape
    if n < d:
        raise DimensionMismatch(f"need rows >= cols, got {n}x{d}")
    return _householder(A, strict=True)


def _round_robin(d: int):
    # Tournament schedule: every pair (p, q) meets exactly once per sweep and
    # pairs within a round are disjoint, so a round rotates in one shot.
    players = list(range(d)) + ([-1] if d % 2 else [])
    k = len(players)
    rounds = []
    for _ in range(k - 1):
        ps, qs = [], []
        for i in range(k // 2):
            p, q = players[i], players[k - 1 - i]
            if p >= 0 and q >= 0:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_basis(U: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace columns of U not flagged ``good`` with an orthonormal completion."""
    U = U.copy()
    n = U.shape[0]
    basis = [U[:, j] for j in np.flatnonzero(good)]
    candidates = iter(range(n))
    for j in np.flatnonzero(~good):
        while True:
            e = np.zeros(n)
            e[next(candidates)] = 1.0
            for _ in range(2):
                for b in basis:
                    e -= (b @ e) * b
            norm = np.linalg.norm(e)
            if norm > 0.5:
                break
        U[:, j] = e / norm
        basis.append(U[:, j])
    return U


def _jacobi_svd(R: np.ndarray) -> SvdResult:
    """One-sided (Hestenes) Jacobi SVD of a small square matrix."""
    W = np.array(R, dtype=np.float64, copy=True)
    d = W.shape[1]
    V = np.eye(d)
    tol = d * EPS
    rounds = _round_robin(d)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p, q in rounds:
            if p.size == 0:
                continue
            G = W.T @ W
            alpha, beta, gamma = G[p, p], G[q, q], G[p, q]
            denom = np.sqrt(alpha * beta)
            rel = np.divide(np.abs(gamma), denom, out=np.zeros_like(gamma), where=denom > 0)
            off = max(off, float(rel.max()))
            act = rel > tol
            if not act.any():
                continue
            p, q = p[act], q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            # column p <- c*p - s*q, column q <- s*p + c*q for all pairs at once
            J = np.eye(d)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            W = W @ J
            V = V @ J
        if off <= tol:
            break
    else:
        raise NoConvergence(f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")

    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, W, V = sigma[order], W[:, order], V[:, order]
    top = sigma[0] if d else 0.0
    good = sigma > d * EPS * max(top, np.finfo(np.float64).tiny)
    U = np.zeros_like(W)
    U[:, good] = W[:, good] / sigma[good]
    if not good.all():
        U = _complete_basis(U, good)
    return SvdResult(U, sigma, V)


def svd_small(A) -> SvdResult:
    """Thin SVD ``A = U diag(sigma) V^T`` for a tall matrix with few columns.

    QR first reduces the problem to the d x d triangular factor, which is then
    diagonalized by one-sided Jacobi rotations.
    """
    A = as_matrix(A)
    n, d = A.shape
    if d > 64:
        raise TooLarge(f"svd_small supports at most 64 columns, got {d}")
    if n < d:
        raise DimensionMismatch(f"need rows >= cols, got {n}x{d}")
    Q, R = _householder(A, strict=False)
    Ur, sigma, V = _jacobi_svd(R)
    return SvdResult(np.asfortranarray(Q @ Ur), sigma, V)


def singular_values(A) -> np.ndarray:
    return svd_small(A).sigma


def _check_rank(sigma: np.ndarray) -> None:
    if sigma.size and (sigma[0] == 0.0 or sigma[-1] / sigma[0] <= RANK_TOL):
        ratio = 0.0 if sigma[0] == 0.0 else sigma[-1] / sigma[0]
        raise RankDeficient(f"sigma_min/sigma_max = {ratio:.3e} <= {RANK_TOL:g}")


def solve_ls_exact(A, b) -> np.ndarray:
    """Minimize ``||A x - b||_2`` for full-column-rank ``A`` via Householder QR."""
    A = as_matrix(A)
    b = as_vector(b)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"b has length {b.shape[0]}, A has {A.shape[0]} rows")
    if A.shape[0] < A.shape[1]:
        raise RankDeficient(f"{A.shape[0]}x{A.shape[1]} system cannot have full column rank")
    try:
        Q, R = householder_qr(A)
    except ZeroColumn as exc:
        raise RankDeficient(str(exc)) from exc
    _check_rank(_jacobi_svd(R).sigma)
    return solve_triangular(R, Q.T @ b, lower=False)


def pinv_spectral_norm(A) -> float:
    """``||A^+||_2 = 1 / sigma_min(A)`` for full-column-rank ``A``."""
    sigma = svd_small(A).sigma
    _check_rank(sigma)
    return float(1.0 / sigma[-1])


def kronecker_materialize(A1, A2) -> np.ndarray:
    A1, A2 = as_matrix(A1), as_matrix(A2)
    size = A1.shape[0] * A2.shape[0] * A1.shape[1] * A2.shape[1]
    if size > MAX_KRON_ENTRIES:
        raise TooLarge(f"Kronecker product would have {size} entries (limit {MAX_KRON_ENTRIES})")
    return np.asfortranarray(np.kron(A1, A2))


def tensor_vec(x, y) -> np.ndarray:
    """``x (x) y`` laid out as ``vec(x y^T)``: entry ``i * len(y) + j`` is ``x[i] * y[j]``."""
    x, y = as_vector(x), as_vector(y)
    if x.size * y.size > MAX_TENSOR_LEN:
        raise TooLarge(f"tensor product of length {x.size * y.size} exceeds {MAX_TENSOR_LEN}")
    return np.outer(x, y).ravel()
