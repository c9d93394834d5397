"""Monte-Carlo checks of subspace embedding, coordinate-wise embedding and
l-infinity forward error for the sketch families.

Every check runs ``trials`` independent trials per grid cell. Trial ``t``
draws all of its randomness from ``spec.seed.child("trial", t)``, so results
do not depend on the number of worker threads or on scheduling order.

Constants hidden in the asymptotic bounds are not known, so thresholds are
``C * scale`` with a user constant ``C``; the fitted constants and log-log
slopes across the grid are reported alongside.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional

import numpy as np

from .errors import BadParameters, DimensionMismatch, TooLarge, ZeroVector
from .linalg import as_vector, singular_values, solve_ls_exact, svd_small
from .regression import (
    RegressionProblem,
    config_for,
    linf_deviation,
    solve_kron_exact,
    solve_kron_sketched,
    solve_plain_sketched,
)
from .rng import SeedSpec
from .sketches import MAX_MATERIALIZE, SketchConfig, SketchKind, build_sketch

CHECKS = ("ose", "oce", "pairwise", "colnorm", "linf", "linf_scaling")
EXACT_COLNORM_TOL = 1e-12
PAIR_SCAN_LIMIT = 10**7
SUBSAMPLE_PAIRS = 10**5
SUBSAMPLE_FULL_COLS = 64
SLOPE_WINDOW = 0.35
CONSISTENT_TOL = 1e-12

DEFAULT_CONSTANT = {"pairwise": 3.0, "colnorm": 4.0, "oce": 1.0, "linf": 1.0, "linf_scaling": 1.0}
DEFAULT_OSE_THRESHOLD = 0.5


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one Monte-Carlo study.

    ``n`` and ``d`` are per-factor sizes for tensor kinds. ``threshold``
    replaces the per-cell pass threshold outright; ``constant`` rescales the
    default scale-law threshold. ``kappa`` sets m = kappa * columns in the
    d-scaling study.
    """

    sketch_kind: SketchKind
    n: int
    d: int
    m_grid: tuple[int, ...]
    check: str
    trials: int = 100
    delta: float = 0.05
    seed: SeedSpec = SeedSpec()
    d_grid: Optional[tuple[int, ...]] = None
    threshold: Optional[float] = None
    constant: Optional[float] = None
    kappa: int = 64
    direction: str = "random"
    subspace: str = "random"
    pair: str = "orthogonal"
    subsample: bool = False

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("sketch_kind", SketchKind.parse(self.sketch_kind))
        set_("m_grid", tuple(int(m) for m in self.m_grid))
        if self.d_grid is not None:
            set_("d_grid", tuple(int(d) for d in self.d_grid))
        if self.check not in CHECKS:
            raise BadParameters(f"unknown check {self.check!r}; choose from {CHECKS}")
        if self.trials < 30:
            raise BadParameters(f"trials must be >= 30, got {self.trials}")
        if not 0 < self.delta < 0.1:
            raise BadParameters(f"delta must lie in (0, 0.1), got {self.delta}")
        grids = [self.m_grid] + ([self.d_grid] if self.d_grid is not None else [])
        for grid in grids:
            if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
                raise BadParameters(f"grid {grid} must be non-empty, positive and strictly increasing")
        if self.n < 1 or self.d < 1:
            raise BadParameters("n and d must be positive")
        if self.check == "linf_scaling" and self.d_grid is None:
            raise BadParameters("linf_scaling needs d_grid")
        for name, allowed in (("direction", ("random", "coordinate")),
                              ("subspace", ("random", "identity")),
                              ("pair", ("orthogonal", "aligned", "basis"))):
            if getattr(self, name) not in allowed:
                raise BadParameters(f"{name} must be one of {allowed}")
        if self.threshold is not None and self.threshold < 0:
            raise BadParameters("threshold must be non-negative")
        if self.constant is not None and self.constant <= 0:
            raise BadParameters("constant must be positive")

    @property
    def input_dim(self) -> int:
        return self.n * self.n if self.sketch_kind.is_tensor else self.n

    def trial_seed(self, t: int) -> SeedSpec:
        return self.seed.child("trial", t)

    def constant_or_default(self) -> float:
        return self.constant if self.constant is not None else DEFAULT_CONSTANT[self.check]


@dataclass
class Cell:
    params: dict
    median: float
    q25: float
    q75: float
    q95: float
    quantile: float
    max: float
    threshold: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "median": self.median,
            "q25": self.q25,
            "q75": self.q75,
            "q95": self.q95,
            "quantile": self.quantile,
            "max": self.max,
            "threshold": self.threshold,
            "pass": self.passed,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Cell":
        data = dict(data)
        data["passed"] = data.pop("pass")
        return cls(**data)


@dataclass
class VerificationReport:
    check: str
    kind: str
    delta: float
    trials: int
    per_cell: list
    overall_pass: bool
    scaling_fit: Optional[dict] = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = [c.to_dict() for c in value] if f.name == "per_cell" else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        data = dict(data)
        data["per_cell"] = [Cell.from_dict(c) for c in data["per_cell"]]
        return cls(**data)

    def cell(self, **params) -> Cell:
        for c in self.per_cell:
            if all(c.params.get(k) == v for k, v in params.items()):
                return c
        raise KeyError(params)


# -- statistics --------------------------------------------------------------


def tail_quantile(values, delta: float) -> float:
    """The ceil((1 - delta) * N)-th order statistic (1-based) of ``values``."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    k = max(1, math.ceil((1.0 - delta) * v.size))
    return float(v[k - 1])


def summarize(values, delta: float, threshold: float, params: dict, extra=None,
              stat: Optional[float] = None) -> Cell:
    """Cell statistics. ``stat`` is what gets compared to the threshold (default: tail quantile)."""
    v = np.asarray(values, dtype=np.float64)
    q25, med, q75, q95 = (float(x) for x in np.quantile(v, [0.25, 0.5, 0.75, 0.95]))
    tail = tail_quantile(v, delta)
    judged = tail if stat is None else stat
    return Cell(params, med, q25, q75, q95, tail, float(v.max()), float(threshold),
                bool(judged <= threshold), extra or {})


def loglog_fit(xs, ys) -> Optional[dict]:
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or np.any(ys <= 0):
        return None
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def run_trials(fn: Callable[[int], Any], trials: int, workers: int = 1) -> list:
    """Evaluate ``fn(t)`` for every trial index; results come back in trial order."""
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


# -- shared per-trial helpers ---------------------------------------------------


def _sketch_for(spec: ExperimentSpec, m: int, t: int):
    cfg = SketchConfig(spec.sketch_kind, m, spec.n, spec.trial_seed(t).child("sketch"))
    return build_sketch(cfg)


def _orthonormal(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return svd_small(rng.standard_normal((n, d))).U


def _columns(S, cols: np.ndarray) -> np.ndarray:
    """Selected columns of S, computed by applying S to identity columns."""
    out = np.empty((S.m, cols.size))
    for start in range(0, cols.size, 256):
        chunk = cols[start : start + 256]
        E = np.zeros((S.input_dim, chunk.size), order="F")
        E[chunk, np.arange(chunk.size)] = 1.0
        out[:, start : start + chunk.size] = S.apply_mat(E)
    return out


def _materialize_ok(S) -> bool:
    return S.m * S.input_dim <= MAX_MATERIALIZE


def _require(cond: bool, msg: str):
    if not cond:
        raise BadParameters(msg)


# -- checks -------------------------------------------------------------------


def ose_trial(spec: ExperimentSpec, m: int, t: int) -> float:
    """max |sigma_i(S U) - 1| for one orthonormal U and one sketch."""
    N, d = spec.input_dim, spec.d
    if spec.subspace == "identity":
        U = np.eye(N, d)
    else:
        U = _orthonormal(spec.trial_seed(t).child("data").generator(), N, d)
    S = _sketch_for(spec, m, t)
    SU = S.apply_mat(U)
    if m < d:
        # d - m singular values are exactly zero
        return max(1.0, float(np.max(np.abs(singular_values(SU.T) - 1.0))))
    return float(np.max(np.abs(singular_values(SU) - 1.0)))


def check_ose(spec: ExperimentSpec, workers: int = 1) -> VerificationReport:
    _require(spec.input_dim >= 4 * spec.d, "ose check needs input dimension >= 4d")
    threshold = spec.threshold if spec.threshold is not None else DEFAULT_OSE_THRESHOLD
    cells = []
    for m in spec.m_grid:
        devs = run_trials(lambda t: ose_trial(spec, m, t), spec.trials, workers)
        cells.append(summarize(devs, spec.delta, threshold, {"m": m, "n": spec.n, "d": spec.d}))
    fit = loglog_fit(spec.m_grid, [c.median for c in cells])
    return _report(spec, cells, fit)


def pairwise_trial(spec: ExperimentSpec, m: int, t: int) -> float:
    """max over i != j of |<S_i, S_j>| (all pairs, or a subsample for large inputs)."""
    S = _sketch_for(spec, m, t)
    N = S.input_dim
    if N * (N - 1) // 2 <= PAIR_SCAN_LIMIT and _materialize_ok(S):
        M = S.materialize()
        G = M.T @ M
        np.fill_diagonal(G, 0.0)
        return float(np.abs(G).max())
    if not spec.subsample:
        raise TooLarge(f"{N} columns is too many for a full pair scan; enable subsample")
    rng = spec.trial_seed(t).child("pairs").generator()
    i = rng.integers(0, N, SUBSAMPLE_PAIRS)
    j = (i + rng.integers(1, N, SUBSAMPLE_PAIRS)) % N
    full = rng.choice(N, size=min(SUBSAMPLE_FULL_COLS, N), replace=False)
    cols, inverse = np.unique(np.concatenate([i, j, full]), return_inverse=True)
    C = _columns(S, cols)
    ii, jj = inverse[:SUBSAMPLE_PAIRS], inverse[SUBSAMPLE_PAIRS : 2 * SUBSAMPLE_PAIRS]
    best = float(np.abs(np.einsum("ij,ij->j", C[:, ii], C[:, jj])).max())
    F = C[:, inverse[2 * SUBSAMPLE_PAIRS :]]
    G = F.T @ F
    np.fill_diagonal(G, 0.0)
    return max(best, float(np.abs(G).max()))


def _log_scale(spec: ExperimentSpec, m: int) -> float:
    return math.sqrt(math.log(spec.input_dim / spec.delta) / m)


def check_pairwise_inner(spec: ExperimentSpec, workers: int = 1) -> VerificationReport:
    C = spec.constant_or_default()
    cells = []
    for m in spec.m_grid:
        vals = run_trials(lambda t: pairwise_trial(spec, m, t), spec.trials, workers)
        scale = _log_scale(spec, m)
        threshold = spec.threshold if spec.threshold is not None else C * scale
        tail = tail_quantile(vals, spec.delta)
        cells.append(summarize(vals, spec.delta, threshold, {"m": m, "n": spec.n},
                               {"scale": scale, "fitted_constant": tail / scale}))
    fit = loglog_fit(spec.m_grid, [c.q95 for c in cells])
    if fit is not None:
        fit["constant"] = max(c.extra["fitted_constant"] for c in cells)
    return _report(spec, cells, fit)


def colnorm_trial(spec: ExperimentSpec, m: int, t: int) -> float:
    S = _sketch_for(spec, m, t)
    if _materialize_ok(S):
        M = S.materialize()
    else:
        M = _columns(S, np.arange(S.input_dim))
    return float(np.max(np.abs(np.einsum("ij,ij->j", M, M) - 1.0)))


def check_column_norms(spec: ExperimentSpec, workers: int = 1) -> VerificationReport:
    """Exact unit columns for every kind with +-1/sqrt(m) entries; concentration for Gaussian."""
    exact = spec.sketch_kind is not SketchKind.GAUSSIAN
    C = spec.constant_or_default()
    cells = []
    for m in spec.m_grid:
        vals = run_trials(lambda t: colnorm_trial(spec, m, t), spec.trials, workers)
        scale = _log_scale(spec, m)
        if spec.threshold is not None:
            threshold = spec.threshold
        else:
            threshold = EXACT_COLNORM_TOL if exact else C * scale
        tail = tail_quantile(vals, spec.delta)
        cells.append(summarize(vals, spec.delta, threshold, {"m": m, "n": spec.n},
                               {"scale": scale, "fitted_constant": tail / scale}))
    fit = None
    if not exact:
        fit = loglog_fit(spec.m_grid, [c.q95 for c in cells])
        if fit is not None:
            fit["constant"] = max(c.extra["fitted_constant"] for c in cells)
    return _report(spec, cells, fit)


def default_pair(spec: ExperimentSpec) -> tuple[np.ndarray, np.ndarray]:
    """Fixed test vectors for the coordinate-wise embedding check."""
    N = spec.input_dim
    if spec.pair == "basis":
        g, h = np.zeros(N), np.zeros(N)
        g[0] = 1.0
        h[1 % N] = 1.0
        return g, h
    rng = spec.seed.child("pair").generator()
    g = rng.standard_normal(N)
    g /= np.linalg.norm(g)
    if spec.pair == "aligned":
        return g, g.copy()
    h = rng.standard_normal(N)
    h -= (g @ h) * g
    return g, h / np.linalg.norm(h)


def oce_trial(spec: ExperimentSpec, m: int, t: int, g: np.ndarray, h: np.ndarray) -> float:
    """sqrt(m) |<Sg, Sh> - <g, h>| / (||g|| ||h||)."""
    S = _sketch_for(spec, m, t)
    Sgh = S.apply_mat(np.column_stack([g, h]))
    dev = abs(Sgh[:, 0] @ Sgh[:, 1] - g @ h)
    return float(dev * math.sqrt(m) / (np.linalg.norm(g) * np.linalg.norm(h)))


def check_oce(spec: ExperimentSpec, g=None, h=None, workers: int = 1) -> VerificationReport:
    if g is None or h is None:
        g, h = default_pair(spec)
    g, h = as_vector(g), as_vector(h)
    if g.shape[0] != spec.input_dim or h.shape[0] != spec.input_dim:
        raise DimensionMismatch(f"g and h must have length {spec.input_dim}")
    if np.linalg.norm(g) == 0 or np.linalg.norm(h) == 0:
        raise ZeroVector("g and h must be non-zero")
    C = spec.constant_or_default()
    beta_scale = math.log(spec.input_dim / spec.delta) ** 1.5
    threshold = spec.threshold if spec.threshold is not None else C * beta_scale
    cells = []
    for m in spec.m_grid:
        vals = run_trials(lambda t: oce_trial(spec, m, t, g, h), spec.trials, workers)
        tail = tail_quantile(vals, spec.delta)
        cells.append(summarize(vals, spec.delta, threshold, {"m": m, "n": spec.n},
                               {"scale": beta_scale, "fitted_constant": tail / beta_scale}))
    fit = loglog_fit(spec.m_grid, [c.median for c in cells])
    if fit is not None:
        fit["constant"] = max(c.extra["fitted_constant"] for c in cells)
    return _report(spec, cells, fit)


# -- l-infinity forward error ---------------------------------------------------


def _complement_label(A: np.ndarray, U: np.ndarray, w: np.ndarray) -> np.ndarray:
    b = w - U @ (U.T @ w)
    return b / np.linalg.norm(b)


def linf_ratio(A, b, a, cfg: SketchConfig, sketch=None) -> dict:
    """Normalized l-infinity deviation of the sketched solution for a plain system.

    Returns ``R = |<a, x*> - <a, x'>| * sqrt(d) / (||a|| ||A x* - b|| ||A^+||)``
    together with the raw deviation and the unnormalized ratio (without sqrt(d)).
    A system that is consistent up to rounding has no residual to normalize by;
    ``||b||`` (an upper bound on the residual) is used instead, so R is then
    the rounding-level deviation rather than 0/0.
    """
    p = RegressionProblem.plain(A, b)
    a = as_vector(a)
    svd = svd_small(p.A)
    pinv = 1.0 / svd.sigma[-1]
    x_star = solve_ls_exact(p.A, p.b)
    x_prime = solve_plain_sketched(p, cfg, sketch=sketch).x
    residual = p.residual_norm(x_star)
    b_norm = float(np.linalg.norm(p.b))
    if residual <= CONSISTENT_TOL * b_norm:
        residual = b_norm
    return _ratio(a, x_star, x_prime, residual, pinv, p.cols)


def _ratio(a, x_star, x_prime, residual, pinv, cols) -> dict:
    dev = linf_deviation(a, x_star, x_prime)
    base = np.linalg.norm(a) * residual * pinv
    unnormalized = dev / base
    return {"R": unnormalized * math.sqrt(cols), "unnormalized": unnormalized, "deviation": dev}


def linf_trial(spec: ExperimentSpec, m: int, d: int, t: int) -> dict:
    rng = spec.trial_seed(t).child("data", d).generator()
    n, kind = spec.n, spec.sketch_kind
    seed = spec.trial_seed(t).child("sketch")
    if kind.is_tensor:
        # b1 orthogonal to range(A1) makes b1 (x) b2 orthogonal to range(A1 (x) A2)
        A1, A2 = rng.standard_normal((n, d)), rng.standard_normal((n, d))
        svd1, svd2 = svd_small(A1), svd_small(A2)
        b1 = _complement_label(A1, svd1.U, rng.standard_normal(n))
        b2 = rng.standard_normal(n)
        b2 /= np.linalg.norm(b2)
        a = _direction(spec, rng, d * d)
        p = RegressionProblem.kronecker(A1, A2, b1, b2)
        cfg = SketchConfig(kind, m, n, seed)
        x_star = solve_kron_exact(p).x
        x_prime = solve_kron_sketched(p, cfg).x
        pinv = 1.0 / (svd1.sigma[-1] * svd2.sigma[-1])
        return _ratio(a, x_star, x_prime, p.residual_norm(x_star), pinv, d * d)
    A = rng.standard_normal((n, d))
    svd = svd_small(A)
    b = _complement_label(A, svd.U, rng.standard_normal(n))
    a = _direction(spec, rng, d)
    p = RegressionProblem.plain(A, b)
    cfg = config_for(kind, m, n, seed)
    x_star = solve_ls_exact(A, b)
    x_prime = solve_plain_sketched(p, cfg).x
    return _ratio(a, x_star, x_prime, p.residual_norm(x_star), 1.0 / svd.sigma[-1], d)


def _direction(spec: ExperimentSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    if spec.direction == "coordinate":
        a = np.zeros(size)
        a[0] = 1.0
        return a
    a = rng.standard_normal(size)
    return a / np.linalg.norm(a)


def _linf_cell(spec: ExperimentSpec, m: int, d: int, workers: int) -> Cell:
    rows = run_trials(lambda t: linf_trial(spec, m, d, t), spec.trials, workers)
    R = np.array([r["R"] for r in rows])
    raw = np.array([r["unnormalized"] for r in rows])
    cols = d * d if spec.sketch_kind.is_tensor else d
    n_log = math.log(spec.n / spec.delta)
    eps = math.sqrt(cols * n_log**3 / m)
    C = spec.constant_or_default()
    threshold = spec.threshold if spec.threshold is not None else C * eps
    extra = {
        "eps": eps,
        "median_R_sqrt_m": float(np.median(R) * math.sqrt(m)),
        "q95_R_sqrt_m": float(np.quantile(R, 0.95) * math.sqrt(m)),
        "median_unnormalized": float(np.median(raw)),
    }
    return summarize(R, spec.delta, threshold, {"m": m, "n": spec.n, "d": d}, extra)


def check_linf(spec: ExperimentSpec, workers: int = 1) -> VerificationReport:
    """Adversarial labels b orthogonal to range(A), so x* = 0 and the whole residual is b."""
    _require(spec.n >= 4 * spec.d, "linf check needs n >= 4d")
    cells = [_linf_cell(spec, m, spec.d, workers) for m in spec.m_grid]
    fit = loglog_fit(spec.m_grid, [c.median for c in cells])
    return _report(spec, cells, fit)


def check_linf_scaling(spec: ExperimentSpec, workers: int = 1) -> VerificationReport:
    """With m proportional to the column count, median R should not depend on d."""
    d_grid = spec.d_grid
    _require(spec.n >= 4 * max(d_grid), "linf_scaling needs n >= 4 * max(d_grid)")
    cells = []
    for d in d_grid:
        cols = d * d if spec.sketch_kind.is_tensor else d
        cells.append(_linf_cell(spec, spec.kappa * cols, d, workers))
    flags = []
    fit = loglog_fit(d_grid, [c.median for c in cells])
    if fit is None:
        flags.append("insufficient_grid")
        return _report(spec, cells, None, flags, extra_pass=False)
    raw_fit = loglog_fit(d_grid, [c.extra["median_unnormalized"] for c in cells])
    fit["unnormalized_slope"] = raw_fit["slope"]
    fit["unnormalized_intercept"] = raw_fit["intercept"]
    ok = abs(fit["slope"]) <= SLOPE_WINDOW
    if not ok:
        flags.append("slope_out_of_window")
    return _report(spec, cells, fit, flags, extra_pass=ok)


def _report(spec, cells, fit, flags=None, extra_pass=True) -> VerificationReport:
    return VerificationReport(
        check=spec.check,
        kind=spec.sketch_kind.value,
        delta=spec.delta,
        trials=spec.trials,
        per_cell=cells,
        overall_pass=bool(extra_pass and all(c.passed for c in cells)),
        scaling_fit=fit,
        flags=list(flags or []),
    )


def run_check(spec: ExperimentSpec, workers: int = 1, g=None, h=None) -> VerificationReport:
    if spec.check == "oce":
        return check_oce(spec, g, h, workers=workers)
    dispatch = {
        "ose": check_ose,
        "pairwise": check_pairwise_inner,
        "colnorm": check_column_norms,
        "linf": check_linf,
        "linf_scaling": check_linf_scaling,
    }
    return dispatch[spec.check](spec, workers=workers)
