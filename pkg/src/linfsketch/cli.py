"""``linfsketch`` command-line tool.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure
(rank deficiency and friends), 4 a verification check failed.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import NumericalError, SketchError
from .regression import (
    RegressionProblem,
    config_for,
    padded_size,
    solve_plain_exact,
    solve_plain_sketched,
)
from .rng import SeedSpec
from .sketches import SketchConfig, SketchKind, build_sketch, recommend_m
from .transforms import next_pow2
from .verify import run_check

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _kind(name: str) -> SketchKind:
    try:
        return SketchKind.parse(name)
    except SketchError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed_arg(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _sizes(text: str) -> list:
    try:
        sizes = [int(tok, 0) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def resolve_seed(cli_seed, config_seed=None) -> SeedSpec:
    """``--seed`` first, then the config's seed, then ``LSK_SEED``, then 0."""
    if cli_seed is not None:
        return SeedSpec(cli_seed)
    if config_seed is not None:
        return io.parse_seed(config_seed)
    env = io.seed_from_env(os.environ.get("LSK_SEED"))
    return env if env is not None else SeedSpec(0)


# -- sketch-apply -------------------------------------------------------------------


def cmd_sketch_apply(args) -> int:
    kind = args.kind
    seed = resolve_seed(args.seed)
    if kind.is_tensor:
        if not args.tensor_in:
            raise UsageError(f"--kind {kind.value} needs --tensor-in X Y (two factor matrices)")
        X, Y = (io.read_matrix(p) for p in args.tensor_in)
        if X.shape != Y.shape:
            raise UsageError(f"tensor factors must have equal shapes, got {X.shape} and {Y.shape}")
        rows = X.shape[0]
        n = next_pow2(rows)
        if args.m > n * n:
            raise UsageError(f"--m {args.m} exceeds the tensor input dimension {n * n}")
        t0 = time.perf_counter()
        S = build_sketch(SketchConfig(kind, args.m, n, seed))
        Xp, Yp = _pad(X, n), _pad(Y, n)
        out = np.column_stack([S.apply_tensor(Xp[:, j], Yp[:, j]) for j in range(X.shape[1])])
        elapsed = time.perf_counter() - t0
    else:
        if args.tensor_in:
            raise UsageError("--tensor-in is only valid for tensor kinds")
        if args.input is None:
            raise UsageError("--in is required")
        A = io.read_matrix(args.input)
        rows = A.shape[0]
        n = padded_size(kind, rows)
        if args.m > n:
            raise UsageError(f"--m {args.m} exceeds the (padded) input dimension {n}")
        t0 = time.perf_counter()
        S = build_sketch(SketchConfig(kind, args.m, n, seed))
        out = S.apply_mat(_pad(A, n))
        elapsed = time.perf_counter() - t0
    io.write_matrix(args.output, out)
    _log(f"wall_time_seconds: {elapsed:.6f}")
    _log(f"padded_n: {n} (input rows {rows})")
    return EXIT_OK


def _pad(A: np.ndarray, n: int) -> np.ndarray:
    if A.shape[0] == n:
        return A
    out = np.zeros((n, A.shape[1]), order="F")
    out[: A.shape[0]] = A
    return out


# -- regress ------------------------------------------------------------------------


def _recommended_m(kind: SketchKind, args, rows: int, cols: int):
    n = padded_size(kind, rows)
    # tensor kinds count columns per factor: the smallest d with d*d >= cols
    d = math.isqrt(cols - 1) + 1 if kind.is_tensor else cols
    return recommend_m(kind, args.eps, args.delta, n, d, args.c)


def cmd_regress(args) -> int:
    A = io.read_matrix(args.a)
    b = io.read_vector(args.b)
    p = RegressionProblem.plain(A, b)
    summary = {"m_used": None, "clamped": False, "residual_norm": None, "wall_time": None,
               "sketch": None, "padded_n": None}
    if args.sketch is None:
        if args.m is not None:
            raise UsageError("--m needs --sketch")
        sol = solve_plain_exact(p)
    else:
        kind = args.sketch
        seed = resolve_seed(args.seed)
        if args.m is not None:
            m, clamped = args.m, False
        else:
            m, clamped, _ = _recommended_m(kind, args, p.rows, p.cols)
            _log(f"recommended m = {m}" + (" (clamped to the usable range)" if clamped else ""))
        cfg = config_for(kind, m, p.rows, seed)
        if m > cfg.input_dim:
            raise UsageError(f"--m {m} exceeds the (padded) input dimension {cfg.input_dim}")
        sol = solve_plain_sketched(p, cfg, clamped=clamped)
        summary.update(m_used=m, clamped=clamped, sketch=kind.value, padded_n=cfg.input_dim)
        if cfg.input_dim != p.rows:
            _log(f"padded_n: {cfg.input_dim} (input rows {p.rows})")
    summary["residual_norm"] = sol.residual_norm
    if not args.no_timing:
        summary["wall_time"] = sol.solve_stats.wall_time
    if args.out is not None:
        io.write_matrix(args.out, sol.x)
    text = io.dump_json(summary)
    if args.summary is not None:
        Path(args.summary).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- verify -------------------------------------------------------------------------


def cmd_verify(args) -> int:
    cfg = io.load_config(args.config)
    seed = resolve_seed(args.seed, cfg["experiment"].get("seed"))
    spec = io.build_spec(cfg["experiment"], seed)
    out = args.out or cfg["io"].get("report")
    if out is None:
        raise UsageError("no report path: pass --out or set io.report in the config")
    g = h = None
    if "g" in cfg["io"] or "h" in cfg["io"]:
        if spec.check != "oce" or not ("g" in cfg["io"] and "h" in cfg["io"]):
            raise io.ConfigError("io.g and io.h go together and only with the oce check")
        g, h = io.read_vector(cfg["io"]["g"]), io.read_vector(cfg["io"]["h"])
    report = run_check(spec, workers=args.workers, g=g, h=h)
    Path(out).write_text(io.report_to_json(report, indent=cfg["output"].get("indent", 2)))
    status = "PASS" if report.overall_pass else "FAIL"
    _log(f"{spec.check} {spec.sketch_kind.value}: {status} ({len(report.per_cell)} cells) -> {out}")
    return EXIT_OK if report.overall_pass else EXIT_CHECK


# -- bench --------------------------------------------------------------------------


def _bench_once(S, kind: SketchKind, v, w) -> float:
    t0 = time.perf_counter()
    if kind.is_tensor:
        S.apply_tensor(v, w)
    else:
        S.apply_vec(v)
    return time.perf_counter() - t0


def cmd_bench(args) -> int:
    kind = args.kind
    seed = resolve_seed(args.seed)
    if args.reps == 1:
        _log("warning: --reps 1 gives a single sample; timings may be noisy")
    rng = seed.child("bench").generator()
    medians = []
    print("n,median_seconds")
    for n in args.sizes:
        if kind.is_fast and n & (n - 1):
            raise UsageError(f"{kind.value} needs power-of-two sizes, got {n}")
        m = min(args.m, n * n if kind.is_tensor else n)
        S = build_sketch(SketchConfig(kind, m, n, seed))
        v, w = rng.standard_normal(n), rng.standard_normal(n)
        if not kind.is_tensor:
            w = None
        _bench_once(S, kind, v, w)
        times = [_bench_once(S, kind, v, w) for _ in range(args.reps)]
        med = float(np.median(times))
        medians.append(med)
        print(f"{n},{med!r}")
        sys.stdout.flush()
    for (n1, t1), (n2, t2) in zip(zip(args.sizes, medians), zip(args.sizes[1:], medians[1:])):
        expected = (n2 * math.log2(n2)) / (n1 * math.log2(n1)) if n1 > 1 else float("nan")
        ratio = t2 / t1 if t1 > 0 else float("inf")
        _log(f"ratio {n1}->{n2}: time {ratio:.3f}, n log n {expected:.3f}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linfsketch", description="Sketch-and-solve tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=_seed_arg, default=None,
                       help="master seed (default: $LSK_SEED, then 0)")
        p.add_argument("--workers", type=_positive, default=1,
                       help="worker threads for Monte-Carlo trials; results do not depend on it")

    p = sub.add_parser("sketch-apply", help="write S A for an input matrix")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--m", type=_positive, required=True)
    p.add_argument("--in", dest="input")
    p.add_argument("--tensor-in", nargs=2, metavar=("X", "Y"),
                   help="factor matrices; column j of the output is S (X[:, j] (x) Y[:, j])")
    p.add_argument("--out", dest="output", required=True)
    common(p)
    p.set_defaults(func=cmd_sketch_apply)

    p = sub.add_parser("regress", help="least squares, exact or sketch-and-solve")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--sketch", type=_kind, default=None)
    p.add_argument("--m", type=_positive, default=None)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out", default=None, help="solution vector file")
    p.add_argument("--summary", default=None, help="JSON summary file (default: stdout)")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_time as null so repeated runs are byte-identical")
    common(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("verify", help="run one Monte-Carlo check from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time apply_vec (apply_tensor for tensor kinds)")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--sizes", type=_sizes, required=True)
    p.add_argument("--reps", type=_positive, default=5)
    p.add_argument("--m", type=_positive, default=64)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"linfsketch {args.command}: error: {exc}")
        return EXIT_USAGE
    except NumericalError as exc:
        _log(f"linfsketch {args.command}: numerical failure: {exc}")
        return EXIT_NUMERIC
    except (SketchError, OSError) as exc:
        _log(f"linfsketch {args.command}: error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
