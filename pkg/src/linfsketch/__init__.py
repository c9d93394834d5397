"""Fast sketching matrices, sketch-and-solve least squares and Monte-Carlo checks
of their embedding and l-infinity error behavior."""
from .errors import (
    BadDimension,
    BadParameters,
    DimensionMismatch,
    NoConvergence,
    NonFinite,
    NotPowerOfTwo,
    NumericalError,
    RankDeficient,
    SketchError,
    TooLarge,
    WrongKind,
    ZeroColumn,
    ZeroVector,
)
from .linalg import householder_qr, pinv_spectral_norm, solve_ls_exact, svd_small
from .regression import (
    RegressionProblem,
    RegressionSolution,
    linf_deviation,
    solve_kron_exact,
    solve_kron_sketched,
    solve_plain_exact,
    solve_plain_sketched,
)
from .rng import SeedSpec
from .sketches import (
    Sketch,
    SketchConfig,
    SketchKind,
    apply_mat,
    apply_tensor,
    apply_vec,
    build_sketch,
    materialize,
    recommend_m,
)
from .verify import ExperimentSpec, VerificationReport, run_check

__version__ = "0.1.0"
