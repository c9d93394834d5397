import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from linfsketch.errors import BadDimension, BadParameters, DimensionMismatch, TooLarge, WrongKind
from linfsketch.linalg import tensor_vec
from linfsketch.rng import MERSENNE_61, SeedSpec
from linfsketch.sketches import (
    SketchConfig,
    SketchKind,
    apply_mat,
    apply_tensor,
    apply_vec,
    build_sketch,
    materialize,
    recommend_m,
)

KINDS = list(SketchKind)
FAST = [k for k in KINDS if k.is_fast]


def _sketch(kind, m, n, seed=0):
    return build_sketch(SketchConfig(kind, m, n, SeedSpec(seed)))


def oracle_dense(S) -> np.ndarray:
    """Dense S rebuilt from the sketch's random structure with scipy/Python arithmetic only."""
    m, n, kind = S.m, S.n, S.kind
    if kind is SketchKind.GAUSSIAN:
        return S.gaussian_state.generator().standard_normal((m, n)) / math.sqrt(m)
    if kind is SketchKind.AMS:
        out = np.empty((m, n))
        for i, coeffs in enumerate(S.hash_family):
            c = [int(v) for v in coeffs]
            for j in range(n):
                val = (c[0] + c[1] * j + c[2] * j * j + c[3] * j**3) % MERSENNE_61
                out[i, j] = -1.0 if val & 1 else 1.0
        return out / math.sqrt(m)
    if kind.is_circulant:
        T = [scipy.linalg.circulant(g.gen).T for g in S.circulant_gens]
    else:
        T = [scipy.linalg.hadamard(n).astype(float)] * len(S.sign_diagonals)
    F = [t @ np.diag(D) for t, D in zip(T, S.sign_diagonals)]
    full = np.kron(F[0], F[1]) if kind.is_tensor else F[0]
    return full[S.sampled_rows] / math.sqrt(m)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [8, 16, 32])
def test_materialize_matches_independent_oracle(kind, n):
    m = 5
    for seed in range(5):
        S = _sketch(kind, m, n, seed)
        np.testing.assert_allclose(materialize(S), oracle_dense(S), rtol=0, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
def test_fast_paths_match_dense(kind):
    n, m = 32, 12
    rng = np.random.default_rng(1)
    for seed in range(10):
        S = _sketch(kind, m, n, seed)
        M = oracle_dense(S)
        v = rng.standard_normal(S.input_dim)
        ref = M @ v
        assert np.linalg.norm(apply_vec(S, v) - ref) <= 1e-10 * np.linalg.norm(ref)
        A = rng.standard_normal((S.input_dim, 3))
        np.testing.assert_allclose(apply_mat(S, A), M @ A, atol=1e-10 * np.linalg.norm(A))
        if kind.is_tensor:
            x, y = rng.standard_normal(n), rng.standard_normal(n)
            ref = M @ tensor_vec(x, y)
            assert np.linalg.norm(apply_tensor(S, x, y) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_srht_n256_m64_vector():
    S = _sketch(SketchKind.SRHT, 64, 256, 3)
    v = np.random.default_rng(0).standard_normal(256)
    ref = oracle_dense(S) @ v
    assert np.linalg.norm(apply_vec(S, v) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_tensorsrht_n64_m128():
    S = _sketch(SketchKind.TENSOR_SRHT, 128, 64, 4)
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal(64), rng.standard_normal(64)
    ref = materialize(S) @ tensor_vec(x, y)
    assert np.linalg.norm(apply_tensor(S, x, y) - ref) <= 1e-10 * np.linalg.norm(ref)


@pytest.mark.parametrize("kind", KINDS)
def test_linearity(kind):
    S = _sketch(kind, 16, 16, 2)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(S.input_dim)
    np.testing.assert_array_equal(apply_vec(S, np.zeros(S.input_dim)), 0.0)
    np.testing.assert_allclose(apply_vec(S, -3.5 * v), -3.5 * apply_vec(S, v), rtol=1e-12, atol=1e-13)
    A = rng.standard_normal((S.input_dim, 4))
    x = rng.standard_normal(4)
    np.testing.assert_allclose(apply_mat(S, A) @ x, apply_vec(S, A @ x), atol=1e-10 * np.linalg.norm(A))
    for j in range(4):
        np.testing.assert_allclose(apply_mat(S, A)[:, j], apply_vec(S, A[:, j]), atol=1e-13)
    np.testing.assert_array_equal(apply_mat(S, np.zeros((S.input_dim, 2))), 0.0)


def test_apply_mat_columns_512x8():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((512, 8))
    for kind in (SketchKind.SRHT, SketchKind.SRCT, SketchKind.GAUSSIAN, SketchKind.AMS):
        S = _sketch(kind, 40, 512, 5)
        SA = apply_mat(S, A)
        for j in range(8):
            np.testing.assert_allclose(SA[:, j], apply_vec(S, A[:, j]), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kind", [SketchKind.TENSOR_SRHT, SketchKind.TENSOR_SRCT])
def test_tensor_bilinear(kind):
    S = _sketch(kind, 20, 8, 6)
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal(8), rng.standard_normal(8)
    np.testing.assert_array_equal(apply_tensor(S, np.zeros(8), y), 0.0)
    np.testing.assert_allclose(apply_tensor(S, 2.5 * x, y), 2.5 * apply_tensor(S, x, y), rtol=1e-12)
    np.testing.assert_allclose(apply_tensor(S, x, -y), -apply_tensor(S, x, y), rtol=1e-12)


def test_apply_kron_column_order():
    S = _sketch(SketchKind.TENSOR_SRCT, 30, 8, 1)
    rng = np.random.default_rng(3)
    A1, A2 = rng.standard_normal((8, 2)), rng.standard_normal((8, 3))
    np.testing.assert_allclose(S.apply_kron(A1, A2), materialize(S) @ np.kron(A1, A2), atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_determinism_and_seed_sensitivity(kind):
    a, b = materialize(_sketch(kind, 8, 16, 9)), materialize(_sketch(kind, 8, 16, 9))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, materialize(_sketch(kind, 8, 16, 10)))


def test_gaussian_streaming_matches_table():
    # large enough that the dense table is not cached and rows are streamed in blocks
    S = _sketch(SketchKind.GAUSSIAN, 300, 2**14 + 3, 1)
    assert S._table() is None
    v = np.random.default_rng(0).standard_normal(S.n)
    rows = S.gaussian_state.generator().standard_normal((S.m, S.n)) / math.sqrt(S.m)
    np.testing.assert_allclose(apply_vec(S, v), rows @ v, rtol=1e-12, atol=1e-12)


def test_srht_full_rows_dense():
    S = _sketch(SketchKind.SRHT, 32, 32, 0)
    M = materialize(S)
    assert np.all(np.count_nonzero(M, axis=1) == 32)
    np.testing.assert_allclose(np.abs(M), 1 / math.sqrt(32), rtol=0, atol=0)


@pytest.mark.parametrize("kind", FAST + [SketchKind.AMS])
def test_entries_are_signs(kind):
    for seed in range(5):
        S = _sketch(kind, 7, 16, seed)
        assert np.all(np.abs(materialize(S)) == 1 / math.sqrt(7))


@pytest.mark.parametrize("kind", FAST)
@given(n_exp=st.integers(1, 7), m=st.integers(1, 70), seed=st.integers(0, 2**63))
@settings(max_examples=25, deadline=None)
def test_unit_columns(kind, n_exp, m, seed):
    n = 2**n_exp
    if kind.is_tensor:
        n = 2 ** max(1, n_exp // 2)
    M = materialize(_sketch(kind, m, n, seed))
    assert np.max(np.abs(np.sum(M * M, axis=0) - 1.0)) <= 1e-12


def test_gaussian_entry_variance():
    M = materialize(_sketch(SketchKind.GAUSSIAN, 256, 64, 4))
    assert abs(M.var() * 256 - 1.0) <= 0.1


def test_gaussian_expected_column_norm():
    e = np.zeros(16)
    e[3] = 1.0
    norms = [np.sum(apply_vec(_sketch(SketchKind.GAUSSIAN, 8, 16, s), e) ** 2) for s in range(10**4)]
    assert abs(np.mean(norms) - 1.0) <= 0.05


@pytest.mark.parametrize("kind", FAST)
def test_row_entries_uncorrelated(kind):
    n = 4 if kind.is_tensor else 16
    rows = np.array([materialize(_sketch(kind, 1, n, s))[0] for s in range(10**4)])
    C = np.corrcoef(rows, rowvar=False)
    np.fill_diagonal(C, 0.0)
    assert np.abs(C).max() <= 0.05


def test_config_validation():
    with pytest.raises(BadDimension):
        SketchConfig(SketchKind.SRHT, 4, 12)
    with pytest.raises(BadDimension):
        SketchConfig(SketchKind.AMS, 0, 12)
    SketchConfig(SketchKind.GAUSSIAN, 4, 12)
    with pytest.raises(BadParameters):
        SketchKind.parse("countsketch")
    assert SketchKind.parse("Tensor_SRHT") is SketchKind.TENSOR_SRHT
    assert SketchConfig("tensorsrct", 3, 8).input_dim == 64


def test_apply_errors():
    S = _sketch(SketchKind.SRHT, 4, 8)
    with pytest.raises(DimensionMismatch):
        apply_vec(S, np.ones(7))
    with pytest.raises(DimensionMismatch):
        apply_mat(S, np.ones((16, 2)))
    with pytest.raises(WrongKind):
        apply_tensor(S, np.ones(8), np.ones(8))
    T = _sketch(SketchKind.TENSOR_SRHT, 4, 8)
    with pytest.raises(DimensionMismatch):
        apply_tensor(T, np.ones(8), np.ones(4))
    with pytest.raises(TooLarge):
        materialize(_sketch(SketchKind.TENSOR_SRHT, 8192, 128))


def test_sketch_is_read_only():
    S = _sketch(SketchKind.TENSOR_SRCT, 4, 8)
    with pytest.raises(ValueError):
        S.sampled_rows[0] = 1
    with pytest.raises(ValueError):
        S.sign_diagonals[1][0] = 1.0
    assert len(S.circulant_gens) == 2
    assert not np.array_equal(S.circulant_gens[0].gen, S.circulant_gens[1].gen)


def test_recommend_m_formula():
    r = recommend_m("srht", 1.0, 0.05, 2**16, 4)
    assert r.raw == pytest.approx(4 * math.log(2**16 / 0.05) ** 3)
    assert r.m == math.ceil(4 * math.log(2**16 / 0.05) ** 3) == 11180
    assert not r.clamped


def test_recommend_m_scaling():
    base = recommend_m("srht", 0.5, 0.01, 2**40, 4).raw
    assert recommend_m("srht", 0.5, 0.01, 2**40, 8).raw == pytest.approx(2 * base)
    assert recommend_m("srht", 0.25, 0.01, 2**40, 4).raw == pytest.approx(4 * base)
    L = math.log(1024 / 0.01)
    assert recommend_m("srct", 1, 0.01, 1024, 3).raw == pytest.approx(9 * L**2)
    assert recommend_m("tensorsrht", 1, 0.01, 1024, 3).raw == pytest.approx(9 * L**3)
    assert recommend_m("tensorsrct", 1, 0.01, 1024, 3).raw == pytest.approx(81 * L**3)
    assert recommend_m("gaussian", 1, 0.01, 1024, 3, c=0.5).raw == pytest.approx(1.5 * L**3)


def test_recommend_m_clamps():
    r = recommend_m("srht", 0.5, 0.01, 64, 8)
    assert r.clamped and r.m == 64
    r = recommend_m("gaussian", 1.0, 0.05, 2**20, 8, c=1e-6)
    assert r.clamped and r.m == 9
    r = recommend_m("tensorsrht", 1.0, 0.05, 2**10, 4, c=1e-9)
    assert r.clamped and r.m == 17
    for bad in [dict(eps=0), dict(eps=1.5), dict(delta=0.1), dict(c=0)]:
        kw = dict(eps=0.5, delta=0.01, c=1.0) | bad
        with pytest.raises(BadParameters):
            recommend_m("srht", kw["eps"], kw["delta"], 64, 4, kw["c"])
