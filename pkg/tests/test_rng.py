import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from linfsketch.errors import BadParameters
from linfsketch.rng import (
    MERSENNE_61,
    FourWiseHash,
    SeedSpec,
    draw_hashes,
    fourwise_sign,
    hash_signs,
    hash_values,
    mulmod61,
    rademacher_vector,
    sample_rows,
)

P = MERSENNE_61
field = st.integers(0, P - 1)


@given(st.lists(st.tuples(field, field), min_size=1, max_size=40))
@settings(max_examples=200, deadline=None)
def test_mulmod_matches_big_ints(pairs):
    a = np.array([x for x, _ in pairs], dtype=np.uint64)
    b = np.array([y for _, y in pairs], dtype=np.uint64)
    got = mulmod61(a, b)
    assert [int(g) for g in got] == [x * y % P for x, y in pairs]


def test_mulmod_edge_values():
    edge = [0, 1, 2, P - 1, P - 2, 2**31 - 1, 2**31, 2**60, 2**61 - 2]
    a, b = np.array(list(itertools.product(edge, edge)), dtype=np.uint64).T
    assert [int(v) for v in mulmod61(a, b)] == [int(x) * int(y) % P for x, y in zip(a, b)]


@given(st.lists(field, min_size=4, max_size=4), st.lists(st.integers(0, 2**20), min_size=1, max_size=20))
@settings(max_examples=100, deadline=None)
def test_hash_values_match_horner_on_big_ints(coeffs, points):
    got = hash_values(np.array([coeffs], dtype=np.uint64), points)[0]
    c0, c1, c2, c3 = coeffs
    ref = [(c0 + c1 * x + c2 * x * x + c3 * x**3) % P for x in points]
    assert [int(v) for v in got] == ref
    signs = hash_signs(np.array([coeffs], dtype=np.uint64), points)[0]
    assert list(signs) == [1.0 if r % 2 == 0 else -1.0 for r in ref]


def test_seedspec_validation_and_children():
    with pytest.raises(BadParameters):
        SeedSpec(-1)
    with pytest.raises(BadParameters):
        SeedSpec(0, 2**64)
    s = SeedSpec(5, 9)
    assert s.child("a", 1) == s.child("a", 1)
    assert s.child("a", 1) != s.child("a", 2)
    assert s.child("a") != s.child("b")


def test_rademacher_determinism_and_mean():
    s = SeedSpec(42)
    v = rademacher_vector(s, 10**5)
    np.testing.assert_array_equal(v, rademacher_vector(s, 10**5))
    assert set(np.unique(v)) == {-1.0, 1.0}
    assert abs(v.mean()) <= 4 / np.sqrt(v.size)


def test_rademacher_distinct_streams_disagree():
    for sid in range(20):
        a = rademacher_vector(SeedSpec(1, sid), 64)
        b = rademacher_vector(SeedSpec(1, sid + 1), 64)
        assert np.any(a != b)


def test_stream_order_invariance():
    seeds = [SeedSpec(3, k) for k in range(5)]
    forward = [rademacher_vector(s, 32) for s in seeds]
    backward = [rademacher_vector(s, 32) for s in reversed(seeds)][::-1]
    for x, y in zip(forward, backward):
        np.testing.assert_array_equal(x, y)


def test_sample_rows():
    assert np.all(sample_rows(SeedSpec(0), 50, 1) == 0)
    idx = sample_rows(SeedSpec(8), 10**5, 16)
    counts = np.bincount(idx, minlength=16)
    assert np.all(np.abs(counts - 6250) <= 500)
    np.testing.assert_array_equal(idx, sample_rows(SeedSpec(8), 10**5, 16))
    with pytest.raises(BadParameters):
        sample_rows(SeedSpec(0), 0, 4)


def test_fourwise_sign_repeatable():
    h = FourWiseHash(tuple(int(c) for c in draw_hashes(SeedSpec(1), 1)[0]))
    assert all(fourwise_sign(h, 7) == fourwise_sign(h, 7) for _ in range(3))
    assert fourwise_sign(h, 7) in (-1, 1)
    with pytest.raises(BadParameters):
        FourWiseHash((0, 1, 2, P))


def test_pair_sign_agreement_rate():
    H = draw_hashes(SeedSpec(2), 10**4)
    signs = hash_signs(H, [17, 900])
    rate = np.mean(signs[:, 0] == signs[:, 1])
    assert abs(rate - 0.5) <= 0.02


def test_fourwise_sign_tuples_uniform():
    """Every 4-subset of 16 points: the 16 sign patterns are uniform (chi-squared, Bonferroni)."""
    draws = 10**5
    H = draw_hashes(SeedSpec(3), draws)
    bits = (hash_signs(H, np.arange(16)) < 0).astype(np.int64)
    subsets = list(itertools.combinations(range(16), 4))
    alpha = 0.001 / len(subsets)
    worst = 1.0
    for sub in subsets:
        code = bits[:, sub] @ np.array([8, 4, 2, 1])
        counts = np.bincount(code, minlength=16)
        worst = min(worst, stats.chisquare(counts).pvalue)
    assert worst > alpha
    # the single-subset criterion, at a fixed subset
    code = bits[:, [0, 5, 10, 15]] @ np.array([8, 4, 2, 1])
    assert stats.chisquare(np.bincount(code, minlength=16)).pvalue > 0.001

