import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as sps

from tlp.stats import (
    InsufficientDataError, average_ranks, beta_inc, chi2_sf, f_sf, friedman_test, gamma_q,
)

pos = st.floats(0.05, 60, allow_nan=False)


@given(a=pos, x=st.floats(0, 200))
def test_gamma_q_matches_scipy(a, x):
    assert gamma_q(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-8, abs=1e-13)


@given(a=pos, b=pos, x=st.floats(0, 1))
def test_beta_inc_matches_scipy(a, b, x):
    assert beta_inc(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-8, abs=1e-13)


@pytest.mark.parametrize("x,df", [(0.5, 1), (3.0, 2), (20.0, 2), (11.07, 5), (150.0, 120)])
def test_chi2_sf(x, df):
    assert chi2_sf(x, df) == pytest.approx(sps.chi2.sf(x, df), rel=1e-9)


@pytest.mark.parametrize("f,d1,d2", [(1.0, 2, 10), (4.5, 3, 40), (0.2, 12, 300), (25.0, 4, 6)])
def test_f_sf(f, d1, d2):
    assert f_sf(f, d1, d2) == pytest.approx(sps.f.sf(f, d1, d2), rel=1e-8)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=40))
def test_average_ranks_match_rankdata(values):
    assert np.allclose(average_ranks(np.array(values, dtype=float)), sps.rankdata(values))


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(3, 6))
def test_friedman_matches_scipy_without_ties(seed, n, k):
    blocks = np.random.default_rng(seed).normal(size=(n, k))
    res = friedman_test(blocks)
    ref = sps.friedmanchisquare(*blocks.T)
    assert res.chi_square == pytest.approx(ref.statistic, rel=1e-9)
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-14)
    assert 0.0 <= res.kendalls_w <= 1.0
    assert res.kendalls_w == pytest.approx(res.chi_square / (n * (k - 1)), rel=1e-9)


def test_friedman_drops_incomplete_blocks():
    res = friedman_test([[1, 2, 3], [1, math.nan, 3], [3, 2, 1], [1, 3, 2]])
    assert res.n_blocks == 3


@pytest.mark.parametrize("blocks", [[[1, 2]], [[1], [2]]])
def test_friedman_needs_two_blocks_and_treatments(blocks):
    with pytest.raises(InsufficientDataError):
        friedman_test(blocks)


def test_friedman_rejects_non_matrix():
    with pytest.raises(ValueError):
        friedman_test([])
