import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfurllc.specfun import (
    MAX_ORDER,
    VORONOI_C,
    SeriesError,
    hyp2f1_interference,
    load_pmf,
    truncation_order,
)

# Frozen oracle values (mpmath at 50 digits / scipy adaptive quadrature),
# computed independently of the package.
PMF_N2_R04583 = 0.09482560868857961414
ORDER_R04583 = 13
ORDER_R10 = 106
F21_K3_A4_G0631 = 2.397576056364767


def mp_pmf(n, ratio):
    mp.mp.dps = 40
    c, r = mp.mpf(VORONOI_C), mp.mpf(ratio)
    return c ** (c + 1) * mp.gamma(n + c + 1) * r**n / (mp.gamma(c + 1) * mp.factorial(n) * (r + c) ** (n + c + 1))


def test_pmf_empty_cell():
    assert load_pmf(0, 0.0) == 1.0
    assert load_pmf(3, 0.0) == 0.0
    assert np.array_equal(load_pmf(np.arange(4), 0.0), [1, 0, 0, 0])


def test_pmf_oracle():
    assert load_pmf(2, 0.4583) == pytest.approx(PMF_N2_R04583, rel=1e-13)
    for n, r in [(0, 0.4583), (7, 2.0), (40, 10.0), (300, 10.0)]:
        assert load_pmf(n, r) == pytest.approx(float(mp_pmf(n, r)), rel=1e-11)


@pytest.mark.parametrize("ratio", [0.0, 0.46, 2.0, 10.0])
def test_pmf_normalization(ratio):
    n = np.arange(truncation_order(ratio) + 1)
    assert abs(load_pmf(n, ratio).sum() - 1.0) < 1e-8 if ratio else load_pmf(n, ratio).sum() == 1.0


def test_pmf_sum_to_500():
    assert load_pmf(np.arange(501), 0.4583).sum() == pytest.approx(1.0, abs=1e-8)


def test_pmf_large_n_no_overflow():
    p = load_pmf(np.array([170, 1000, 5000]), 10.0)
    assert np.all(np.isfinite(p)) and np.all(p >= 0) and p[-1] < 1e-300


def test_pmf_rejects_negative_ratio():
    with pytest.raises(ValueError):
        load_pmf(0, -0.1)


@pytest.mark.parametrize("ratio, expected", [(0.0, 0), (0.4583, ORDER_R04583), (10.0, ORDER_R10)])
def test_truncation_order(ratio, expected):
    n = truncation_order(ratio, 1e-10)
    assert n == expected
    if ratio:
        # smallest N: the tail at N is below eps, at N - 1 it is not
        tail = [1 - sum(mp_pmf(i, ratio) for i in range(k + 1)) for k in (n - 1, n)]
        assert tail[0] >= 1e-10 > tail[1]


def test_truncation_cap():
    with pytest.raises(SeriesError, match="ratio=50000"):
        truncation_order(50000.0)
    assert truncation_order(10.0) < MAX_ORDER
    with pytest.raises(ValueError):
        truncation_order(1.0, tail_eps=0.0)


def test_hyp2f1_small_gamma_limit():
    for k in (1, 4, 8):
        assert hyp2f1_interference(k, 4.0, 1e-14) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.01, 0.1, 0.631, 1.0, 10.0])
def test_arctan_identity(gamma):
    sg = math.sqrt(gamma)
    assert abs((hyp2f1_interference(1, 4.0, gamma) - 1.0) - sg * math.atan(sg)) < 1e-10


def test_hyp2f1_quadrature_oracle():
    assert hyp2f1_interference(3, 4.0, 10 ** (-0.2)) == pytest.approx(F21_K3_A4_G0631, rel=1e-12)


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 5.5])
@pytest.mark.parametrize("gamma", [1e-3, 0.1, 0.5, 0.51, 0.631, 0.99, 1.0, 3.0, 4.0, 4.01, 10.0, 100.0, 1e6])
def test_hyp2f1_vs_mpmath(alpha, gamma):
    mp.mp.dps = 30
    for k in (1, 2, 5, 8):
        ref = float(mp.hyp2f1(-2 / mp.mpf(alpha), k, 1 - 2 / mp.mpf(alpha), -mp.mpf(gamma)))
        assert hyp2f1_interference(k, alpha, gamma) == pytest.approx(ref, rel=1e-12)


def test_hyp2f1_monotone_grid():
    gammas = np.logspace(-2, 1, 13)
    table = np.array([[hyp2f1_interference(k, 4.0, g) for g in gammas] for k in range(1, 9)])
    assert np.all(np.diff(table, axis=0) > 0)
    assert np.all(np.diff(table, axis=1) > 0)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(1, 8),
    alpha=st.floats(2.2, 6.0),
    gamma=st.floats(1e-4, 1e4),
)
def test_hyp2f1_property_vs_mpmath(k, alpha, gamma):
    mp.mp.dps = 30
    ref = float(mp.hyp2f1(-2 / mp.mpf(alpha), k, 1 - 2 / mp.mpf(alpha), -mp.mpf(gamma)))
    assert hyp2f1_interference(k, alpha, gamma) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("args", [(0, 4.0, 1.0), (1.5, 4.0, 1.0), (1, 2.0, 1.0), (1, 4.0, 0.0), (1, 4.0, -1.0)])
def test_hyp2f1_rejects_bad_input(args):
    with pytest.raises(ValueError):
        hyp2f1_interference(*args)
