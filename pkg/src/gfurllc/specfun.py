"""Special functions behind the closed forms.

Only the parameter ranges the access model needs are covered: the Voronoi
cell-load PMF and ``2F1(-2/alpha, k; 1 - 2/alpha; -gamma)`` with integer
``k >= 1`` and ``gamma > 0``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln

#: Shape constant of the approximate PPP Voronoi cell-area distribution.
VORONOI_C = 3.575
TAIL_EPS = 1e-10
MAX_ORDER = 10_000

_SERIES_RTOL = 1e-15
_SERIES_MAX_TERMS = 2_000_000
PFAFF_MAX_GAMMA = 4.0  # above this the 1/z transformation converges faster


class SeriesError(ArithmeticError):
    """A truncated series did not converge within its cap."""


def load_pmf(n, ratio: float, c: float = VORONOI_C):
    """Probability that ``n`` other co-pilot UEs share the typical UE's cell.

    ``ratio`` is the effective load (active co-pilot UEs per BS). Accepts a
    scalar or array ``n``; evaluated in log space because ``Gamma(n + c + 1)``
    overflows doubles near n = 170.
    """
    if ratio < 0:
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    n_arr = np.asarray(n, dtype=float)
    if ratio == 0.0:
        out = np.where(n_arr == 0, 1.0, 0.0)
    else:
        log_p = (
            (c + 1.0) * math.log(c)
            + gammaln(n_arr + c + 1.0)
            - gammaln(c + 1.0)
            - gammaln(n_arr + 1.0)
            + n_arr * math.log(ratio)
            - (n_arr + c + 1.0) * math.log(ratio + c)
        )
        out = np.exp(log_p)
    return float(out) if out.ndim == 0 else out


def truncation_order(ratio: float, tail_eps: float = TAIL_EPS, c: float = VORONOI_C) -> int:
    """Smallest N with ``1 - sum_{n<=N} load_pmf(n) < tail_eps``."""
    if not 0.0 < tail_eps < 1.0:
        raise ValueError(f"tail_eps must be in (0, 1), got {tail_eps}")
    if ratio < 0:
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    if ratio == 0.0:
        return 0
    chunk = 256
    seen = 0.0
    for start in range(0, MAX_ORDER + 1, chunk):
        n = np.arange(start, min(start + chunk, MAX_ORDER + 1))
        cum = seen + np.cumsum(load_pmf(n, ratio, c))
        hit = np.flatnonzero(1.0 - cum < tail_eps)
        if hit.size:
            return int(n[hit[0]])
        seen = float(cum[-1])
    raise SeriesError(f"load PMF tail above {tail_eps} at N={MAX_ORDER} for ratio={ratio}")


def _series(a: float, b: float, c: float, z: float) -> float:
    """Plain Gauss series; caller guarantees |z| < 1."""
    term = 1.0
    total = 1.0
    for j in range(_SERIES_MAX_TERMS):
        term *= (a + j) * (b + j) / ((c + j) * (j + 1.0)) * z
        total += term
        if abs(term) <= _SERIES_RTOL * abs(total):
            # the tail of a ratio-test series past this point is bounded by
            # term * r / (1 - r); require that bound too
            r = abs((a + j + 1) * (b + j + 1) / ((c + j + 1) * (j + 2.0)) * z)
            if r < 1.0 and abs(term) * r / (1.0 - r) <= _SERIES_RTOL * abs(total):
                return total
    raise SeriesError(f"2F1({a}, {b}; {c}; {z}) series did not converge")


def hyp2f1_interference(k: int, alpha: float, gamma_lin: float) -> float:
    """``2F1(-2/alpha, k; (alpha-2)/alpha; -gamma_lin)``.

    Subtracting one gives the inter-cell interference exponent per unit load
    for ``k`` transmissions sharing interferer positions.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2, got {alpha}")
    if not gamma_lin > 0:
        raise ValueError(f"gamma_lin must be > 0, got {gamma_lin}")
    a = -2.0 / alpha
    c = 1.0 + a
    z = -gamma_lin
    try:
        if gamma_lin <= 0.5:
            return _series(a, k, c, z)
        if gamma_lin <= PFAFF_MAX_GAMMA:
            # Pfaff: 2F1(a,b;c;z) = (1-z)^(-b) 2F1(c-a, b; c; z/(z-1)).
            # Here c - a = 1 and z/(z-1) = gamma/(1+gamma) lies in (0, 1), and
            # all series terms are positive, so there is no cancellation. Also
            # used on 0.5 < gamma < 1 where the alternating direct series
            # loses digits for large k.
            w = gamma_lin / (1.0 + gamma_lin)
            return (1.0 + gamma_lin) ** (-k) * _series(1.0, k, c, w)
        # 1/z transformation. Since a - c + 1 = 0 the first of its two series
        # is identically 1; the second runs in -1/gamma, |.| < 1/PFAFF_MAX_GAMMA.
        lead = math.exp(gammaln(c) + gammaln(k - a) - gammaln(k) - gammaln(c - a)) * gamma_lin ** (-a)
        coef = gamma_fn(c) * gamma_fn(a - k) / (gamma_fn(a) * gamma_fn(c - k))
        return lead + coef * gamma_lin ** (-k) * _series(k, k - a, k - a + 1.0, 1.0 / z)
    except SeriesError as exc:
        raise SeriesError(f"{exc} (k={k}, alpha={alpha}, gamma={gamma_lin})") from None
