"""Closed-form latent access failure probability for the three HARQ schemes.

Every access-success probability has the same three-part shape,

    P = sum_n  O[n] * Theta[n] * (1 - Theta[n])**n

with ``O`` the Voronoi load PMF of the ``n`` other co-pilot UEs in the
typical cell, ``Theta[n]`` the probability the typical UE clears the SINR
threshold in its contention window, and ``(1 - Theta[n])**n`` the
probability that none of the ``n`` competitors does (no collision).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import comb

from . import specfun, timing
from .config import KRepetition, Proactive, Reactive, ScenarioConfig, Scheme
from .curve import FailureCurve

PARTS = ("both", "transmission", "non_collision")
FEEDBACK_LAG = 4  # an ACK for repetition l reaches the UE in time to skip l + 4


@dataclass(frozen=True)
class RoundTripState:
    m: int
    active_prob: float
    access_success: float
    power: float


@dataclass
class ProactiveRepetitionState:
    l: int
    feedback_factor: float
    access_success: float
    # per-n arrays, truncated at the round's load-PMF order
    per_rep_success: np.ndarray | None = None
    window_success: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _check_prob(x, name: str) -> None:
    assert np.all((x >= -1e-12) & (x <= 1 + 1e-12)), f"{name} outside [0, 1]: {x}"


@lru_cache(maxsize=4096)
def _exponent(k: int, alpha: float, gamma: float) -> float:
    return specfun.hyp2f1_interference(k, alpha, gamma) - 1.0


# ------------------------------------------------------------------ conditional success


def _single_shot(n, cfg: ScenarioConfig, g: float, ratio: float, r: int):
    """P[all r repetitions clear the threshold | n intra-cell co-pilot UEs],
    interferers at the same positions in every repetition."""
    gamma = cfg.gamma_th
    noise = math.exp(-r * gamma * cfg.noise_to_target / g)
    inter = math.exp(-ratio * _exponent(r, cfg.alpha, gamma))
    return noise * (1.0 + gamma) ** (-r * np.asarray(n, dtype=float)) * inter


def _inclusion_exclusion(n, cfg: ScenarioConfig, g: float, ratio: float, k: int):
    total = 0.0
    for r in range(1, k + 1):
        total = total + (-1) ** (r + 1) * comb(k, r, exact=True) * _single_shot(n, cfg, g, ratio, r)
    return total


def theta_reactive(n, m: int, cfg: ScenarioConfig, a_m: float):
    """Single-transmission success probability given ``n`` intra-cell co-pilot UEs."""
    return theta_krep(n, m, 1, cfg, a_m)


def theta_reactive_arctan(n, m: int, cfg: ScenarioConfig, a_m: float):
    """``theta_reactive`` through the elementary alpha = 4 form."""
    if cfg.alpha != 4:
        raise ValueError("arctan form holds for alpha = 4 only")
    g = cfg.power_level(m)
    gamma = cfg.gamma_th
    sg = math.sqrt(gamma)
    return (
        math.exp(-gamma * cfg.noise_to_target / g)
        * (1.0 + gamma) ** (-np.asarray(n, dtype=float))
        * math.exp(-sg * a_m * cfg.load_ratio * math.atan(sg))
    )


def theta_krep(n, m: int, k: int, cfg: ScenarioConfig, a_m: float):
    """Probability that at least one of ``k`` repetitions clears the threshold."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return _inclusion_exclusion(n, cfg, cfg.power_level(m), a_m * cfg.load_ratio, k)


# ------------------------------------------------------------------ access success


def _combine(ratio: float, theta_of_n, part: str = "both") -> float:
    order = specfun.truncation_order(ratio)
    n = np.arange(order + 1)
    o = np.atleast_1d(specfun.load_pmf(n, ratio))
    th = np.broadcast_to(theta_of_n(n), n.shape)
    if part == "both":
        terms = o * th * (1.0 - th) ** n
    elif part == "transmission":
        terms = o * th
    elif part == "non_collision":
        terms = o * (1.0 - th) ** n
    else:
        raise ValueError(f"part must be one of {PARTS}, got {part!r}")
    return float(np.sum(terms))


def access_success_reactive(m: int, cfg: ScenarioConfig, a_m: float, part: str = "both") -> float:
    ratio = a_m * cfg.load_ratio
    return _combine(ratio, lambda n: theta_reactive(n, m, cfg, a_m), part)


def access_success_krep(m: int, k: int, cfg: ScenarioConfig, a_m: float, part: str = "both") -> float:
    ratio = a_m * cfg.load_ratio
    return _combine(ratio, lambda n: theta_krep(n, m, k, cfg, a_m), part)


def round_states(cfg: ScenarioConfig, scheme: Reactive | KRepetition, n_rounds: int) -> list[RoundTripState]:
    """Active probability and access success for rounds 1..n_rounds."""
    k = scheme.reps
    states = []
    a = 1.0
    for m in range(1, n_rounds + 1):
        p = access_success_krep(m, k, cfg, a)
        _check_prob(p, "access success")
        states.append(RoundTripState(m, a, p, cfg.power_level(m)))
        a = a - a * p
        _check_prob(a, "active probability")
    return states


def _curve(cfg, scheme, t_max, p_fail, **meta) -> FailureCurve:
    return FailureCurve(
        scheme=scheme,
        t_ttis=np.arange(1, t_max + 1),
        p_fail=np.asarray(p_fail, dtype=float),
        tti_ms=cfg.tti_ms,
        engine="analytic",
        metadata={"config": cfg.digest(), **meta},
    )


def _round_curve(cfg, scheme, t_max) -> FailureCurve:
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    states = round_states(cfg, scheme, timing.max_rounds(scheme, t_max))
    # cumulative success after M rounds: sum_{m<=M} A_m P_m
    done = np.concatenate([[0.0], np.cumsum([s.active_prob * s.access_success for s in states])])
    p_fail = [1.0 - done[timing.max_rounds(scheme, t)] for t in range(1, t_max + 1)]
    order = specfun.truncation_order(cfg.load_ratio)
    return _curve(cfg, scheme, t_max, p_fail, truncation_order=order, rounds=states)


def failure_curve_reactive(cfg: ScenarioConfig, t_max: int) -> FailureCurve:
    return _round_curve(cfg, Reactive(), t_max)


def failure_curve_krep(cfg: ScenarioConfig, k: int, t_max: int) -> FailureCurve:
    return _round_curve(cfg, KRepetition(k), t_max)


# ------------------------------------------------------------------ proactive


def feedback_factor(m: int, l: int, prior_access) -> float:
    """Fraction of co-pilot UEs still transmitting at repetition ``l``.

    ``prior_access[r - 1]`` holds the round-``m`` access success after ``r``
    repetitions; only ``r = l - 4`` is read.
    """
    if l < 1:
        raise ValueError(f"repetition index must be >= 1, got {l}")
    if l <= FEEDBACK_LAG:
        return 1.0
    try:
        return 1.0 - prior_access[l - FEEDBACK_LAG - 1]
    except IndexError:
        raise ValueError(f"round {m}: access success after {l - FEEDBACK_LAG} repetitions not available") from None


def proactive_round(cfg: ScenarioConfig, k_max: int, m: int, a_m: float,
                    n_max: int | None = None) -> list[ProactiveRepetitionState]:
    """Repetition-by-repetition access success within HARQ round ``m``.

    Evaluated in increasing ``l`` so every feedback factor refers to an
    already-computed entry. Per-n arrays cover ``n <= max(N, n_max)`` with N
    the truncation order; the access sums always stop at N.
    """
    g = cfg.power_level(m)
    base = a_m * cfg.load_ratio
    order = specfun.truncation_order(base)
    n = np.arange(max(order, n_max or 0) + 1)
    states: list[ProactiveRepetitionState] = []
    access: list[float] = []
    theta4 = None
    survive = None  # prod_{r=5}^{l} (1 - per-repetition success), per n
    for l in range(1, k_max + 1):
        eta = feedback_factor(m, l, access)
        ratio = eta * base
        per_rep = None
        if l <= FEEDBACK_LAG:
            # no ACK can have arrived yet; same interferer set in every repetition
            theta = _inclusion_exclusion(n, cfg, g, base, l)
            if l == FEEDBACK_LAG:
                theta4 = theta
        else:
            # per-repetition success for l >= 5 carries the feedback factor and
            # the load PMF at the thinned density, as in the closed form
            per_rep = eta * specfun.load_pmf(n, ratio) * _single_shot(n, cfg, g, ratio, 1)
            survive = (1.0 - per_rep) if survive is None else survive * (1.0 - per_rep)
            theta = 1.0 - (1.0 - theta4) * survive
        o = specfun.load_pmf(n[: order + 1], ratio)
        th = np.broadcast_to(theta, n.shape)[: order + 1]
        p = float(np.sum(o * th * (1.0 - th) ** n[: order + 1]))
        _check_prob(theta, "window success")
        _check_prob(p, "proactive access success")
        access.append(p)
        states.append(ProactiveRepetitionState(l, eta, p, per_rep, np.asarray(theta)))
    return states


def theta_proactive(n, m: int, l: int, cfg: ScenarioConfig, a_m: float, k_max: int | None = None):
    """Window success by repetition ``l`` given ``n`` intra-cell co-pilot UEs."""
    k_max = l if k_max is None else k_max
    if not 1 <= l <= k_max:
        raise ValueError(f"repetition index {l} outside 1..{k_max}")
    n = np.asarray(n)
    states = proactive_round(cfg, k_max, m, a_m, n_max=int(n.max(initial=0)))
    return states[l - 1].window_success[n]


def access_success_proactive(m: int, l: int, cfg: ScenarioConfig, a_m: float, k_max: int | None = None) -> float:
    k_max = l if k_max is None else k_max
    if not 1 <= l <= k_max:
        raise ValueError(f"repetition index {l} outside 1..{k_max}")
    return proactive_round(cfg, k_max, m, a_m)[l - 1].access_success


def proactive_states(cfg: ScenarioConfig, k_max: int, n_rounds: int):
    """Per-round ``(RoundTripState, [ProactiveRepetitionState...])`` pairs."""
    out = []
    a = 1.0
    for m in range(1, n_rounds + 1):
        reps = proactive_round(cfg, k_max, m, a)
        full = reps[-1].access_success
        out.append((RoundTripState(m, a, full, cfg.power_level(m)), reps))
        a = a - a * full
        _check_prob(a, "active probability")
    return out


def failure_curve_proactive(cfg: ScenarioConfig, k_max: int, t_max: int) -> FailureCurve:
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    mu_max, _ = timing.proactive_indices(k_max, t_max)
    rounds = proactive_states(cfg, k_max, mu_max + 1)
    p_fail = []
    for t in range(1, t_max + 1):
        mu, nu = timing.proactive_indices(k_max, t)
        done = sum(st.active_prob * st.access_success for st, _ in rounds[:mu])
        if nu >= 3:
            # Partial final round. The closed form prints "+" here; the
            # partial-round success must be subtracted from the failure
            # probability for the curve to fall with T and to reduce to the
            # mu = 0 case.
            st, reps = rounds[mu]
            done += st.active_prob * reps[nu - 3].access_success
        p_fail.append(1.0 - done)
    order = specfun.truncation_order(cfg.load_ratio)
    return _curve(
        cfg,
        Proactive(k_max),
        t_max,
        p_fail,
        truncation_order=order,
        rounds=[st for st, _ in rounds],
        repetitions=[reps for _, reps in rounds],
    )


def failure_curve(cfg: ScenarioConfig, scheme: Scheme, t_max: int) -> FailureCurve:
    if isinstance(scheme, Reactive):
        return failure_curve_reactive(cfg, t_max)
    if isinstance(scheme, KRepetition):
        return failure_curve_krep(cfg, scheme.k, t_max)
    if isinstance(scheme, Proactive):
        return failure_curve_proactive(cfg, scheme.k_max, t_max)
    raise TypeError(f"not a scheme: {scheme!r}")
