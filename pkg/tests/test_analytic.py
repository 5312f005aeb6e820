import math

import numpy as np
import pytest

from gfurllc import analytic
from gfurllc.config import KRepetition, Proactive, Reactive, baseline
from gfurllc.specfun import load_pmf, truncation_order

# Frozen quadrature oracles at the baseline, gamma = -2 dB, m = 1, A_1 = 1:
# the inter-cell exponent integrated over the interferer's own-cell distance
# (Rayleigh) and its distance to the typical BS, no hypergeometric function.
THETA_REACTIVE_N3 = 0.03973784911994563
THETA_KREP4 = {0: 0.5266189754556433, 2: 0.2343544295239518}


def test_theta_reactive_ideal_limit():
    cfg = baseline(p_a=1e-12, sigma2_dbm=-400.0)
    assert analytic.theta_reactive(0, 1, cfg, 1.0) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("gamma_db", [-10.0, -2.0, 3.0])
def test_theta_reactive_arctan_form(gamma_db):
    cfg = baseline(gamma_th_db=gamma_db, power_ladder=[1, 2])
    n = np.arange(30)
    for m, a in [(1, 1.0), (2, 0.4)]:
        assert np.allclose(analytic.theta_reactive(n, m, cfg, a), analytic.theta_reactive_arctan(n, m, cfg, a),
                           rtol=0, atol=1e-10)
    with pytest.raises(ValueError):
        analytic.theta_reactive_arctan(0, 1, baseline(alpha=3.5), 1.0)


def test_theta_reactive_pgfl_oracle(cfg):
    assert analytic.theta_reactive(3, 1, cfg, 1.0) == pytest.approx(THETA_REACTIVE_N3, rel=1e-10)


def test_theta_krep_reduces_to_reactive(cfg):
    n = np.arange(60)
    assert np.max(np.abs(analytic.theta_krep(n, 1, 1, cfg, 0.7) - analytic.theta_reactive(n, 1, cfg, 0.7))) <= 1e-14


def test_theta_krep_monotone_in_k(cfg, cfg10):
    n = np.arange(20)
    for c in (cfg, cfg10):
        th = np.array([analytic.theta_krep(n, 1, k, c, 1.0) for k in range(1, 9)])
        assert np.all(np.diff(th, axis=0) >= -1e-15)


@pytest.mark.parametrize("n", sorted(THETA_KREP4))
def test_theta_krep4_quadrature_oracle(cfg, n):
    assert analytic.theta_krep(n, 1, 4, cfg, 1.0) == pytest.approx(THETA_KREP4[n], rel=1e-10)


def test_theta_krep_rejects_k0(cfg):
    with pytest.raises(ValueError):
        analytic.theta_krep(0, 1, 0, cfg, 1.0)


def test_access_success_light_load_limit():
    cfg = baseline(p_a=1e-12)
    expect = math.exp(-cfg.gamma_th * cfg.noise_to_target)
    assert analytic.access_success_reactive(1, cfg, 1.0) == pytest.approx(expect, rel=1e-9)


def test_access_success_impossible_threshold():
    assert analytic.access_success_reactive(1, baseline(gamma_th_db=60.0), 1.0) < 1e-12


def test_access_success_is_the_three_part_sum(cfg):
    ratio = cfg.load_ratio
    n = np.arange(truncation_order(ratio) + 1)
    th = analytic.theta_reactive(n, 1, cfg, 1.0)
    direct = float(np.sum(load_pmf(n, ratio) * th * (1 - th) ** n))
    assert analytic.access_success_reactive(1, cfg, 1.0) == pytest.approx(direct, rel=1e-15)


def test_decomposition_parts_bound_the_total(cfg):
    for k in (1, 2, 4, 8):
        both = analytic.access_success_krep(1, k, cfg, 1.0)
        assert both <= analytic.access_success_krep(1, k, cfg, 1.0, "transmission")
        assert both <= analytic.access_success_krep(1, k, cfg, 1.0, "non_collision")
    with pytest.raises(ValueError):
        analytic.access_success_krep(1, 2, cfg, 1.0, "bogus")


def test_reactive_curve_structure(cfg):
    c = analytic.failure_curve_reactive(cfg, 100)
    assert np.all(c.p_fail[:4] == 1.0)
    assert c.at(6) == c.at(7) == c.at(8) == c.at(5) < 1.0
    # value changes only at T = 4m + 1
    changes = np.flatnonzero(np.diff(c.p_fail) != 0) + 2
    assert set(changes) <= {4 * m + 1 for m in range(1, 26)}
    assert np.all(np.diff(c.p_fail) <= 0)
    assert c.metadata["truncation_order"] == 13 and c.engine == "analytic"


def test_reactive_two_rounds(cfg):
    c = analytic.failure_curve_reactive(cfg, 9)
    p1 = analytic.access_success_reactive(1, cfg, 1.0)
    a2 = 1 - p1
    p2 = analytic.access_success_reactive(2, cfg, a2)
    assert c.at(9) == pytest.approx(1 - p1 - (1 - p1) * p2, abs=1e-15)


def test_later_rounds_see_lighter_load(cfg):
    states = analytic.round_states(cfg, Reactive(), 6)
    assert [s.active_prob for s in states] == sorted((s.active_prob for s in states), reverse=True)
    assert all(b.access_success > a.access_success for a, b in zip(states, states[1:]))


def test_krep_curve_structure(cfg):
    c8 = analytic.failure_curve_krep(cfg, 8, 40)
    assert np.all(c8.p_fail[:11] == 1.0) and c8.at(12) < 1
    c4 = analytic.failure_curve_krep(cfg, 4, 100)
    changes = np.flatnonzero(np.diff(c4.p_fail) != 0) + 2
    assert set(changes) <= {7 * m + 1 for m in range(1, 15)}


def test_krep1_equals_reactive(cfg, cfg10):
    for c in (cfg, cfg10):
        a = analytic.failure_curve_reactive(c, 60).p_fail
        assert np.max(np.abs(analytic.failure_curve_krep(c, 1, 60).p_fail - a)) <= 1e-12
        assert np.max(np.abs(analytic.failure_curve_proactive(c, 1, 60).p_fail - a)) <= 1e-12


def test_failure_rises_with_load_and_repetition_crossing():
    # the repetition gain flips sign between light and heavy load
    def pf(k, ratio):
        return analytic.failure_curve_krep(baseline(gamma_th_db=-10.0, lambda_d=ratio), k, 8).at(8)

    ratios = [5e3, 1e4, 2e4, 4e4, 1e5, 2e5]
    for k in (2, 4):
        seq = [pf(k, r) for r in ratios]
        assert seq == sorted(seq)
    assert pf(4, 1e4) < pf(2, 1e4)
    assert pf(4, 1e5) > pf(2, 1e5)


def test_power_boost_helps_reactive(cfg):
    flat = analytic.failure_curve_reactive(cfg, 13).at(13)
    boosted = analytic.failure_curve_reactive(cfg.replace(power_ladder=[1, 2, 4]), 13).at(13)
    assert boosted < flat


# ------------------------------------------------------------------ proactive


def test_feedback_factor_examples():
    assert analytic.feedback_factor(1, 3, []) == 1.0
    assert analytic.feedback_factor(1, 5, [0.3]) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        analytic.feedback_factor(1, 6, [0.3])
    with pytest.raises(ValueError):
        analytic.feedback_factor(1, 0, [])


def test_feedback_chain_nonincreasing(cfg, cfg10):
    for c in (cfg, cfg10):
        eta = [s.feedback_factor for s in analytic.proactive_round(c, 8, 1, 1.0)]
        assert eta[:4] == [1.0] * 4
        assert all(b <= a for a, b in zip(eta, eta[1:]))


def test_proactive_access_nondecreasing_in_l(cfg, cfg10):
    for c in (cfg, cfg10):
        p = [s.access_success for s in analytic.proactive_round(c, 8, 1, 1.0)]
        assert all(b >= a for a, b in zip(p, p[1:]))


def test_proactive_window_matches_krep_for_l_le_4(cfg):
    n = np.arange(51)
    for l in range(1, 5):
        th = analytic.theta_krep(n, 1, l, cfg, 1.0)
        assert np.max(np.abs(analytic.theta_proactive(n, 1, l, cfg, 1.0, k_max=8) - th)) <= 1e-12
    assert analytic.theta_proactive(3, 1, 2, cfg, 1.0) == pytest.approx(analytic.theta_krep(3, 1, 2, cfg, 1.0))


def test_proactive_extended_grid_keeps_sums(cfg):
    a = [s.access_success for s in analytic.proactive_round(cfg, 8, 1, 1.0)]
    b = [s.access_success for s in analytic.proactive_round(cfg, 8, 1, 1.0, n_max=60)]
    assert a == b
    th = analytic.theta_proactive(np.arange(61), 1, 8, cfg, 1.0)
    assert th.shape == (61,) and np.all((th >= 0) & (th <= 1))


def test_proactive_first_repetition_is_reactive(cfg):
    assert analytic.access_success_proactive(1, 1, cfg, 1.0) == pytest.approx(
        analytic.access_success_reactive(1, cfg, 1.0), abs=1e-12)
    with pytest.raises(ValueError):
        analytic.access_success_proactive(1, 9, cfg, 1.0, k_max=8)


def test_proactive_curve_updates_every_tti(cfg):
    c = analytic.failure_curve_proactive(cfg, 8, 40)
    assert np.all(c.p_fail[:4] == 1.0)
    assert np.all(np.diff(c.p_fail[4:12]) < 0)  # T = 5..12, one repetition per TTI
    # round 2 starts at T = 13; its first ACK cannot arrive before T = 16
    assert c.at(12) == c.at(13) == c.at(14) == c.at(15)
    assert c.at(16) < c.at(15)
    assert np.all(np.diff(c.p_fail) <= 0)


def test_proactive_partial_round_term(cfg):
    c = analytic.failure_curve_proactive(cfg, 8, 20)
    (r1, _), (r2, reps2) = analytic.proactive_states(cfg, 8, 2)
    assert c.at(16) == pytest.approx(1 - r1.active_prob * r1.access_success
                                     - r2.active_prob * reps2[0].access_success, abs=1e-15)


def test_dispatch(cfg):
    assert analytic.failure_curve(cfg, KRepetition(2), 10).label == "krep2"
    assert analytic.failure_curve(cfg, Proactive(8), 10).metadata["repetitions"]
    with pytest.raises(TypeError):
        analytic.failure_curve(cfg, "reactive", 10)
    with pytest.raises(ValueError):
        analytic.failure_curve(cfg, Reactive(), 0)
