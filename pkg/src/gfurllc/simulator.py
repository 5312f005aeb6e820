"""Monte-Carlo ground truth for grant-free access with HARQ.

One trial is one deployment: BSs are a PPP in a disc, active co-pilot UEs a
thinned PPP. All active UEs start round 1 together and retry in lockstep.
At each round start the remaining UEs move to fresh uniform positions and
draw a fresh pilot. Every repetition sees fresh Rayleigh fading.

Tracked ("typical") UEs are the ones away from the disc edge. They are
repositioned inside the inner disc every round, the others inside the
guard-band annulus, so each round is still a uniform PPP over the disc.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.spatial import cKDTree

from . import timing
from .config import KRepetition, Proactive, Reactive, ScenarioConfig, Scheme
from .curve import FailureCurve

log = logging.getLogger(__name__)

GUARD_FRACTION = 0.2  # of the disc radius
COLLISION_MODES = ("window", "per_repetition")

SUCCESS, FAILED = "success", "fail"


def trial_rng(seed: int, trial_id: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial_id])))


def _uniform_annulus(rng, count: int, r_in: float, r_out: float) -> np.ndarray:
    r = np.sqrt(rng.uniform(r_in**2, r_out**2, count))
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


@dataclass
class Deployment:
    """Positions and association of the active co-pilot UEs for one round."""

    bs_positions: np.ndarray
    radius: float
    ue_ids: np.ndarray
    ue_positions: np.ndarray
    tracked: np.ndarray
    pilots: np.ndarray
    serving_bs: np.ndarray
    serving_dist: np.ndarray
    alpha: float
    n_ues_total: int = 0
    bs_redraws: int = 0

    @property
    def n_active(self) -> int:
        return len(self.ue_ids)

    def tx_power(self, g: float, rho: float) -> np.ndarray:
        """Full path-loss inversion: transmit power reaching g * rho at the serving BS."""
        return g * rho * self.serving_dist**self.alpha

    def rx_power(self, g: float, rho: float, ue: np.ndarray | None = None, bs: np.ndarray | None = None):
        """Mean received power (no fading) of UEs ``ue`` at BSs ``bs``;
        defaults to each UE's serving BS."""
        ue = np.arange(self.n_active) if ue is None else np.asarray(ue)
        bs = self.serving_bs[ue] if bs is None else np.asarray(bs)
        d = np.linalg.norm(self.ue_positions[ue] - self.bs_positions[bs], axis=-1)
        return self.tx_power(g, rho)[ue] * d ** (-self.alpha)


def _place(dep_bs, tree, radius, alpha, ue_ids, tracked, s_pilots, rng, n_total=0, redraws=0) -> Deployment:
    n = len(ue_ids)
    r_in = (1.0 - GUARD_FRACTION) * radius
    pos = np.empty((n, 2))
    pos[tracked] = _uniform_annulus(rng, int(tracked.sum()), 0.0, r_in)
    pos[~tracked] = _uniform_annulus(rng, int((~tracked).sum()), r_in, radius)
    pilots = rng.integers(0, s_pilots, n)
    if n:
        dist, serving = tree.query(pos)
    else:
        dist, serving = np.zeros(0), np.zeros(0, dtype=int)
    return Deployment(
        bs_positions=dep_bs,
        radius=radius,
        ue_ids=ue_ids,
        ue_positions=pos,
        tracked=tracked,
        pilots=pilots,
        serving_bs=np.asarray(serving, dtype=np.intp),
        serving_dist=np.asarray(dist, dtype=float),
        alpha=alpha,
        n_ues_total=n_total,
        bs_redraws=redraws,
    )


def deploy(cfg: ScenarioConfig, rng: np.random.Generator) -> Deployment:
    """Draw BSs and the active UEs of one trial, positioned for round 1."""
    area = cfg.sim_area_km2
    radius = math.sqrt(area / math.pi)
    redraws = 0
    while True:
        n_bs = rng.poisson(cfg.lambda_b * area)
        if n_bs > 0:
            break
        redraws += 1
    bs = _uniform_annulus(rng, n_bs, 0.0, radius)
    n_total = int(rng.poisson(cfg.lambda_d * area))
    n_active = int(rng.binomial(n_total, cfg.p_a))
    tracked = rng.random(n_active) < (1.0 - GUARD_FRACTION) ** 2
    return _place(bs, cKDTree(bs), radius, cfg.alpha, np.arange(n_active), tracked, cfg.s_pilots, rng,
                  n_total, redraws)


def make_deployment(bs_positions, ue_positions, pilots, alpha: float = 4.0, tracked=None) -> Deployment:
    """Deployment from explicit coordinates (km), nearest-BS association."""
    bs = np.atleast_2d(np.asarray(bs_positions, dtype=float))
    ue = np.asarray(ue_positions, dtype=float).reshape(-1, 2)
    dist, serving = cKDTree(bs).query(ue) if len(ue) else (np.zeros(0), np.zeros(0, int))
    radius = float(np.max(np.linalg.norm(np.vstack([bs, ue]), axis=1))) or 1.0
    return Deployment(
        bs_positions=bs,
        radius=radius,
        ue_ids=np.arange(len(ue)),
        ue_positions=ue,
        tracked=np.ones(len(ue), bool) if tracked is None else np.asarray(tracked, bool),
        pilots=np.asarray(pilots, dtype=np.int64),
        serving_bs=np.asarray(serving, dtype=np.intp),
        serving_dist=np.asarray(dist, dtype=float),
        alpha=alpha,
        n_ues_total=len(ue),
    )


def reposition(dep: Deployment, keep: np.ndarray, s_pilots: int, rng: np.random.Generator,
               tree: cKDTree | None = None) -> Deployment:
    """Next-round snapshot: survivors ``keep`` move and redraw pilots."""
    tree = cKDTree(dep.bs_positions) if tree is None else tree
    return _place(dep.bs_positions, tree, dep.radius, dep.alpha, dep.ue_ids[keep], dep.tracked[keep],
                  s_pilots, rng, dep.n_ues_total, dep.bs_redraws)


def sinr_at_bs(dep: Deployment, target: int, rng: np.random.Generator, g: float, cfg: ScenarioConfig,
               transmitting: np.ndarray | None = None, size: int | None = None):
    """SINR of UE ``target`` at its serving BS for one transmission, or for
    ``size`` independent fading draws.

    Interference comes from every transmitting UE on the same pilot, in the
    same cell or not. Fading is drawn fresh.
    """
    tx = np.ones(dep.n_active, bool) if transmitting is None else np.asarray(transmitting, bool)
    b = dep.serving_bs[target]
    others = np.flatnonzero(tx & (dep.pilots == dep.pilots[target]))
    others = others[others != target]
    mean_rx = dep.rx_power(g, cfg.rho, others, np.full(len(others), b))
    shape = () if size is None else (size,)
    signal = g * cfg.rho * rng.exponential(size=shape)
    interference = rng.exponential(size=shape + (len(others),)) @ mean_rx
    return signal / (interference + cfg.sigma2)


# ------------------------------------------------------------------ one HARQ round


def run_round_trip(dep: Deployment, scheme: Scheme, m: int, cfg: ScenarioConfig, rng: np.random.Generator,
                   collision: str = "window") -> np.ndarray:
    """Play round ``m`` for every active UE.

    Returns the repetition index at which each UE's access succeeded
    (1-based), or 0 if it did not succeed in this round. For Reactive and
    K-repetition a success is reported at the last repetition of the round.
    """
    if collision not in COLLISION_MODES:
        raise ValueError(f"collision must be one of {COLLISION_MODES}")
    reps = scheme.reps
    proactive = isinstance(scheme, Proactive)
    noise = cfg.sigma2 / (cfg.power_level(m) * cfg.rho)
    gamma = cfg.gamma_th
    result = np.zeros(dep.n_active, dtype=np.int64)
    if dep.n_active == 0:
        return result
    order = np.argsort(dep.pilots, kind="stable")
    bounds = np.flatnonzero(np.diff(dep.pilots[order])) + 1
    for idx in np.split(order, bounds):
        result[idx] = _round_one_pilot(dep, idx, reps, proactive, noise, gamma, rng, collision)
    return result


def _round_one_pilot(dep, idx, reps, proactive, noise, gamma, rng, collision):
    n = len(idx)
    serving = dep.serving_bs[idx]
    cells, cell_of = np.unique(serving, return_inverse=True)
    # normalized mean received power of UE j at cell c: (d_j / |x_j - b_c|)^alpha
    diff = dep.ue_positions[idx][None, :, :] - dep.bs_positions[cells][:, None, :]
    dist = np.sqrt(np.einsum("cjk,cjk->cj", diff, diff))
    gain = (dep.serving_dist[idx][None, :] / dist) ** dep.alpha
    gain[cell_of, np.arange(n)] = 1.0  # exact at the serving BS

    def decode(l, tx):
        rx = gain * rng.exponential(size=gain.shape) * tx[None, :]
        total = rx.sum(axis=1)
        own = rx[cell_of, np.arange(n)]
        sinr = own / (total[cell_of] - own + noise)
        return tx & (sinr >= gamma)

    return play_window(reps, cell_of, proactive, decode, collision)


def play_window(reps: int, cell_of: np.ndarray, proactive: bool, decode, collision: str = "window") -> np.ndarray:
    """Collision and early-termination bookkeeping for one pilot in one round.

    ``decode(l, tx)`` returns which UEs clear the SINR threshold at
    repetition ``l`` given the transmitting mask ``tx``. ``cell_of`` groups
    UEs by serving BS. Returns the success repetition per UE (0 = none).

    ``window``: a UE is blocked once any co-cell competitor has been decoded
    earlier in the round or in the same repetition. ``per_repetition``: only
    simultaneous decodes collide.
    """
    n = len(cell_of)
    n_cells = int(cell_of.max()) + 1 if n else 0
    tx = np.ones(n, bool)
    decoded = np.zeros(n, bool)  # decoded in any repetition so far this round
    success_at = np.zeros(n, dtype=np.int64)
    for l in range(1, reps + 1):
        dec = np.asarray(decode(l, tx), bool) & tx
        decoded |= dec
        hits = decoded if collision == "window" else dec
        unique = np.bincount(cell_of, weights=hits, minlength=n_cells)[cell_of] == 1
        winners = hits & unique & (success_at == 0)
        if proactive:
            success_at[winners] = l
            # ACK for repetition s is processed at s + 3; silent from s + 4
            tx = (success_at == 0) | (l + 1 < success_at + 4)
        elif collision == "per_repetition":
            success_at[winners] = reps
        elif l == reps:
            success_at[winners] = reps
    return success_at


# ------------------------------------------------------------------ trials


def rounds_within(scheme: Scheme, horizon: int) -> int:
    """Rounds in which a success can still land at or before ``horizon``."""
    if isinstance(scheme, Proactive):
        return max(0, (horizon - timing.latency_after(scheme, 1, 1)) // timing.rtt(scheme) + 1)
    return timing.max_rounds(scheme, horizon)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    ue_id: int
    outcome: str
    m: int
    l: int
    latency_ttis: int


@dataclass
class TrialResult:
    trial_id: int
    ue_id: np.ndarray
    m: np.ndarray  # 0 = still failing at the horizon
    l: np.ndarray
    latency: np.ndarray  # -1 when failing
    n_bs: int
    n_active: int
    bs_redraws: int

    def records(self) -> Iterator[TrialRecord]:
        for u, m, l, lat in zip(self.ue_id, self.m, self.l, self.latency):
            yield TrialRecord(self.trial_id, int(u), SUCCESS if m else FAILED, int(m), int(l), int(lat))


def run_trial(cfg: ScenarioConfig, scheme: Scheme, horizon: int, trial_id: int,
              collision: str = "window") -> TrialResult:
    rng = trial_rng(cfg.seed, trial_id)
    dep = deploy(cfg, rng)
    tree = cKDTree(dep.bs_positions)
    n_active = dep.n_active
    tracked_ids = np.flatnonzero(dep.tracked)
    m_of = np.zeros(n_active, dtype=np.int64)
    l_of = np.zeros(n_active, dtype=np.int64)
    for m in range(1, rounds_within(scheme, horizon) + 1):
        if m > 1:
            dep = reposition(dep, keep, cfg.s_pilots, rng, tree)
        if dep.n_active == 0:
            break
        won = run_round_trip(dep, scheme, m, cfg, rng, collision)
        hit = won > 0
        m_of[dep.ue_ids[hit]] = m
        l_of[dep.ue_ids[hit]] = won[hit] if isinstance(scheme, Proactive) else 0
        keep = ~hit
    latency = np.full(n_active, -1, dtype=np.int64)
    for i in np.flatnonzero(m_of):
        latency[i] = timing.latency_after(scheme, int(m_of[i]), int(l_of[i]))
    return TrialResult(trial_id, tracked_ids, m_of[tracked_ids], l_of[tracked_ids], latency[tracked_ids],
                       len(dep.bs_positions), n_active, dep.bs_redraws)


def run_trials(cfg: ScenarioConfig, scheme: Scheme, horizon: int, n_trials: int, threads: int = 1,
               collision: str = "window") -> list[TrialResult]:
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")

    def one(t):
        return run_trial(cfg, scheme, horizon, t, collision)

    if threads <= 1:
        return [one(t) for t in range(n_trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n_trials)))


def wilson_interval(k: np.ndarray, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion k / n."""
    p = k / n
    denom = 1.0 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    # the bounds are exactly 0 / 1 at k = 0 / k = n; rounding can miss them
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


def curve_from_trials(cfg: ScenarioConfig, scheme: Scheme, horizon: int, results: list[TrialResult],
                      collision: str = "window") -> FailureCurve:
    latency = np.concatenate([r.latency for r in results]) if results else np.zeros(0, np.int64)
    n = len(latency)
    t = np.arange(1, horizon + 1)
    if n == 0:
        raise ValueError("no tracked UEs in any trial; increase trials or area")
    lat = np.where(latency < 0, np.iinfo(np.int64).max, latency)
    served = np.searchsorted(np.sort(lat), t, side="right")  # latency <= T
    failures = n - served
    lo, hi = wilson_interval(failures, n)
    return FailureCurve(
        scheme=scheme,
        t_ttis=t,
        p_fail=failures / n,
        tti_ms=cfg.tti_ms,
        engine="simulated",
        metadata={
            "config": cfg.digest(),
            "trials": len(results),
            "collision": collision,
            "bs_redraws": sum(r.bs_redraws for r in results),
        },
        ci_low=lo,
        ci_high=hi,
        n_samples=n,
    )


def estimate_failure_curve(cfg: ScenarioConfig, scheme: Scheme, horizon_ttis: int, n_trials: int,
                           threads: int = 1, collision: str = "window") -> FailureCurve:
    """Empirical P_F(T) for T = 1..horizon over the tracked UEs of ``n_trials`` deployments."""
    if horizon_ttis < 1:
        raise ValueError(f"horizon must be >= 1 TTI, got {horizon_ttis}")
    results = run_trials(cfg, scheme, horizon_ttis, n_trials, threads, collision)
    curve = curve_from_trials(cfg, scheme, horizon_ttis, results, collision)
    log.info("simulated %s: %d trials, %d tracked UEs", curve.label, n_trials, curve.n_samples)
    return curve
