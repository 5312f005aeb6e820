"""Command-line front end.

    gfurllc analytic --scheme reactive --tmax 40
    gfurllc simulate --scheme proactive --kmax 8 --trials 40 --out sim.csv
    gfurllc compare  --scheme krep --k 4 --trials 40
    gfurllc sweep    --axis density_ratio --values 1e4,2e4,4e4 --schemes krep4,krep8 --decompose

Exit codes: 0 ok, 1 usage/config error, 2 numeric failure, 3 compare FAIL.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analytic, simulator, specfun
from .config import (
    FIELDS,
    ConfigError,
    KRepetition,
    Proactive,
    Reactive,
    ScenarioConfig,
    Scheme,
    apply_overrides,
    baseline,
    load_scenario,
    parse_scheme,
    scheme_label,
    to_mapping,
)
from .curve import FailureCurve

log = logging.getLogger("gfurllc")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_COMPARE_FAIL = 0, 1, 2, 3
TOL_FLOOR = 0.02
SWEEP_AXES = ("density_ratio", "gamma_th_db", "k", "t_ttis")

CURVE_COLUMNS = ("t_ttis", "t_ms", "p_fail")
SIM_COLUMNS = CURVE_COLUMNS + ("ci_low", "ci_high", "n_samples")
COMPARE_COLUMNS = ("t_ttis", "t_ms", "p_reference", "p_test", "ci_low", "ci_high", "gap", "tolerance",
                   "ci_covers", "within_tol")
SWEEP_COLUMNS = ("axis", "axis_value", "scheme", "k", "t_ttis", "engine", "quantity", "component", "value")
DUMP_COLUMNS = ("trial_id", "ue_id", "outcome", "m", "l", "latency_ttis")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(rows, columns, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])


# ------------------------------------------------------------------ comparisons


@dataclass
class CompareReport:
    rows: list[tuple]
    verdict: str
    max_gap: float
    failing_t: list[int]

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def compare_curves(reference: FailureCurve, test: FailureCurve, floor: float = TOL_FLOOR) -> CompareReport:
    """Pointwise |reference - test| against max(floor, 3 sigma), sigma from
    whichever curve carries sampling error (0 for analytic-only pairs)."""
    n = min(len(reference.t_ttis), len(test.t_ttis))
    sigma = np.zeros(n)
    lo = hi = None
    for c in (test, reference):
        if c.n_samples is not None:
            sigma = c.sigma()[:n]
            lo, hi = c.ci_low[:n], c.ci_high[:n]
            break
    gap = np.abs(reference.p_fail[:n] - test.p_fail[:n])
    tol = np.maximum(floor, 3.0 * sigma)
    ok = gap <= tol
    rows = []
    for i in range(n):
        covers = "" if lo is None else bool(lo[i] <= reference.p_fail[i] <= hi[i])
        rows.append((
            int(reference.t_ttis[i]), float(reference.t_ms[i]), reference.p_fail[i], test.p_fail[i],
            "" if lo is None else lo[i], "" if hi is None else hi[i], gap[i], tol[i], covers, bool(ok[i]),
        ))
    failing = [int(t) for t, good in zip(reference.t_ttis[:n], ok) if not good]
    return CompareReport(rows, "PASS" if not failing else "FAIL", float(gap.max()) if n else 0.0, failing)


# ------------------------------------------------------------------ commands


def curve_rows(curve: FailureCurve):
    for i, (t, t_ms, p) in enumerate(curve.points):
        if curve.n_samples is None:
            yield (t, t_ms, p)
        else:
            yield (t, t_ms, p, curve.ci_low[i], curve.ci_high[i], curve.n_samples)


def cmd_analytic(cfg: ScenarioConfig, scheme: Scheme, t_max: int) -> FailureCurve:
    return analytic.failure_curve(cfg, scheme, t_max)


def cmd_simulate(cfg: ScenarioConfig, scheme: Scheme, horizon: int, trials: int, threads: int = 1,
                 collision: str = "window", dump=None) -> FailureCurve:
    if trials < 1:
        raise UsageError(f"--trials must be >= 1, got {trials}")
    results = simulator.run_trials(cfg, scheme, horizon, trials, threads, collision)
    if dump is not None:
        w = csv.writer(dump, lineterminator="\n")
        w.writerow(DUMP_COLUMNS)
        for r in results:
            for rec in r.records():
                w.writerow([rec.trial_id, rec.ue_id, rec.outcome, rec.m, rec.l, rec.latency_ttis])
    return simulator.curve_from_trials(cfg, scheme, horizon, results, collision)


def cmd_compare(cfg: ScenarioConfig, scheme: Scheme, t_max: int, trials: int, threads: int = 1,
                collision: str = "window", sim_cfg: ScenarioConfig | None = None,
                vs_scheme: Scheme | None = None) -> CompareReport:
    """Analytic curve against the simulator (or against another scheme's
    analytic curve when ``vs_scheme`` is given)."""
    ref = analytic.failure_curve(cfg, scheme, t_max)
    if vs_scheme is not None:
        test = analytic.failure_curve(cfg, vs_scheme, t_max)
    else:
        test = cmd_simulate(sim_cfg or cfg, scheme, t_max, trials, threads, collision)
    return compare_curves(ref, test)


def _with_k(scheme: Scheme, k: int) -> Scheme:
    if isinstance(scheme, KRepetition):
        return KRepetition(k)
    if isinstance(scheme, Proactive):
        return Proactive(k)
    return scheme


def sweep_point(cfg: ScenarioConfig, axis: str, value: float, scheme: Scheme, t_ttis: int, engine: str,
                decompose: bool, trials: int) -> list[tuple]:
    if axis == "density_ratio":
        cfg = cfg.replace(lambda_d=value * cfg.lambda_b)
    elif axis == "gamma_th_db":
        cfg = cfg.replace(gamma_th_db=value)
    elif axis == "k":
        scheme = _with_k(scheme, int(value))
    elif axis == "t_ttis":
        t_ttis = int(value)
    k = scheme.reps
    label = scheme_label(scheme)
    head = (axis, value, label, k, t_ttis, engine)
    if decompose:
        if isinstance(scheme, Proactive):
            raise UsageError("--decompose applies to reactive/krep schemes")
        return [head + ("p_success", part if part != "both" else "total",
                        analytic.access_success_krep(1, k, cfg, 1.0, part))
                for part in analytic.PARTS]
    if engine == "analytic":
        p = analytic.failure_curve(cfg, scheme, t_ttis).at(t_ttis)
    else:
        p = simulator.estimate_failure_curve(cfg, scheme, t_ttis, trials).at(t_ttis)
    return [head + ("p_fail", "total", p)]


def cmd_sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], schemes: Sequence[Scheme],
              engine: str = "analytic", t_ttis: int = 8, decompose: bool = False, trials: int = 10,
              threads: int = 1) -> list[tuple]:
    if axis not in SWEEP_AXES:
        raise UsageError(f"--axis must be one of {SWEEP_AXES}")
    if not values:
        raise UsageError("sweep grid is empty")
    if not schemes:
        raise UsageError("no schemes given")
    if axis in ("k", "t_ttis") and any(v < 1 or int(v) != v for v in values):
        raise UsageError(f"{axis} values must be positive integers")
    if axis == "density_ratio" and any(v <= 0 for v in values):
        raise UsageError("density_ratio values must be > 0")
    if engine not in ("analytic", "simulated"):
        raise UsageError("--engine must be analytic or simulated")
    grid = [(v, s) for v in values for s in schemes]

    def run(point):
        v, s = point
        return sweep_point(cfg, axis, v, s, t_ttis, engine, decompose, trials)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, grid))
    else:
        chunks = [run(p) for p in grid]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r[1], r[2], r[3], r[7]))
    return rows


# ------------------------------------------------------------------ argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scheme_token(tok: str) -> Scheme:
    m = re.fullmatch(r"(reactive|reac|krep|proactive|proa)(\d*)", tok.strip().lower())
    if not m:
        raise UsageError(f"bad scheme token {tok!r} (use reactive, krep4, proactive8, ...)")
    return parse_scheme(m.group(1), int(m.group(2)) if m.group(2) else None)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", type=Path, help="scenario YAML file (default: built-in baseline)")
    g.add_argument("--seed", type=int, help="RNG seed (overrides the file)")
    g.add_argument("--out", type=Path, help="output CSV path (default: stdout)")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("-v", "--verbose", action="store_true")
    ov = common.add_argument_group("scenario overrides")
    for name in FIELDS:
        if name != "seed":
            ov.add_argument("--" + name.replace("_", "-"), dest="ov_" + name, metavar="V")

    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--scheme", default="reactive", choices=["reactive", "krep", "proactive"])
    scheme.add_argument("--k", type=int, default=4, help="repetitions for krep")
    scheme.add_argument("--kmax", type=int, default=8, help="maximum repetitions for proactive")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--trials", type=int, default=40, help="independent deployments")
    sim.add_argument("--collision", choices=simulator.COLLISION_MODES, default="window")

    p = _Parser(prog="gfurllc", description="Grant-free URLLC latent access failure probability")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analytic", parents=[common, scheme], help="closed-form failure curve")
    a.add_argument("--tmax", type=int, default=40)

    s = sub.add_parser("simulate", parents=[common, scheme, sim], help="Monte-Carlo failure curve")
    s.add_argument("--horizon", "--tmax", dest="horizon", type=int, default=40)
    s.add_argument("--dump", type=Path, help="write per-UE trial records here")

    c = sub.add_parser("compare", parents=[common, scheme, sim], help="analytic vs simulated")
    c.add_argument("--tmax", type=int, default=40)
    c.add_argument("--vs", dest="vs_scheme", help="compare against this scheme's analytic curve instead")
    c.add_argument("--perturb-gamma-db", type=float, default=0.0,
                   help="offset the SINR threshold in the simulator only (negative control)")

    w = sub.add_parser("sweep", parents=[common, sim], help="parameter sweep, long-format CSV")
    w.add_argument("--axis", required=True, choices=SWEEP_AXES)
    w.add_argument("--values", required=True, type=_float_list)
    w.add_argument("--schemes", default="reactive,krep2,krep4,krep8,proactive8")
    w.add_argument("--engine", choices=["analytic", "simulated"], default="analytic")
    w.add_argument("--t", dest="t_ttis", type=int, default=8, help="latency budget in TTIs")
    w.add_argument("--decompose", action="store_true",
                   help="first-round access success split into transmission and non-collision parts")
    w.set_defaults(trials=10)
    return p


def resolve_config(args) -> ScenarioConfig:
    cfg = load_scenario(args.config) if args.config else baseline()
    overrides = [f"{name}={getattr(args, 'ov_' + name)}" for name in FIELDS
                 if getattr(args, "ov_" + name, None) is not None]
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return apply_overrides(cfg, overrides)


def _scheme_from_args(args) -> Scheme:
    k = args.k if args.scheme == "krep" else args.kmax if args.scheme == "proactive" else None
    return parse_scheme(args.scheme, k)


def _sidecar(args, cfg: ScenarioConfig, extra: dict) -> None:
    doc = {"command": args.command, "config": to_mapping(cfg), "config_digest": cfg.digest(), **extra}
    text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    if args.out:
        Path(str(args.out) + ".json").write_text(text)
    else:
        sys.stderr.write(text)


def _emit(args, rows, columns) -> None:
    buf = io.StringIO()
    write_csv(rows, columns, buf)
    if args.out:
        args.out.write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "analytic":
            scheme = _scheme_from_args(args)
            curve = cmd_analytic(cfg, scheme, args.tmax)
            _emit(args, curve_rows(curve), CURVE_COLUMNS)
            _sidecar(args, cfg, {"scheme": curve.label, "tmax": args.tmax, "engine": "analytic",
                                 "truncation_order": curve.metadata["truncation_order"]})
        elif args.command == "simulate":
            scheme = _scheme_from_args(args)
            if args.dump:
                with open(args.dump, "w") as dump:
                    curve = cmd_simulate(cfg, scheme, args.horizon, args.trials, args.threads, args.collision, dump)
            else:
                curve = cmd_simulate(cfg, scheme, args.horizon, args.trials, args.threads, args.collision)
            _emit(args, curve_rows(curve), SIM_COLUMNS)
            _sidecar(args, cfg, {"scheme": curve.label, "horizon": args.horizon, "trials": args.trials,
                                 "collision": args.collision, "engine": "simulated",
                                 "n_samples": curve.n_samples})
        elif args.command == "compare":
            scheme = _scheme_from_args(args)
            vs = _scheme_token(args.vs_scheme) if args.vs_scheme else None
            sim_cfg = cfg.replace(gamma_th_db=cfg.gamma_th_db + args.perturb_gamma_db)
            report = cmd_compare(cfg, scheme, args.tmax, args.trials, args.threads, args.collision, sim_cfg, vs)
            _emit(args, report.rows, COMPARE_COLUMNS)
            summary = {"scheme": scheme_label(scheme), "vs": scheme_label(vs) if vs else "simulated",
                       "verdict": report.verdict, "max_gap": report.max_gap, "failing_t_ttis": report.failing_t,
                       "tolerance": f"max({TOL_FLOOR}, 3 sigma)", "perturb_gamma_db": args.perturb_gamma_db}
            _sidecar(args, cfg, summary)
            print(f"{report.verdict} max_gap={report.max_gap:.4g} failing_t={report.failing_t}", file=sys.stderr)
            return EXIT_OK if report.passed else EXIT_COMPARE_FAIL
        elif args.command == "sweep":
            schemes = [_scheme_token(t) for t in args.schemes.split(",") if t.strip()]
            rows = cmd_sweep(cfg, args.axis, args.values, schemes, args.engine, args.t_ttis, args.decompose,
                             args.trials, args.threads)
            _emit(args, rows, SWEEP_COLUMNS)
            _sidecar(args, cfg, {"axis": args.axis, "values": args.values, "schemes": args.schemes,
                                 "engine": args.engine, "t_ttis": args.t_ttis, "decompose": args.decompose})
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"gfurllc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, specfun.SeriesError) as exc:
        print(f"gfurllc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
