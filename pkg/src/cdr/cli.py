"""Command-line front end: ``cdr simulate|optimize|sweep|analyze``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (DispersiveModel, dispersive_phases, min_photon_estimate,
                       nonlinearity_ratio, separation_rate_bound)
from .config import SWEEP_AXES, ConfigError, RunConfig, auto_n_max, check_run_truncation, parse_config
from .evolve import PropagationError, final_readout, non_qndness, run_both_branches
from .hilbert import TruncationError
from .optimize import PARAM_NAMES, crossing_time, default_workers, sweep
from .quadrature import analytic_error, phi_scan, wigner

log = logging.getLogger("cdr")

TIMESERIES_COLUMNS = ("t_ns", "re_lam0", "im_lam0", "re_lam1", "im_lam1", "delta_lambda",
                      "phi_rad", "squeeze0", "squeeze1", "error")
DIST_COLUMNS = ("x", "P0", "P1")
WIGNER_COLUMNS = ("x", "p", "value")
EVAL_COLUMNS = ("axis", "value", "t_f_ns", "start", "delta_over_2pi_mhz", "sigma_q_ns", "t_q_ns",
                "error")
FRONTIER_COLUMNS = ("axis", "value", "n_bar", "t_f_ns", "best_error", "delta_over_2pi_mhz",
                    "sigma_q_ns", "t_q_ns", "evaluations", "converged", "failure")
ANALYSIS_COLUMNS = ("t_ns", "arg_lam0", "arg_lam1", "arg_lam0_approx", "arg_lam1_approx",
                    "arg_lam0_disp", "arg_lam1_disp", "delta_lambda", "delta_lambda_disp",
                    "error", "error_coherent")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return "" if v is None else str(v)


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_summary(path: Path, command: str, cfg: RunConfig, results: dict, started: float):
    summary = {
        "command": command,
        "version": __version__,
        "config": cfg.source,
        "wall_time_s": round(time.time() - started, 3),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "results": results,
        "parameters": {k: v for k, v in cfg.values.items()},
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _validity(cfg: RunConfig, tail: float) -> dict:
    p = cfg.params
    m = DispersiveModel.from_params(p)
    return {
        "dispersive_validity_ratio": m.validity_ratio(p.schedule.t_f),
        "nonlinearity_ratio": nonlinearity_ratio(p),
        "lambda_eff_approx_validity_n_bar": cfg.n_bar_integral,
        "truncation_tail": tail,
    }


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    tail = check_run_truncation(cfg)
    p = cfg.params
    series, f0, f1 = run_both_branches(p, cfg.det, log_every=cfg["log_every"],
                                       series_points=cfg["series_grid_points"],
                                       error_every=cfg["error_every"], method=cfg["method"])
    for f in (f0, f1):
        f.check()
    ro = final_readout(f0, f1, cfg.det, cfg["grid_points"])
    cols = series.columns()
    write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS,
              zip(*[cols[c] for c in TIMESERIES_COLUMNS]))
    write_csv(out / "dist_final.csv", DIST_COLUMNS, zip(ro.P0.x, ro.P0.values, ro.P1.values))
    if cfg["wigner"]:
        for k, f in enumerate((f0, f1)):
            lam = ro.lam0 if k == 0 else ro.lam1
            half = abs(lam) + 3.0
            xs = np.linspace(-half, half, cfg["wigner_points"])
            W = wigner(f.rho, xs, xs)
            X, P = np.meshgrid(xs, xs)
            write_csv(out / f"wigner_{k}.csv", WIGNER_COLUMNS, zip(X.ravel(), P.ravel(), W.ravel()))
    nq = non_qndness(p, [f0.joint, f1.joint])
    results = {
        "t_f_ns": p.schedule.t_f,
        "final_error": ro.error,
        "threshold_error": ro.threshold_error,
        "threshold": ro.threshold,
        "phi_rad": ro.phi,
        "delta_lambda": ro.delta_lambda,
        "lam0": ro.lam0, "lam1": ro.lam1,
        "squeeze0": ro.squeeze0, "squeeze1": ro.squeeze1,
        "non_qndness": nq,
        "n_bar_nominal": cfg.n_bar_nominal,
        "n_bar_integral": cfg.n_bar_integral,
        "coherent_error_at_same_separation": analytic_error(ro.delta_lambda, cfg.det.eta),
        "validity": _validity(cfg, tail),
    }
    if cfg["phi_scan"]:
        phi, err = phi_scan(f0.rho, f1.rho, cfg.det.eta)
        results["phi_scan"] = {"phi_rad": phi, "error": err}
    return results


def _axis_value(cfg: RunConfig, axis: str):
    if axis == "n_bar":
        return cfg.n_bar_nominal if cfg["n_bar"] is not None else cfg.n_bar_integral
    return cfg[axis]


def _run_sweep(cfg: RunConfig, axis: str, values, out: Path, workers: int) -> dict:
    jobs, cfgs = [], {}
    for value in values:
        c = auto_n_max(cfg.with_overrides(**{axis: value}))
        if c["n_max"] != cfg["n_max"]:
            log.info("%s = %s: raising n_max to %d for the truncation tail", axis, value, c["n_max"])
        cfgs[value] = c
        for t_f in c["t_f_ns"]:
            jobs.append((value, c.opt_spec(t_f)))
    rows = sweep(jobs, workers=workers)
    eval_rows, frontier_rows = [], []
    frontiers: dict = {}
    for r in rows:
        c = cfgs[r.value]
        if r.result is None:
            frontier_rows.append((axis, r.value, c.n_bar_integral, r.t_f, math.nan, math.nan,
                                  math.nan, math.nan, 0, False, r.failure))
            continue
        for x, e, k in r.result.log:
            eval_rows.append((axis, r.value, r.t_f, k, *x, e))
        frontier_rows.append((axis, r.value, c.n_bar_integral, r.t_f, r.result.best_error,
                              *r.result.best_x, len(r.result.log), r.result.converged, ""))
        frontiers.setdefault(str(r.value), []).append((r.t_f, r.result.best_error,
                                                       r.result.named()))
    write_csv(out / "evaluations.csv", EVAL_COLUMNS, eval_rows)
    write_csv(out / "frontier.csv", FRONTIER_COLUMNS, frontier_rows)
    results = {"axis": axis, "frontiers": {}}
    for value, pts in frontiers.items():
        pts.sort(key=lambda t: t[0])
        tf = [t for t, _, _ in pts]
        err = [e for _, e, _ in pts]
        results["frontiers"][value] = {
            "points": [{"t_f_ns": t, "best_error": e, **prm} for t, e, prm in pts],
            "t_f_at_1e-3": crossing_time(tf, err, 1e-3) if len(pts) > 1 else None,
            "t_f_at_1e-4": crossing_time(tf, err, 1e-4) if len(pts) > 1 else None,
        }
    results["failures"] = [r.failure for r in rows if r.failure]
    return results


def cmd_optimize(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    axis = cfg["sweep_axis"]
    return _run_sweep(cfg, axis, [_axis_value(cfg, axis)], out, workers)


def cmd_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    axis = cfg["sweep_axis"]
    values = cfg["sweep_values"] or [_axis_value(cfg, axis)]
    return _run_sweep(cfg, axis, values, out, workers)


def cmd_analyze(cfg: RunConfig, out: Path) -> dict:
    """Numeric amplitudes against the dispersive and large-amplitude formulas."""
    from .analytic import _integrate
    tail = check_run_truncation(cfg)
    p = cfg.params
    series, f0, f1 = run_both_branches(p, cfg.det, log_every=cfg["log_every"],
                                       series_points=cfg["series_grid_points"],
                                       error_every=cfg["error_every"], method=cfg["method"])
    model = DispersiveModel.from_params(p)
    lam_in = model.lam_in
    t_D = p.drive.center
    n_in = abs(lam_in) ** 2
    from .pulse import detuning

    def rate(branch):
        k = 4.0 * p.g ** 2 * (n_in + branch)
        return lambda s: p.g ** 2 / math.sqrt(float(detuning(s, p.qubit_pulse)) ** 2 + k)

    acc = [0.0, 0.0]
    prev = t_D
    rows = []
    for k, t in enumerate(series.t):
        if t > t_D:
            for b in (0, 1):
                acc[b] += _integrate(rate(b), prev, t, p.qubit_pulse)
            prev = t
        approx0 = lam_in * np.exp(-1j * acc[0])
        approx1 = lam_in * np.exp(1j * acc[1])
        disp = dispersive_phases(float(t), model)
        dl = series.delta_lambda[k]
        rows.append((t, np.angle(series.lam[0, k]), np.angle(series.lam[1, k]), np.angle(approx0),
                     np.angle(approx1), np.angle(disp.lam0), np.angle(disp.lam1), dl,
                     disp.delta_lambda, series.error[k], analytic_error(dl, cfg.det.eta)))
    write_csv(out / "analysis.csv", ANALYSIS_COLUMNS, rows)
    rb = separation_rate_bound(series.t, series.delta_lambda, p.g)
    ro = final_readout(f0, f1, cfg.det, cfg["grid_points"])
    return {
        "final_error": ro.error,
        "delta_lambda": ro.delta_lambda,
        "rate_bound": {"max_rate": rb.max_rate, "ratio_to_g": rb.ratio, "violated": rb.violated},
        "min_photon_estimate_1e-4": min_photon_estimate(1e-4, cfg.det.eta),
        "n_bar_nominal": cfg.n_bar_nominal,
        "n_bar_integral": cfg.n_bar_integral,
        "validity": _validity(cfg, tail),
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdr", description=__doc__)
    ap.add_argument("command", choices=("simulate", "optimize", "sweep", "analyze"))
    ap.add_argument("--config", required=True, help="TOML configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--dt", type=float, help="integration step in ps (overrides dt_ps)")
    ap.add_argument("--nmax", type=int, help="Fock truncation (overrides n_max)")
    ap.add_argument("--threads", type=int, help="worker processes (default: $CDR_THREADS or 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = parse_config(args.config)
        overrides = {}
        if args.dt is not None:
            overrides["dt_ps"] = args.dt
        if args.nmax is not None:
            overrides["n_max"] = args.nmax
        if overrides:
            cfg = cfg.with_overrides(**overrides)
            cfg.source = args.config
    except (ConfigError, OSError) as exc:
        print(f"cdr: configuration error: {exc}", file=sys.stderr)
        return 2
    workers = args.threads if args.threads else default_workers()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            results = cmd_simulate(cfg, out)
        elif args.command == "optimize":
            results = cmd_optimize(cfg, out, workers)
        elif args.command == "sweep":
            results = cmd_sweep(cfg, out, workers)
        else:
            results = cmd_analyze(cfg, out)
    except ConfigError as exc:
        print(f"cdr: configuration error: {exc}", file=sys.stderr)
        return 2
    except (PropagationError, TruncationError, ValueError, AssertionError, RuntimeError) as exc:
        print(f"cdr: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    write_summary(out / "summary.json", args.command, cfg, results, started)
    if args.command in ("optimize", "sweep") and results.get("failures"):
        print(f"cdr: {len(results['failures'])} sweep row(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
