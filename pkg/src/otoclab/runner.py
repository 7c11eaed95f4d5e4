"""Dispatch of configured experiments and parameter sweeps to the modules."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from sklearn.model_selection import ParameterGrid

from . import __version__
from .classical import ClassicalParams, classical_otoc, lyapunov_max
from .config import ExperimentConfig, serialize_config
from .core import FitDomainError, ParameterError, SimParams
from .fitting import (ExponentialGrowthRegressor, RegularDynamicsError,
                      RelaxationRegressor, ehrenfest_time, fit_lyapunov,
                      fit_power_law, fit_relaxation, growth_window,
                      relaxation_window)
from .husimi import (HUSIMI_NORMALIZATION, coherent_state, evolve_snapshots,
                     husimi_grid, product_state, purity, reduced_density)
from .io import sha256, write_csv, write_json
from .otoc import otoc_exact, otoc_stochastic
from .rmt import RmtParams, mu_kicked, mu_rmt, rmt_otoc

__all__ = ["run_experiment", "run_sweep", "ExperimentError", "REGULAR_LAMBDA",
           "point_seeds", "estimate_ehrenfest"]

log = logging.getLogger(__name__)

# below this classical exponent the map is treated as regular (t_EF ~ sqrt(N))
REGULAR_LAMBDA = 0.05


class ExperimentError(RuntimeError):
    """A module error raised while running a config; carries an exit code."""

    def __init__(self, msg, exit_code):
        super().__init__(msg)
        self.exit_code = exit_code


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _context(cfg):
    keys = ("N", "K1", "K2", "b") if cfg.mode != "rmt" else ("N", "epsilon", "ensemble")
    return f"mode={cfg.mode} " + " ".join(f"{k}={getattr(cfg, k)}" for k in keys)


def _header(cfg, *extra):
    # n_jobs is left out so data files do not depend on the worker count
    lines = [ln for ln in serialize_config(cfg).splitlines()
             if ln and not ln.startswith("n_jobs")]
    return ["config:"] + [f"  {ln}" for ln in lines] + list(extra)


def estimate_ehrenfest(cfg: ExperimentConfig):
    """``(lambda_cl, t_EF, regime)`` from a short classical run."""
    est = lyapunov_max(ClassicalParams(cfg.K1, cfg.K2, cfg.b), n_traj=20,
                       t_steps=2000, seed=cfg.seed)
    lam = est.lambda_max
    if lam < REGULAR_LAMBDA:
        return lam, math.sqrt(cfg.N), "regular"
    return lam, ehrenfest_time(cfg.N, lam), "chaotic"


def _fit_dict(fit, **extra):
    d = {"model": fit.model, "rate": fit.rate, "amplitude": fit.amplitude,
         "window": list(fit.window), "residual": fit.residual, "stderr": fit.stderr}
    d.update(extra)
    return d


def _run_otoc(cfg, out):
    params = SimParams(cfg.N, cfg.K1, cfg.K2, cfg.b, cfg.alpha, cfg.beta)
    estimator = cfg.resolved_estimator
    if estimator == "exact":
        series = otoc_exact(params, cfg.t_max)
    else:
        series = otoc_stochastic(params, cfg.t_max, n_probe=cfg.n_probe,
                                 seed=cfg.seed, n_jobs=cfg.n_jobs)
    lam, t_ef, regime = estimate_ehrenfest(cfg)
    c_inf = 0.25
    fits = {}
    # fits use normalized traces; the raw-trace option only rescales the CSV
    for name in cfg.fits:
        if name == "lyapunov":
            win = cfg.growth_window or growth_window(series, t_ef)
            fits["lyapunov"] = _fit_dict(fit_lyapunov(series, win))
        elif name == "power":
            for col in ("c_aa", "c_ab"):
                win = cfg.growth_window or growth_window(series, t_ef, column=col)
                fits[f"power_{col}"] = _fit_dict(fit_power_law(series, win, column=col))
        elif name == "relaxation":
            win = cfg.relaxation_window or relaxation_window(series, t_ef, c_inf)
            f = fit_relaxation(series, win, c_inf)
            fits["relaxation"] = {"mu": f.mu, "gamma": f.gamma, "c_inf": f.c_inf,
                                  "window": list(f.window), "residual": f.residual,
                                  "stderr": f.stderr,
                                  "mu_bessel": mu_kicked(cfg.b, cfg.N)}
    if cfg.normalization == "raw-trace":
        series = series.to_raw()
        c_inf *= params.dim
    cols = series.COLUMNS
    err = {c: series.stderr.get(c, np.zeros(len(series))) for c in cols}
    rows = [[int(t)] + [series.column(c)[i] for c in cols] + [err[c][i] for c in cols]
            for i, t in enumerate(series.times)]
    write_csv(out / "otoc.csv",
              ["t", *cols, *(f"stderr_{c}" for c in cols)], rows,
              meta=_header(cfg, f"estimator: {estimator}",
                           f"normalization: {series.normalization}",
                           "units: t in kicks; stderr is 0 for the exact estimator"))
    write_json(out / "fits.json", fits)
    derived = {"lambda_cl": lam, "t_ehrenfest": t_ef, "regime": regime,
               "c_inf": c_inf, "estimator": estimator}
    return ["otoc.csv", "fits.json"], derived


def _run_classical(cfg, out):
    c = ClassicalParams(cfg.K1, cfg.K2, cfg.b)
    lyap = lyapunov_max(c, n_traj=cfg.n_traj, t_steps=cfg.t_steps, seed=cfg.seed)
    co = classical_otoc(c, cfg.t_max, n_samples=cfg.n_samples, seed=cfg.seed)
    fits = {"lambda_max": lyap.lambda_max, "lambda_spread": lyap.spread,
            "two_lambda": 2.0 * lyap.lambda_max, "bracket_rate": lyap.bracket_rate}
    if "lyapunov" in cfg.fits:
        win = cfg.growth_window
        if win is None:
            nz = np.nonzero((co.times >= 1) & np.isfinite(co.log_mean))[0]
            if len(nz) == 0:
                raise FitDomainError("classical OTOC never grows")
            t_on = int(co.times[nz[0]])
            win = (t_on, min(t_on + 2, cfg.t_max))
        t = co.times
        mask = (t >= win[0]) & (t <= win[1]) & np.isfinite(co.log_mean)
        # fit on the log of the mean, which never overflows
        est = ExponentialGrowthRegressor().fit(t[mask], np.exp(co.log_mean[mask] - co.log_mean[mask][0]))
        fits["growth"] = {"model": "exponential", "rate": est.rate_,
                          "log_amplitude": math.log(est.amplitude_) + co.log_mean[mask][0],
                          "window": list(win), "residual": est.residual_,
                          "stderr": est.stderr_}
    rows = [[int(t), co.mean[i], co.stderr[i], co.log_mean[i], co.bare_mean[i],
             co.bare_log_mean[i]] for i, t in enumerate(co.times)]
    write_csv(out / "classical.csv",
              ["t", "mean", "stderr", "log_mean", "bare_mean", "bare_log_mean"], rows,
              meta=_header(cfg, "mean: hbar^2/4 {cos 2pi q1(t), cos 2pi q2(0)}^2 phase-space average",
                           "bare: (dq1(t)/dp2(0))^2"))
    write_json(out / "fits.json", fits)
    return ["classical.csv", "fits.json"], {"lambda_cl": lyap.lambda_max}


def _run_rmt(cfg, out):
    p = RmtParams(cfg.N, cfg.epsilon, cfg.ensemble, cfg.n_real, cfg.seed)
    res = rmt_otoc(p, cfg.t_max)
    c_inf = 0.25
    fits = {"mu_rmt": mu_rmt(cfg.epsilon)}
    if "relaxation" in cfg.fits:
        win = cfg.relaxation_window
        if win is None:
            gap = c_inf - res.c_ab
            ok = (res.times >= 1) & (gap > np.maximum(10 * res.stderr["c_ab"], 0.02 * c_inf))
            idx = np.nonzero(ok)[0]
            if len(idx) < 3:
                raise FitDomainError("RMT series saturates too early for a relaxation fit")
            win = (int(res.times[idx[0]]), int(res.times[idx[-1]]))
        est = RelaxationRegressor(c_inf=c_inf, window=win).fit(res.times, res.c_ab)
        fits["relaxation"] = {"mu": est.mu_, "gamma": est.gamma_, "window": list(win),
                              "residual": est.residual_, "stderr": est.stderr_}
    analytic = res.analytic if res.analytic is not None else np.full(len(res.times), np.nan)
    rows = [[int(t), res.c_ab[i], res.c2[i], res.c4[i], res.stderr["c_ab"][i],
             res.stderr["c2"][i], res.stderr["c4"][i], analytic[i]]
            for i, t in enumerate(res.times)]
    write_csv(out / "rmt.csv",
              ["t", "c_ab", "c2", "c4", "stderr_c_ab", "stderr_c2", "stderr_c4", "analytic"],
              rows, meta=_header(cfg, "normalization: trace-over-N2"))
    write_json(out / "fits.json", fits)
    return ["rmt.csv", "fits.json"], {"c_inf": c_inf}


def _run_husimi(cfg, out):
    params = SimParams(cfg.N, cfg.K1, cfg.K2, cfg.b, cfg.alpha, cfg.beta)
    q1, p1, q2, p2 = cfg.center
    psi0 = product_state(coherent_state(q1, p1, cfg.N, cfg.alpha),
                         coherent_state(q2, p2, cfg.N, cfg.alpha))
    snaps = evolve_snapshots(params, psi0, cfg.times)
    files, prow = [], []
    for t, psi in snaps.items():
        rho = reduced_density(psi, cfg.subsystem)
        grid = husimi_grid(rho, cfg.G, cfg.alpha)
        name = f"husimi_t{t:03d}.csv"
        write_csv(out / name, [f"p{j}" for j in range(cfg.G)], grid.values.tolist(),
                  meta=_header(cfg, f"t: {t}", f"subsystem: {cfg.subsystem}",
                               f"normalization: {HUSIMI_NORMALIZATION}",
                               "rows: q_i = i/G; columns: p_j = j/G"))
        files.append(name)
        prow.append([t, purity(rho)])
    write_csv(out / "purity.csv", ["t", "purity"], prow,
              meta=_header(cfg, f"subsystem: {cfg.subsystem}"))
    return files + ["purity.csv"], {"husimi_normalization": HUSIMI_NORMALIZATION}


_DISPATCH = {"otoc": _run_otoc, "classical": _run_classical,
             "rmt": _run_rmt, "husimi": _run_husimi}


def _exit_code(exc):
    if isinstance(exc, (FitDomainError, ArithmeticError, RegularDynamicsError)):
        return 3
    return 2


def _write_manifest(out, cfg, files, derived, started, extra=None):
    manifest = {
        "config": serialize_config(cfg),
        "version": __version__,
        "started": started,
        "finished": _now(),
        "derived": derived,
        "outputs": {f: sha256(out / f) for f in files},
    }
    manifest.update(extra or {})
    write_json(out / "manifest.json", manifest)
    return manifest


def run_experiment(cfg: ExperimentConfig, out) -> dict:
    """Run one config, write its outputs under ``out``; returns the manifest.

    Data files are deterministic; only the manifest carries timestamps.
    """
    if cfg.mode == "sweep":
        return run_sweep(cfg, out)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    try:
        files, derived = _DISPATCH[cfg.mode](cfg, out)
    except (ParameterError, FitDomainError, ArithmeticError) as exc:
        raise ExperimentError(f"{_context(cfg)}: {exc}", _exit_code(exc)) from exc
    return _write_manifest(out, cfg, files, derived, started)


def point_seeds(seed, n):
    """Per-point seeds from ``SeedSequence(seed).spawn(n)``."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _point_configs(cfg):
    grid = list(ParameterGrid({k: list(v) for k, v in cfg.grid}))
    if not grid:
        raise ExperimentError("empty sweep grid", 2)
    seeds = point_seeds(cfg.seed, len(grid))
    out = []
    for point, s in zip(grid, seeds):
        point = {k: (int(v) if k == "N" else float(v)) for k, v in point.items()}
        out.append((point, cfg.replace(mode=cfg.point_mode, grid=(), seed=s,
                                       n_jobs=1, **point)))
    return out


def _flatten(d, prefix=""):
    flat = {}
    for k, v in sorted(d.items()):
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            flat[key] = v
    return flat


def _run_point(args):
    cfg, path = args
    return run_experiment(cfg, path)


def run_sweep(cfg: ExperimentConfig, out) -> dict:
    """Run every grid point in its own directory and aggregate the fits.

    ``aggregate.csv`` has one row per point and a final ``mean`` row; the
    manifest records per-point seeds and the spread of each column.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    points = _point_configs(cfg)
    jobs = [(pc, out / f"point_{i:03d}") for i, (_, pc) in enumerate(points)]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            list(pool.map(_run_point, jobs))
    else:
        for job in jobs:
            _run_point(job)
    records = []
    for (point, _), (_, path) in zip(points, jobs):
        with open(path / "fits.json", encoding="utf-8") as fh:
            records.append((point, _flatten(json.load(fh))))
    axes = [k for k, _ in cfg.grid]
    metrics = sorted(set().union(*(r.keys() for _, r in records)))
    rows, table = [], []
    for i, (point, r) in enumerate(records):
        vals = [r.get(m, math.nan) for m in metrics]
        table.append(vals)
        rows.append([f"point_{i:03d}"] + [point[a] for a in axes] + vals)
    arr = np.array(table, dtype=float).reshape(len(records), len(metrics))
    with np.errstate(invalid="ignore"):
        mean = arr.mean(axis=0)
        spread = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(len(metrics))
    rows.append(["mean"] + ["nan"] * len(axes) + list(mean))
    write_csv(out / "aggregate.csv", ["point", *axes, *metrics], rows,
              meta=_header(cfg, "last row: mean over points"))
    extra = {"points": [{"dir": path.name, "seed": pc.seed, **point}
                        for (point, pc), (_, path) in zip(points, jobs)],
             "seed_schedule": "SeedSequence(seed).spawn(n_points)[i].generate_state(1)[0]"}
    derived = {"mean": dict(zip(metrics, mean)), "spread": dict(zip(metrics, spread))}
    return _write_manifest(out, cfg, ["aggregate.csv"], derived, started, extra)
