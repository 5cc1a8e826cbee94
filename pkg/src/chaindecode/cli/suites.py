"""Experiment sweeps behind the figure CSVs.

Every suite returns its rows and writes one CSV.  Monte Carlo points are
independent jobs; they may run in a process pool but rows are always assembled
in sweep order, so the output never depends on completion order.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..channel import LinkStats, compute_profile
from ..learner import LearnerConfig, StepSize, nu_star, rate_fixed_point
from ..policy import constants
from ..sim import Scenario, SimMetrics, analytic_throughput, delay_cdf, run_simulation
from .config import SCHEMES, RunConfig
from .geometry import Geometry, geometry_to_stats

SWEEP_COLUMNS = ("sweep_value", "scheme", "analytic_throughput", "mc_throughput", "mc_stderr",
                 "degradation", "degradation_stderr", "nabla_th", "nabla_ga", "nabla_max")
FIG7_COLUMNS = ("sweep_value", "t_arq", "scheme", "analytic_throughput", "mc_throughput",
                "mc_stderr", "degradation", "degradation_stderr", "fraction_of_unbounded")
FIG8_COLUMNS = ("sweep_value", "scheme", "normalized_delay", "cdf", "mean_period",
                "decoded", "discarded")
FIG9_COLUMNS = ("sweep_value", "d_sp", "nu", "rate_s", "nu_star", "rate_star")

FIGURES = ("fig5", "fig6", "fig7", "fig8", "fig9")


def fmt(value) -> str:
    """CSV cell: 12 significant digits, ``inf`` for unbounded, empty for missing."""
    if value is None:
        return "inf"
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return ""
    return "%.12g" % value


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])
    return path


def replicate_seeds(seed: int, n: int) -> list:
    """Deterministic 64-bit seeds for ``n`` replicates of one run."""
    return [int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0]) for k in range(n)]


def stats_for(cfg: RunConfig, d_sp: float) -> LinkStats:
    return geometry_to_stats(Geometry(d_sp, cfg.pathloss_alpha, cfg.mean_snr_p))


def _run_job(job):
    scenario, profile = job
    m, _ = run_simulation(scenario, profile=profile)
    return m.su_throughput_actual, m.pu_degradation


def _map(jobs, n_jobs):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_job, jobs))


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    se = v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else float("nan")
    return float(v.mean()), float(se)


def monte_carlo(points, cfg: RunConfig):
    """Run every ``(stats, profile, nabla_th, scheme, b_max, t_arq)`` point over the seeds.

    Returns ``(thr, thr_se, deg, deg_se)`` per point, in input order.
    """
    seeds = replicate_seeds(cfg.seed, cfg.seeds)
    jobs = []
    for stats, profile, nth, scheme, b_max, t_arq in points:
        for s in seeds:
            jobs.append((Scenario(stats, nth, scheme, b_max=b_max, t_arq=t_arq,
                                  horizon=cfg.horizon, seed=s), profile))
    results = _map(jobs, cfg.jobs)
    out = []
    k = len(seeds)
    for i in range(len(points)):
        chunk = results[i * k:(i + 1) * k]
        thr = _mean_se([r[0] for r in chunk])
        deg = _mean_se([r[1] for r in chunk])
        out.append(thr + deg)
    return out


def _sweep_rows(cases, cfg: RunConfig, schemes):
    """``cases`` is a list of ``(sweep_value, stats, profile, nabla_th)``."""
    points, meta = [], []
    for value, stats, profile, nth in cases:
        c = constants(profile)
        for scheme in schemes:
            points.append((stats, profile, nth, scheme, None, None))
            meta.append(dict(sweep_value=value, scheme=scheme, nabla_th=nth,
                             nabla_ga=c.nabla_ga, nabla_max=c.nabla_max,
                             analytic_throughput=analytic_throughput(scheme, nth, profile)))
    rows = []
    for m, (thr, thr_se, deg, deg_se) in zip(meta, monte_carlo(points, cfg)):
        rows.append(dict(m, mc_throughput=thr, mc_stderr=thr_se, degradation=deg,
                         degradation_stderr=deg_se))
    return rows


def fig_distance_sweep(cfg: RunConfig, schemes=SCHEMES):
    cases = []
    for d in cfg.distances:
        stats = stats_for(cfg, d)
        cases.append((d, stats, compute_profile(stats), cfg.nabla_th))
    return _sweep_rows(cases, cfg, schemes)


def fig_constraint_sweep(cfg: RunConfig, schemes=SCHEMES):
    stats = stats_for(cfg, cfg.fig6_dsp)
    profile = compute_profile(stats)
    cases = [(nth, stats, profile, nth) for nth in cfg.nabla_grid]
    return _sweep_rows(cases, cfg, schemes)


def fig_buffer_deadline(cfg: RunConfig, schemes=("OPCD", "BIC")):
    stats = stats_for(cfg, cfg.fig7_dsp)
    profile = compute_profile(stats)
    nth = cfg.nabla_th
    points, meta = [], []
    for t_arq in cfg.tarq_grid:
        for b_max in cfg.bmax_grid:
            for scheme in schemes:
                points.append((stats, profile, nth, scheme, b_max, t_arq))
                analytic = (analytic_throughput(scheme, nth, profile)
                            if b_max is None and t_arq is None else float("nan"))
                meta.append(dict(sweep_value=b_max, t_arq=t_arq, scheme=scheme,
                                 analytic_throughput=analytic))
    results = monte_carlo(points, cfg)
    unbounded = {}
    for m, r in zip(meta, results):
        if m["sweep_value"] is None:
            unbounded[(m["t_arq"], m["scheme"])] = r[0]
    rows = []
    for m, (thr, thr_se, deg, deg_se) in zip(meta, results):
        ref = unbounded.get((m["t_arq"], m["scheme"]))
        frac = thr / ref if ref else float("nan")
        rows.append(dict(m, mc_throughput=thr, mc_stderr=thr_se, degradation=deg,
                         degradation_stderr=deg_se, fraction_of_unbounded=frac))
    return rows


def mean_access_period(profile, nabla_th: float) -> float:
    """``1 / mu_avg`` with ``mu_avg = nabla_th / nabla_max`` (slots between SU transmissions)."""
    return constants(profile).nabla_max / nabla_th


def fig_delay_cdf(cfg: RunConfig, schemes=SCHEMES):
    stats = stats_for(cfg, cfg.fig8_dsp)
    profile = compute_profile(stats)
    nth = cfg.nabla_th
    period = mean_access_period(profile, nth)
    rows = []
    for scheme in schemes:
        delays, decoded, discarded = [], 0, 0
        for s in replicate_seeds(cfg.seed, cfg.seeds):
            m, _ = run_simulation(Scenario(stats, nth, scheme, b_max=cfg.bmax, t_arq=cfg.tarq,
                                           horizon=cfg.horizon, seed=s), profile=profile)
            delays.append(m.delay_samples)
            decoded += m.counts["decoded"]
            discarded += m.discarded_packets
        pooled = np.concatenate(delays)
        if pooled.size == 0:
            continue
        merged = SimMetrics(0.0, 0.0, 0.0, pooled, discarded, 0, {}, 0.0)
        for x, p in delay_cdf(merged, period):
            rows.append(dict(sweep_value=nth, scheme=scheme, normalized_delay=x, cdf=p,
                             mean_period=period, decoded=decoded, discarded=discarded))
    return rows


def tracking_distance(horizon: int):
    """``d_SP(t)``: 10 down to 0.5 at the midpoint, then back up to 10."""
    t = np.arange(horizon, dtype=float)
    half = horizon / 2.0
    return np.where(t < half, 10.0 - 9.5 * t / half, 0.5 + 9.5 * (t - half) / half)


def tracking_nu_star(cfg: RunConfig, d_values, pu_min: float, grid_points: int = 96):
    """Instantaneous optimum ``nu*(d)`` interpolated from an exact-chain grid."""
    grid = np.linspace(float(np.min(d_values)), float(np.max(d_values)), grid_points)
    nus = np.array([nu_star(compute_profile(stats_for(cfg, g)), pu_min) for g in grid])
    return np.interp(d_values, grid, nus)


def fig_tracking(cfg: RunConfig):
    horizon = cfg.tracking_horizon
    d = tracking_distance(horizon)
    base = stats_for(cfg, float(d[0]))
    profile = compute_profile(base)
    pu_min = base.rate_p * (1.0 - profile.rho0) * (1.0 - cfg.nabla_th)
    path = np.array([[s.mean_snr_s, s.mean_snr_p, s.mean_snr_sp, s.mean_snr_ps]
                     for s in (stats_for(cfg, float(x)) for x in d)])
    learner = LearnerConfig(step=StepSize(cfg.tracking_beta, decay=False),
                            nu0=cfg.nu0, rate0=cfg.rate0, pu_min_throughput=pu_min)
    m, _ = run_simulation(Scenario(base, cfg.nabla_th, "OPCD", horizon=horizon, seed=cfg.seed,
                                   learner=learner, snr_path=path), profile=profile)
    nu_opt = tracking_nu_star(cfg, d, pu_min)
    rate_opt = rate_fixed_point(base.mean_snr_s)
    return [dict(sweep_value=t, d_sp=float(d[t]), nu=float(m.learner_path[t, 0]),
                 rate_s=float(m.learner_path[t, 1]), nu_star=float(nu_opt[t]), rate_star=rate_opt)
            for t in range(horizon)]


SUITES = {
    "fig5": (fig_distance_sweep, SWEEP_COLUMNS),
    "fig6": (fig_constraint_sweep, SWEEP_COLUMNS),
    "fig7": (fig_buffer_deadline, FIG7_COLUMNS),
    "fig8": (fig_delay_cdf, FIG8_COLUMNS),
    "fig9": (fig_tracking, FIG9_COLUMNS),
}


def run_suite(name: str, cfg: RunConfig, out_dir):
    func, columns = SUITES[name]
    rows = func(cfg)
    return write_csv(Path(out_dir) / f"{name}.csv", columns, rows), rows
