"""``chaindecode`` command-line entry point."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..channel import compute_profile
from ..learner import LearnerConfig, StepSize
from ..policy import closed_form_performance, constants, optimal_policy, regime
from ..sim import Scenario, run_simulation, write_trace_csv
from .config import SCHEMES, ConfigError, build_config
from .geometry import Geometry, geometry_to_stats
from .suites import FIGURES, fmt, run_suite


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI-style config file")
    p.add_argument("--dsp-over-d0", dest="dsp_over_d0", help="SU/PU pair separation in units of d0")
    p.add_argument("--nabla-th", dest="nabla_th", help="PU throughput degradation budget")
    p.add_argument("--scheme", type=str.upper, choices=SCHEMES)
    p.add_argument("--bmax", help="SUrx buffer size in received signals, or 'inf'")
    p.add_argument("--tarq", help="PU ARQ deadline in slots, or 'inf'")
    p.add_argument("--horizon", help="slots per Monte Carlo run")
    p.add_argument("--seed", help="base seed (falls back to $CHAINDECODE_SEED)")
    p.add_argument("--seeds", help="number of Monte Carlo replicates")
    p.add_argument("--jobs", help="worker processes for sweeps")
    p.add_argument("--out", default=".", help="output directory for CSV files")
    p.add_argument("--learner", action="store_const", const=True, default=None,
                   help="adapt nu and R_s online instead of using the closed-form policy")
    p.add_argument("--beta0", help="step-size scale for the nu recursion")
    p.add_argument("--rate-beta0", dest="rate_beta0", help="step-size scale for the rate recursion")
    p.add_argument("--step", choices=("decay", "const"), help="beta0/(t+1) or constant steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaindecode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("profile", "print the decoding profile and regime constants"),
                            ("optimal", "print the optimal policy and its closed-form performance"),
                            ("simulate", "run one Monte Carlo scenario"),
                            ("trace", "dump a per-slot trace as CSV")):
        _common(sub.add_parser(name, help=help_text))
    p = sub.add_parser("suite", help="run a figure sweep and write its CSV")
    p.add_argument("figure", choices=FIGURES)
    _common(p)
    return parser


_KEYS = ("dsp_over_d0", "nabla_th", "scheme", "bmax", "tarq", "horizon", "seed", "seeds",
         "jobs", "learner", "beta0", "rate_beta0", "step")


def _config(args):
    return build_config(args.config, {k: getattr(args, k) for k in _KEYS})


def _learner(cfg):
    if not cfg.learner:
        return None
    decay = cfg.step == "decay"
    rate_step = None if cfg.rate_beta0 is None else StepSize(cfg.rate_beta0, decay)
    return LearnerConfig(step=StepSize(cfg.beta0, decay), rate_step=rate_step,
                         nu0=cfg.nu0, rate0=cfg.rate0)


def _print_pairs(pairs, out):
    for k, v in pairs:
        print(f"{k}: {fmt(v) if not isinstance(v, str) else v}", file=out)


def cmd_profile(cfg, out):
    stats = geometry_to_stats(Geometry(cfg.dsp_over_d0, cfg.pathloss_alpha, cfg.mean_snr_p))
    pr = compute_profile(stats)
    c = constants(pr)
    pairs = [(f, getattr(stats, f)) for f in
             ("mean_snr_s", "mean_snr_p", "mean_snr_sp", "mean_snr_ps", "rate_s", "rate_p")]
    pairs += [(name, getattr(pr, name)) for name in
              ("delta_sp", "delta_s", "delta_p", "ups_s", "ups_p", "ups_sp", "ups_empty",
               "rho0", "rho1", "d_s", "d_p")]
    pairs += [("nabla_max", c.nabla_max), ("nabla_ga", c.nabla_ga), ("zeta", c.zeta)]
    _print_pairs(pairs, out)
    return pr


def cmd_optimal(cfg, out):
    stats = geometry_to_stats(Geometry(cfg.dsp_over_d0, cfg.pathloss_alpha, cfg.mean_snr_p))
    pr = compute_profile(stats)
    pol, mix = optimal_policy(cfg.nabla_th, pr)
    thr, deg = closed_form_performance(cfg.nabla_th, pr)
    _print_pairs([("regime", str(regime(cfg.nabla_th, constants(pr)))),
                  ("mu_0", pol.p_buffered(0)), ("mu_b_positive", pol.p_buffered(1)),
                  ("mu_K_mutual", pol.mutual), ("mu_K_known", pol.known),
                  ("xi_idle", mix.xi_idle), ("xi_ic", mix.xi_ic), ("xi_always", mix.xi_always),
                  ("su_throughput", thr), ("pu_degradation", deg)], out)


def _scenario(cfg, trace_horizon=None):
    stats = geometry_to_stats(Geometry(cfg.dsp_over_d0, cfg.pathloss_alpha, cfg.mean_snr_p))
    return Scenario(stats, cfg.nabla_th, cfg.scheme, b_max=cfg.bmax, t_arq=cfg.tarq,
                    horizon=trace_horizon or cfg.horizon, seed=cfg.seed, learner=_learner(cfg))


def cmd_simulate(cfg, out):
    sc = _scenario(cfg)
    m, _ = run_simulation(sc)
    pairs = [("scheme", sc.scheme.value), ("slots", m.slots),
             ("su_throughput", m.su_throughput_actual), ("pu_throughput", m.pu_throughput),
             ("pu_degradation", m.pu_degradation), ("access_rate", m.access_rate)]
    pairs += sorted(m.counts.items())
    if m.learner_path is not None:
        pairs += [("final_nu", float(m.learner_path[-1, 0])), ("final_rate_s", float(m.learner_path[-1, 1]))]
    _print_pairs(pairs, out)


def cmd_trace(cfg, out_dir):
    sc = _scenario(cfg)
    _, records = run_simulation(sc, trace=True)
    path = Path(out_dir) / "trace.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_trace_csv(records, fh)
    return path


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
    except ConfigError as exc:
        parser.error(str(exc))
    out = sys.stdout
    try:
        if args.command == "profile":
            cmd_profile(cfg, out)
        elif args.command == "optimal":
            if not cfg.nabla_th > 0:
                parser.error("invalid value for 'nabla_th': the optimal policy needs a positive budget")
            cmd_optimal(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "trace":
            print(cmd_trace(cfg, args.out), file=out)
        else:
            path, _ = run_suite(args.figure, cfg, args.out)
            print(path, file=out)
    except ValueError as exc:
        print(f"chaindecode: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
