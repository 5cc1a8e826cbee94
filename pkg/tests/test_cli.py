import csv
import math

import numpy as np
import pytest

from chaindecode.channel import capacity, compute_profile
from chaindecode.cli.config import SEED_ENV, ConfigError, RunConfig, build_config, read_config_file
from chaindecode.cli.geometry import Geometry, geometry_to_stats, optimal_rate
from chaindecode.cli.main import main
from chaindecode.cli.suites import (FIG7_COLUMNS, FIG8_COLUMNS, FIG9_COLUMNS, SWEEP_COLUMNS, fmt,
                                    mean_access_period, replicate_seeds, run_suite, tracking_distance,
                                    tracking_nu_star)

import oracles

GOLDEN_HEADERS = {
    "fig5": "sweep_value,scheme,analytic_throughput,mc_throughput,mc_stderr,degradation,"
            "degradation_stderr,nabla_th,nabla_ga,nabla_max",
    "fig6": "sweep_value,scheme,analytic_throughput,mc_throughput,mc_stderr,degradation,"
            "degradation_stderr,nabla_th,nabla_ga,nabla_max",
    "fig7": "sweep_value,t_arq,scheme,analytic_throughput,mc_throughput,mc_stderr,degradation,"
            "degradation_stderr,fraction_of_unbounded",
    "fig8": "sweep_value,scheme,normalized_delay,cdf,mean_period,decoded,discarded",
    "fig9": "sweep_value,d_sp,nu,rate_s,nu_star,rate_star",
}

SMALL = dict(horizon=400, seeds=2, distances=(1.0, 2.0), nabla_grid=(0.05, 0.3), bmax_grid=(1, None),
             tarq_grid=(4, None), tracking_horizon=200)


def small_config(**kw):
    return build_config(overrides={**SMALL, **kw}, environ={})


# ---------------------------------------------------------------------------
# geometry and rates


def test_geometry_examples():
    s = geometry_to_stats(Geometry(1.0))
    assert s.mean_snr_sp == pytest.approx(10.0) and s.mean_snr_ps == pytest.approx(10.0)
    for d in (0.5, 2.0, 7.0):
        s = geometry_to_stats(Geometry(d))
        assert s.mean_snr_s == pytest.approx(20.0) and s.mean_snr_p == pytest.approx(20.0)
    far = compute_profile(geometry_to_stats(Geometry(1e4)))
    assert far.rho1 - far.rho0 < 1e-6
    with pytest.raises(ValueError):
        Geometry(0.0)


def test_optimal_rate_examples():
    assert optimal_rate(math.log(2)) == pytest.approx(oracles.rate_bisection(math.log(2)), abs=1e-10)
    for g in (0.5, 3.0, 20.0, 200.0):
        r = optimal_rate(g)
        r_grid, obj_grid, step = oracles.rate_grid_scan(g)
        assert abs(r - r_grid) <= step
        obj = r * math.exp(-(2 ** r - 1) / g)
        assert obj >= obj_grid - 1e-12
        assert obj <= r and obj <= capacity(g)
    with pytest.raises(ValueError):
        optimal_rate(-1)


def test_optimal_rate_generic_fading_path():
    class Shifted:
        # same law as Rayleigh but routed through the numerical maximiser
        def sf(self, x, mean):
            return math.exp(-max(x, 0.0) / mean)

    assert optimal_rate(20.0, Shifted()) == pytest.approx(optimal_rate(20.0), abs=1e-6)


# ---------------------------------------------------------------------------
# config


def test_config_defaults():
    cfg = build_config(environ={})
    assert (cfg.mean_snr_p, cfg.pathloss_alpha, cfg.nabla_th, cfg.horizon, cfg.nu0, cfg.rate0) == \
        (20.0, 2.0, 0.1, 100_000, 0.0, 0.0)
    assert cfg.seeds == 10 and cfg.bmax is None and cfg.tarq is None


def test_config_precedence(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[scenario]\nseed = 5\nhorizon = 1234\nbmax = 4\n[suite]\ntarq_grid = 2, inf\n")
    cfg = build_config(path, environ={SEED_ENV: "9"})
    assert cfg.seed == 5 and cfg.horizon == 1234 and cfg.bmax == 4 and cfg.tarq_grid == (2, None)
    assert build_config(environ={SEED_ENV: "9"}).seed == 9
    assert build_config(path, {"seed": "11"}, environ={SEED_ENV: "9"}).seed == 11


@pytest.mark.parametrize("text,key", [
    ("[scenario]\nhorizn = 10\n", "horizn"),
    ("[scenario]\nhorizon = ten\n", "horizon"),
    ("[learner]\nstep = sometimes\n", "step"),
    ("[suite]\nseed = 3\n", "seed"),
])
def test_config_errors_name_the_key(tmp_path, text, key):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError, match=key):
        build_config(path, environ={})


def test_config_value_checks():
    with pytest.raises(ConfigError, match="scheme"):
        build_config(overrides={"scheme": "FOO"}, environ={})
    with pytest.raises(ConfigError, match="nu0"):
        build_config(overrides={"nu0": "3"}, environ={})
    with pytest.raises(ConfigError, match="seed"):
        build_config(environ={SEED_ENV: "abc"})
    with pytest.raises(ConfigError, match="cannot read"):
        read_config_file("/nonexistent/file.ini")


# ---------------------------------------------------------------------------
# suites


def test_fmt():
    assert fmt(None) == "inf" and fmt(float("nan")) == "" and fmt(3) == "3"
    assert fmt(1 / 3) == "0.333333333333" and fmt("OPCD") == "OPCD"


def test_replicate_seeds_deterministic():
    assert replicate_seeds(0, 3) == replicate_seeds(0, 3)
    assert len(set(replicate_seeds(0, 10))) == 10
    assert replicate_seeds(0, 3) != replicate_seeds(1, 3)


@pytest.mark.parametrize("name", sorted(GOLDEN_HEADERS))
def test_suite_csv_schema_and_reruns(tmp_path, name):
    cfg = small_config()
    p1, rows = run_suite(name, cfg, tmp_path / "a")
    p2, _ = run_suite(name, cfg, tmp_path / "b")
    text = p1.read_bytes()
    assert text == p2.read_bytes()
    assert text.decode("utf-8").splitlines()[0] == GOLDEN_HEADERS[name]
    with open(p1, newline="", encoding="utf-8") as fh:
        body = list(csv.reader(fh))[1:]
    assert len(body) == len(rows) > 0
    assert all(len(r) == len(body[0]) for r in body)


def test_parallel_jobs_give_identical_csv(tmp_path):
    p1, _ = run_suite("fig6", small_config(jobs=1), tmp_path / "serial")
    p2, _ = run_suite("fig6", small_config(jobs=2), tmp_path / "pool")
    assert p1.read_bytes() == p2.read_bytes()


def test_constraint_sweep_reports_reference_constants(tmp_path):
    _, rows = run_suite("fig6", small_config(), tmp_path)
    assert 0.07 <= rows[0]["nabla_ga"] <= 0.13
    assert 0.5 <= rows[0]["nabla_max"] <= 0.7


def test_distance_sweep_opcd_is_genie_aided_at_short_range():
    cfg = small_config(distances=(0.5, 1.0, 1.5, 2.0, 3.0))
    from chaindecode.cli.suites import fig_distance_sweep
    rows = fig_distance_sweep(cfg, schemes=("OPCD", "GENIE"))
    by = {(r["sweep_value"], r["scheme"]): r["analytic_throughput"] for r in rows}
    for d in (0.5, 1.0, 1.5):
        assert by[(d, "OPCD")] == pytest.approx(by[(d, "GENIE")], rel=1e-12)
    assert by[(2.0, "OPCD")] >= 0.95 * by[(2.0, "GENIE")]
    assert by[(3.0, "OPCD")] < by[(3.0, "GENIE")]


def test_mean_access_period_reference_value():
    pr = compute_profile(geometry_to_stats(Geometry(2.5)))
    assert 4.8 <= mean_access_period(pr, 0.1) <= 5.8


def test_tracking_helpers():
    d = tracking_distance(10_000)
    assert d[0] == 10.0 and d[5000] == pytest.approx(0.5) and d[-1] == pytest.approx(10.0, abs=2e-3)
    assert np.argmin(d) == 5000
    cfg = RunConfig()
    nu = tracking_nu_star(cfg, np.array([0.5, 10.0]), pu_min=1.0, grid_points=4)
    assert nu.shape == (2,) and np.all((nu >= 0) & (nu <= 2))


# ---------------------------------------------------------------------------
# command line


def test_cli_profile_and_optimal(capsys):
    assert main(["profile", "--dsp-over-d0", "2"]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(": ") for line in out.strip().splitlines())
    assert 0.07 <= float(fields["nabla_ga"]) <= 0.13
    assert main(["optimal", "--nabla-th", "0.3"]) == 0
    fields = dict(line.split(": ") for line in capsys.readouterr().out.strip().splitlines())
    assert fields["regime"] == "2" and float(fields["pu_degradation"]) == pytest.approx(0.3)


def test_cli_simulate_uses_env_seed(capsys, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "3")
    main(["simulate", "--horizon", "2000"])
    a = capsys.readouterr().out
    main(["simulate", "--horizon", "2000", "--seed", "3"])
    b = capsys.readouterr().out
    main(["simulate", "--horizon", "2000", "--seed", "4"])
    c = capsys.readouterr().out
    assert a == b != c
    assert "su_throughput" in a


def test_cli_learner_and_trace(tmp_path, capsys):
    assert main(["simulate", "--horizon", "1000", "--learner", "--beta0", "5", "--rate-beta0", "0.5"]) == 0
    assert "final_nu" in capsys.readouterr().out
    assert main(["trace", "--horizon", "50", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "t,a_s,su_label,outcome,y_p,y_s,decoded_now,cd_state,buffer_occupancy"
    assert len(lines) == 51


def test_cli_suite_writes_csv(tmp_path, capsys):
    rc = main(["suite", "fig6", "--horizon", "300", "--seeds", "2", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "fig6.csv").read_text().splitlines()[0] == GOLDEN_HEADERS["fig6"]


def test_cli_bad_config_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nhorizn = 10\n")
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--config", str(path)])
    assert exc.value.code == 2
    assert "horizn" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["optimal", "--nabla-th", "0"])
