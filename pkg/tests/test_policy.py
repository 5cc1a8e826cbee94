import numpy as np
import pytest

from chaindecode.channel import DecodingProfile
from chaindecode.mdp import KNOWN, MUTUAL_KNOWN, AccessPolicy, CdState, evaluate_policy, pareto_oracle
from chaindecode.policy import (ModeMix, access_efficiency, always_tx_throughput, closed_form_performance,
                                constants, epsilon, genie_aided, optimal_policy, pareto_first_segment, regime)

import oracles


def profile_with(rho0, rho1, d_p=0.5, ups_s=0.1, ups_sp=0.1):
    # regions: delta_sp, delta_s, delta_p, ups_s, ups_p, ups_sp, ups_empty
    delta_sp = 0.2
    rest_p = d_p - delta_sp - ups_sp
    probs = [delta_sp, 0.15, rest_p / 2, ups_s, rest_p / 2, ups_sp, 0.0]
    probs[6] = 1 - sum(probs)
    return DecodingProfile.from_regions(probs, rho0, rho1, rate_s=2.0)


def grid(c, n=20):
    return np.linspace(c.nabla_max / n, c.nabla_max * 0.999, n)


def test_constants_examples():
    pr = profile_with(0.1, 0.4, d_p=0.5)
    c = constants(pr)
    assert c.nabla_max == pytest.approx(1 / 3)
    # K-> occupancy of the IC policy is 0.05/0.65; the degradation scales it by nabla_max
    assert c.nabla_ga / c.nabla_max == pytest.approx(0.05 / 0.65)
    assert c.nabla_ga == pytest.approx(0.05 / 0.65 / 3)
    assert constants(profile_with(0.1, 0.4, ups_s=0.0, ups_sp=0.0)).zeta == 0.0
    assert 0 <= c.nabla_ga <= c.nabla_max <= 1 and c.zeta >= 0
    assert c.ga_slope == pytest.approx(2.0 * pr.d_s)


def test_constants_reject_degenerate_profile():
    with pytest.raises(ValueError):
        constants(profile_with(0.1, 1.0))


def test_genie_aided_examples():
    assert genie_aided(0.0, 2, 0.8) == 0.0
    assert genie_aided(1.0, 2, 0.8) == pytest.approx(1.6)
    with pytest.raises(ValueError):
        genie_aided(1.5, 2, 0.8)


def test_genie_bound_dominates_oracle(random_profiles):
    for pr in random_profiles[:3]:
        c = constants(pr)
        for deg, thr, _ in pareto_oracle(pr, max_b=6):
            assert thr <= genie_aided(min(deg / c.nabla_max, 1.0), pr.rate_s, pr.d_s) + 1e-10


def test_optimal_policy_regimes(profile_d2):
    pr = profile_d2
    c = constants(pr)
    pol, mix = optimal_policy(1e-9, pr)
    assert mix.xi_idle == pytest.approx(1.0, abs=1e-7)
    assert pol.known == pytest.approx(0.0, abs=1e-6) and pol.p_buffered(0) == 0.0
    pol, mix = optimal_policy(c.nabla_ga, pr)
    assert regime(c.nabla_ga, c) == 1
    assert (mix.xi_idle, mix.xi_ic, mix.xi_always) == pytest.approx((0, 1, 0), abs=1e-12)
    assert pol == AccessPolicy.interference_cancellation()
    for nth in (c.nabla_max, 0.9):
        pol, mix = optimal_policy(nth, pr)
        assert pol == AccessPolicy.always() and mix == ModeMix(0, 0, 1)
    with pytest.raises(ValueError):
        optimal_policy(0.0, pr)
    with pytest.raises(ValueError):
        closed_form_performance(-0.1, pr)


def test_mode_mix_shape(profile_d2):
    c = constants(profile_d2)
    for nth in grid(c):
        _, mix = optimal_policy(nth, profile_d2)
        if nth <= c.nabla_ga:
            assert mix.xi_always == 0
        else:
            assert mix.xi_idle == 0
    with pytest.raises(ValueError):
        ModeMix(0.3, 0.3, 0.4)


def test_mode_mix_reproduces_time_share(profile_d2):
    """Per-window mode probabilities give the right long-run degradation."""
    pr = profile_d2
    c = constants(pr)
    ic = evaluate_policy(AccessPolicy.interference_cancellation(), pr)
    # mean window lengths under each mode, measured on the exact chain as 1 / P(ACK)
    def window(pol):
        dist = evaluate_policy(pol, pr).stationary
        p_ack = sum(p * (1 - pr.rho(pol(s))) for s, p in dist.items())
        return 1 / p_ack
    lengths = {"idle": window(AccessPolicy.idle()), "ic": window(AccessPolicy.interference_cancellation()),
               "always": window(AccessPolicy.always())}
    degs = {"idle": 0.0, "ic": ic.pu_degradation, "always": c.nabla_max}
    for nth in (0.05, 0.2, 0.4):
        _, mix = optimal_policy(nth, pr)
        w = {"idle": mix.xi_idle, "ic": mix.xi_ic, "always": mix.xi_always}
        time = {k: w[k] * lengths[k] for k in w}
        total = sum(time.values())
        assert sum(time[k] / total * degs[k] for k in w) == pytest.approx(nth, abs=1e-10)


def test_closed_form_regime_formulas(profile_d2):
    pr = profile_d2
    c = constants(pr)
    for nth in (0.01, 0.05, c.nabla_ga):
        thr, deg = closed_form_performance(nth, pr)
        assert thr == genie_aided(nth / c.nabla_max, pr.rate_s, pr.d_s) and deg == nth
    thr, deg = closed_form_performance(c.nabla_max, pr)
    expected = (genie_aided(1, pr.rate_s, pr.d_s)
                - (1 - pr.rho1) ** 2 * c.zeta * pr.rate_s / (1 - pr.rho1 * (1 - pr.d_p)))
    assert thr == pytest.approx(expected, rel=1e-14) and deg == c.nabla_max
    assert closed_form_performance(0.95, pr) == closed_form_performance(c.nabla_max, pr)


def test_closed_form_matches_exact_chain(random_profiles, profile_d2):
    for pr in [profile_d2, *random_profiles]:
        c = constants(pr)
        for nth in [*grid(c, 12), c.nabla_ga, c.nabla_max, 1.0]:
            pol, _ = optimal_policy(nth, pr)
            perf = evaluate_policy(pol, pr)
            thr, deg = closed_form_performance(nth, pr)
            assert perf.su_throughput == pytest.approx(thr, abs=1e-8)
            assert perf.pu_degradation == pytest.approx(deg, abs=1e-8)


def test_constraint_tightness(random_profiles):
    for pr in random_profiles:
        c = constants(pr)
        for nth in grid(c):
            pol, _ = optimal_policy(nth, pr)
            assert evaluate_policy(pol, pr).pu_degradation == pytest.approx(nth, abs=1e-8)


def test_continuity_at_regime_boundaries(random_profiles):
    for pr in random_profiles:
        c = constants(pr)
        for b in (c.nabla_ga, c.nabla_max):
            left = closed_form_performance(b * (1 - 1e-12), pr)[0]
            right = closed_form_performance(b * (1 + 1e-12), pr)[0]
            assert left == pytest.approx(right, abs=1e-10)


def test_throughput_monotone(random_profiles):
    for pr in random_profiles:
        c = constants(pr)
        thr = [closed_form_performance(x, pr)[0] for x in np.linspace(1e-4, 1.2 * c.nabla_max, 200)]
        assert np.all(np.diff(thr) >= -1e-14)


def test_always_tx_uniquely_maximises(random_profiles):
    from chaindecode.mdp import enumerate_deterministic
    for pr in random_profiles[:3]:
        pts = enumerate_deterministic(pr, 4)
        top = max(pts, key=lambda p: p.throughput)
        assert top.actions == (1,) * 7
        others = [p for p in pts if p.actions != top.actions]
        assert all(p.throughput < top.throughput - 1e-12 for p in others)
        assert top.degradation >= max(p.degradation for p in others) - 1e-15


def test_access_efficiency_structure(random_profiles, profile_d2):
    for pr in [profile_d2, *random_profiles]:
        c = constants(pr)
        etas = [access_efficiency(CdState.buffered(m), pr) for m in range(6)]
        slope = (pr.rate_s / c.nabla_max * (pr.rho1 - pr.rho0) * pr.d_p * (1 - pr.d_p)
                 / (1 - pr.rho1 * (1 - pr.d_p)))
        assert np.allclose(np.diff(etas), slope, rtol=1e-12, atol=1e-14)
        assert all(etas[0] < e for e in etas[1:])
        assert etas[0] < access_efficiency(MUTUAL_KNOWN, pr)
        assert etas[0] < access_efficiency(KNOWN, pr)


@pytest.mark.parametrize("state,key", [(CdState.buffered(0), 0), (CdState.buffered(2), 2),
                                       (MUTUAL_KNOWN, "M"), (KNOWN, "K")])
def test_access_efficiency_matches_high_precision_difference(profile_d2, state, key):
    assert access_efficiency(state, profile_d2) == pytest.approx(
        oracles.eta_finite_difference(profile_d2, key), abs=1e-7)


def test_pareto_first_segment(random_profiles):
    for pr in random_profiles[:5]:
        (d1, t1), (d2, t2) = pareto_first_segment(pr)
        env = pareto_oracle(pr, max_b=6)
        assert (d1, t1) == pytest.approx(env[0][:2], abs=1e-6)
        assert (d2, t2) == pytest.approx(env[1][:2], abs=1e-6)
        mid = (d1 + d2) / 2
        assert closed_form_performance(mid, pr)[0] == pytest.approx(t2 + (t1 - t2) / 2, abs=1e-10)
        assert (t1 - t2) / (d1 - d2) == pytest.approx(access_efficiency(CdState.buffered(0), pr), rel=1e-9)


def test_closed_form_beats_every_oracle_point(random_profiles):
    for pr in random_profiles[:5]:
        c = constants(pr)
        from chaindecode.mdp import enumerate_deterministic
        for p in enumerate_deterministic(pr, 6):
            if p.degradation <= 1e-14:
                assert p.throughput <= 1e-12
                continue
            assert p.throughput <= closed_form_performance(p.degradation, pr)[0] + 1e-6
        env = pareto_oracle(pr, 6)
        for nth in grid(c):
            feasible = [t for d, t, _ in env if d <= nth]
            assert closed_form_performance(nth, pr)[0] >= max(feasible, default=0) - 1e-6


def test_epsilon(profile_d2):
    c = constants(profile_d2)
    assert epsilon(0.1, profile_d2) == pytest.approx(0.1 / c.nabla_max)
    assert epsilon(5.0, profile_d2) == 1.0
    assert always_tx_throughput(profile_d2) < genie_aided(1, profile_d2.rate_s, profile_d2.d_s)
