"""Closed-form optimal access policies and their performance.

The optimum randomises among three per-window modes: Idle, IC (transmit only
once the PU packet is known at SUrx) and Always-TX.  Below the IC degradation
the policy mixes Idle and IC by randomising in ``K->``; above it, IC and
Always-TX by randomising in state ``0``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .channel import DecodingProfile
from .mdp import KNOWN, MUTUAL_KNOWN, AccessPolicy, CdState, Phi


@dataclass(frozen=True)
class ProfileConstants:
    nabla_max: float
    nabla_ga: float
    zeta: float
    ga_slope: float


@dataclass(frozen=True)
class ModeMix:
    """Per-window selection probabilities of the Idle, IC and Always-TX modes."""

    xi_idle: float
    xi_ic: float
    xi_always: float

    def __post_init__(self):
        total = self.xi_idle + self.xi_ic + self.xi_always
        if min(self.xi_idle, self.xi_ic, self.xi_always) < -1e-12 or abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode probabilities must form a distribution: {self}")
        if sum(x > 0 for x in (self.xi_idle, self.xi_ic, self.xi_always)) > 2:
            raise ValueError("at most two modes may be mixed")


def _rate(profile, rate_s):
    return profile.rate_s if rate_s is None else rate_s


def constants(profile: DecodingProfile, rate_s: float | None = None) -> ProfileConstants:
    """``nabla_max``, ``nabla_ga``, ``zeta`` and the genie-aided slope ``R_s D_s``.

    ``nabla_ga`` is the degradation of the IC policy, i.e. its stationary
    ``K->`` occupancy ``rho0 D_p / (1 - rho1 + rho0 D_p)`` times ``nabla_max``.
    """
    pr = profile
    if pr.rho1 >= 1.0:
        raise ValueError("rho1 = 1 makes the chain degenerate")
    nmax = (pr.rho1 - pr.rho0) / (1.0 - pr.rho0)
    pi_known = pr.rho0 * pr.d_p / (1.0 - pr.rho1 + pr.rho0 * pr.d_p)
    zeta = (pr.ups_sp / (1.0 - pr.rho1 * (1.0 - pr.d_p + pr.ups_sp))
            + pr.ups_s / (1.0 - pr.rho1 * (1.0 - pr.d_p)))
    return ProfileConstants(nabla_max=nmax, nabla_ga=nmax * pi_known, zeta=zeta,
                            ga_slope=_rate(pr, rate_s) * pr.d_s)


def genie_aided(epsilon: float, rate_s: float, d_s: float) -> float:
    """SU throughput with non-causal PU packet knowledge at access rate ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    return epsilon * rate_s * d_s


def regime(nabla_th: float, c: ProfileConstants) -> int:
    """1: Idle/IC mix, 2: IC/Always-TX mix, 3: unconstrained Always-TX."""
    if nabla_th <= c.nabla_ga:
        return 1
    if nabla_th < c.nabla_max:
        return 2
    return 3


def _window_lengths(pr: DecodingProfile):
    """Mean ARQ-window length under the Idle, IC and Always-TX modes."""
    idle = 1.0 / (1.0 - pr.rho0)
    ic = (1.0 + pr.rho0 * pr.d_p / (1.0 - pr.rho1)) / (1.0 - pr.rho0 * (1.0 - pr.d_p))
    always = 1.0 / (1.0 - pr.rho1)
    return idle, ic, always


def _mix_from_time_share(lam: float, len_a: float, len_b: float):
    """Per-window probability of mode b that yields a time fraction ``lam`` in b."""
    if lam <= 0.0:
        return 0.0
    if lam >= 1.0:
        return 1.0
    return lam * len_a / (lam * len_a + (1.0 - lam) * len_b)


def optimal_policy(nabla_th: float, profile: DecodingProfile, rate_s: float | None = None):
    """Optimal stationary policy and its equivalent mode mix for ``nabla_th``."""
    if not nabla_th > 0:
        raise ValueError("nabla_th must be positive (the idle policy is the trivial answer)")
    pr = profile
    c = constants(pr, rate_s)
    l_idle, l_ic, l_always = _window_lengths(pr)
    reg = regime(nabla_th, c)
    if reg == 1:
        one_minus = 1.0 - pr.rho0 * (1.0 - pr.d_p)
        p_known = (one_minus * nabla_th
                   / (one_minus * c.nabla_ga + (pr.rho1 - pr.rho0) * (nabla_th - c.nabla_ga)))
        p_known = min(p_known, 1.0)
        xi_ic = _mix_from_time_share(nabla_th / c.nabla_ga, l_idle, l_ic)
        return AccessPolicy.three_state(0.0, p_known), ModeMix(1.0 - xi_ic, xi_ic, 0.0)
    if reg == 2:
        growth = ((pr.rho1 - pr.rho0) * pr.d_p + pr.rho1 * pr.ups_s) / (1.0 - pr.rho1 + pr.rho0 * pr.d_p)
        p_zero = ((nabla_th - c.nabla_ga)
                  / (c.nabla_max - c.nabla_ga + (c.nabla_max - nabla_th) * growth))
        lam = (nabla_th - c.nabla_ga) / (c.nabla_max - c.nabla_ga)
        xi_always = _mix_from_time_share(lam, l_ic, l_always)
        return AccessPolicy.three_state(p_zero, 1.0), ModeMix(0.0, 1.0 - xi_always, xi_always)
    return AccessPolicy.always(), ModeMix(0.0, 0.0, 1.0)


def always_tx_throughput(profile: DecodingProfile, rate_s: float | None = None) -> float:
    pr = profile
    rs = _rate(pr, rate_s)
    c = constants(pr, rs)
    return genie_aided(1.0, rs, pr.d_s) - (1.0 - pr.rho1) ** 2 / (1.0 - pr.rho1 * (1.0 - pr.d_p)) * c.zeta * rs


def closed_form_performance(nabla_th: float, profile: DecodingProfile, rate_s: float | None = None):
    """``(su_throughput, pu_degradation)`` of the optimal policy."""
    if not nabla_th > 0:
        raise ValueError("nabla_th must be positive")
    pr = profile
    rs = _rate(pr, rate_s)
    c = constants(pr, rs)
    reg = regime(nabla_th, c)
    if reg == 1:
        return genie_aided(nabla_th / c.nabla_max, rs, pr.d_s), nabla_th
    if reg == 2:
        loss = (pr.rho0 * pr.d_p * (1.0 - pr.rho1) * c.zeta * rs / (1.0 - pr.rho1 * (1.0 - pr.d_p))
                * (nabla_th - c.nabla_ga) / c.nabla_ga)
        return genie_aided(nabla_th / c.nabla_max, rs, pr.d_s) - loss, nabla_th
    return always_tx_throughput(pr, rs), c.nabla_max


def access_efficiency(state: CdState, profile: DecodingProfile, rate_s: float | None = None) -> float:
    """Throughput lost per unit of degradation saved by idling in ``state`` under Always-TX."""
    pr = profile
    rs = _rate(pr, rate_s)
    c = constants(pr, rs)
    den = 1.0 - pr.rho1 * (1.0 - pr.d_p)
    scale = rs / c.nabla_max
    eta0 = scale * (pr.d_s - c.zeta * (1.0 - pr.rho1) * (1.0 - pr.rho1 + pr.rho0 * pr.d_p) / den)
    if state.phi == Phi.UNKNOWN:
        return eta0 + scale * state.b * (pr.rho1 - pr.rho0) * pr.d_p * (1.0 - pr.d_p) / den
    one_minus0 = 1.0 - pr.rho0 * (1.0 - pr.d_p)
    if state.phi == Phi.MUTUAL:
        return eta0 + scale * ((pr.rho1 - pr.rho0) * (1.0 - pr.d_p) * pr.d_p / den
                               + one_minus0 * (1.0 - pr.rho1) * pr.ups_s / den ** 2)
    return eta0 + scale * (1.0 - pr.rho1) * one_minus0 / den * c.zeta


def ic_throughput(profile: DecodingProfile, rate_s: float | None = None) -> float:
    c = constants(profile, rate_s)
    return genie_aided(c.nabla_ga / c.nabla_max, _rate(profile, rate_s), profile.d_s)


def pareto_first_segment(profile: DecodingProfile, rate_s: float | None = None):
    """Endpoints ``((nabla_max, T_always), (nabla_ga, T_ic))`` of the first Pareto segment."""
    c = constants(profile, rate_s)
    return ((c.nabla_max, always_tx_throughput(profile, rate_s)),
            (c.nabla_ga, ic_throughput(profile, rate_s)))


def epsilon(nabla_th: float, profile: DecodingProfile) -> float:
    """Access rate ``min(nabla_th / nabla_max, 1)`` shared by the state-blind schemes."""
    return min(nabla_th / constants(profile).nabla_max, 1.0)


__all__ = [
    "ProfileConstants", "ModeMix", "constants", "genie_aided", "regime", "optimal_policy",
    "closed_form_performance", "access_efficiency", "pareto_first_segment",
    "always_tx_throughput", "ic_throughput", "epsilon", "KNOWN", "MUTUAL_KNOWN",
]
