"""Online adaptation of the access level and SU rate from ARQ feedback.

The optimal policy family is indexed by a single access level ``nu`` in
``[0, 2]``; it is driven by projected stochastic gradient steps that only use
the PU ACK/NACK of the current slot.  The SU rate follows the stationarity
condition of ``r * P(r < C(gamma_s))`` using the measured ``gamma_s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy import optimize

from .mdp import AccessPolicy

LN2 = math.log(2.0)


@dataclass(frozen=True)
class StepSize:
    """``beta0`` constant, or ``beta0 / (t + 1)`` when ``decay`` is set."""

    beta0: float = 0.5
    decay: bool = True

    def __call__(self, t: int) -> float:
        return self.beta0 / (t + 1) if self.decay else self.beta0


@dataclass(frozen=True)
class LearnerConfig:
    step: StepSize = StepSize()
    # separate schedule for the rate recursion; None shares ``step``
    rate_step: StepSize | None = None
    nu0: float = 0.0
    rate0: float = 0.0
    pu_min_throughput: float | None = None


@dataclass(frozen=True)
class LearnerState:
    nu: float = 0.0
    rate_s: float = 0.0
    step: StepSize = StepSize()
    rate_step: StepSize | None = None
    t: int = 0

    def __post_init__(self):
        if not 0.0 <= self.nu <= 2.0:
            raise ValueError("nu must lie in [0, 2]")
        if self.rate_s < 0:
            raise ValueError("rate_s must be nonnegative")

    @classmethod
    def from_config(cls, cfg: LearnerConfig) -> "LearnerState":
        return cls(nu=cfg.nu0, rate_s=cfg.rate0, step=cfg.step, rate_step=cfg.rate_step)


def policy_from_nu(nu: float) -> AccessPolicy:
    """Access policy at level ``nu``: IC-side randomisation below 1, state-0 above."""
    if not 0.0 <= nu <= 2.0:
        raise ValueError("nu must lie in [0, 2]")
    return AccessPolicy.three_state(max(nu - 1.0, 0.0), min(nu, 1.0))


def sgd_update(state: LearnerState, ack: bool, transmitted: bool, gamma_s_observed,
               rate_p: float, pu_min_throughput: float) -> LearnerState:
    """One projected SGD step on ``(nu, R_s)``."""
    if transmitted and gamma_s_observed is None:
        raise ValueError("a transmitting slot must report the measured gamma_s")
    beta = state.step(state.t)
    nu = state.nu + beta * (rate_p * (1.0 if ack else 0.0) - pu_min_throughput)
    nu = min(max(nu, 0.0), 2.0)
    rate = state.rate_s
    if transmitted:
        beta_r = beta if state.rate_step is None else state.rate_step(state.t)
        # 2^rate overflows past ~1024; beyond that the step drives the rate to 0 anyway
        pull = LN2 * rate * 2.0 ** min(rate, 1000.0)
        rate = max(rate + beta_r * (gamma_s_observed - pull), 0.0)
    return replace(state, nu=nu, rate_s=rate, t=state.t + 1)


def rate_fixed_point(mean_snr: float, xtol: float = 1e-10) -> float:
    """Root of ``ln2 * r * 2^r = mean_snr``: the throughput-optimal Rayleigh rate."""
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    f = lambda r: LN2 * r * 2.0 ** r - mean_snr
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=xtol, rtol=1e-15)


def pu_throughput(nu: float, profile) -> float:
    """Exact long-run PU throughput when the SU follows ``policy_from_nu(nu)``."""
    from .mdp import evaluate_policy

    pu_max = profile.rate_p * (1.0 - profile.rho0)
    return pu_max * (1.0 - evaluate_policy(policy_from_nu(nu), profile).pu_degradation)


def nu_star(profile, pu_min_throughput: float, tol: float = 1e-8) -> float:
    """Access level whose exact PU throughput equals ``pu_min_throughput``.

    PU throughput decreases in ``nu``, so plain bisection on ``[0, 2]`` applies.
    A target above the idle-SU throughput gives 0 and one below the
    always-transmit throughput gives 2.
    """
    pr = profile
    if pu_min_throughput >= pr.rate_p * (1.0 - pr.rho0):
        return 0.0
    if pu_min_throughput <= pr.rate_p * (1.0 - pr.rho1):
        return 2.0
    lo, hi = 0.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pu_throughput(mid, pr) > pu_min_throughput:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
