"""Exact chain for the backward-interference-cancellation (BIC) baseline.

Under BIC the SU never retransmits.  Signals whose SU packet becomes decodable
once the PU packet is known (regions 4 and 6) are kept only until the end of
the current ARQ window, so the state is the number ``n`` of such signals while
the PU packet is unknown, or ``"K"`` once SUrx has decoded it.
"""
from __future__ import annotations

from scipy import optimize

from ..channel import DecodingProfile
from ..mdp import evaluate_kernel, nabla_max
from ..policy import constants, optimal_policy

KNOWN_STATE = "K"


def _kernel(profile: DecodingProfile, n_max: int):
    pr = profile

    def kernel(s, a):
        rho = pr.rho1 if a else pr.rho0
        if s == KNOWN_STATE:
            return {0: 1.0 - rho, KNOWN_STATE: rho} if rho > 0 else {0: 1.0}
        p_dec = a * (pr.delta_p + pr.delta_sp) + (1 - a) * pr.d_p
        p_store = a * (pr.ups_s + pr.ups_sp)
        up = min(s + 1, n_max)
        row = {0: 1.0 - rho}
        for x, p in ((KNOWN_STATE, rho * p_dec), (up, rho * p_store),
                     (s, rho * (1.0 - p_dec - p_store))):
            row[x] = row.get(x, 0.0) + p
        return row

    def reward(s, a):
        if s == KNOWN_STATE:
            return pr.rate_s * a * pr.d_s
        p_dec = a * (pr.delta_p + pr.delta_sp) + (1 - a) * pr.d_p
        return pr.rate_s * (a * (pr.delta_s + pr.delta_sp) + s * p_dec)

    return kernel, reward


def bic_access(x: float, p_known: float):
    """Access probability as a function of the BIC state."""
    def mu(s):
        if s == KNOWN_STATE:
            return p_known
        return x if s == 0 else 1.0
    return mu


def evaluate_bic(x: float, p_known: float, profile: DecodingProfile, eps_trunc: float = 1e-12):
    """``(su_throughput, pu_degradation)`` of BIC with access ``x`` in state 0."""
    q = profile.rho1 * (profile.ups_s + profile.ups_sp)
    n_max = 8
    while True:
        states = list(range(n_max + 1)) + [KNOWN_STATE]
        kernel, reward = _kernel(profile, n_max)
        thr, acc, pi = evaluate_kernel(states, kernel, reward, bic_access(x, p_known))
        if pi[n_max] < eps_trunc * (1.0 - q) or q == 0.0 or n_max > 4096:
            break
        n_max *= 2
    return thr, nabla_max(profile) * acc


def bic_parameters(nabla_th: float, profile: DecodingProfile, xtol: float = 1e-12):
    """``(x, p_known)`` meeting the degradation budget with equality when possible."""
    c = constants(profile)
    if nabla_th >= c.nabla_max:
        return 1.0, 1.0
    if nabla_th <= c.nabla_ga:
        pol, _ = optimal_policy(nabla_th, profile)
        return 0.0, pol.known
    f = lambda x: evaluate_bic(x, 1.0, profile)[1] - nabla_th
    return optimize.brentq(f, 0.0, 1.0, xtol=xtol), 1.0


def bic_performance(nabla_th: float, profile: DecodingProfile):
    x, p_known = bic_parameters(nabla_th, profile)
    return evaluate_bic(x, p_known, profile)
