"""Countable-state MDP of the chain-decoding protocol and exact policy evaluation.

States are ``(U, b)`` -- the current PU packet is not (virtually) decodable
and ``b`` SU packets of the current ARQ window hang on it -- plus the two
"known" states ``K<->`` (PU packet and CD root mutually decodable) and ``K->``
(PU packet known or reachable from the root).  Stationary policies are
evaluated exactly on a truncated chain: the ``b`` coordinate grows by at most
one per slot with probability ``rho1 * ups_s``, so the tail is geometric.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import DecodingProfile


class Phi(enum.IntEnum):
    UNKNOWN = 0
    MUTUAL = 1
    KNOWN = 2


@dataclass(frozen=True, order=True)
class CdState:
    """State ``(Phi, b)``; ``b`` is zero whenever the PU packet is known."""

    phi: Phi
    b: int = 0

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if self.phi != Phi.UNKNOWN and self.b != 0:
            raise ValueError("b must be 0 in the known states")

    @classmethod
    def buffered(cls, b: int) -> "CdState":
        return cls(Phi.UNKNOWN, int(b))

    @property
    def is_buffered(self) -> bool:
        return self.phi == Phi.UNKNOWN

    def __str__(self):
        if self.phi == Phi.UNKNOWN:
            return str(self.b)
        return "K<->" if self.phi == Phi.MUTUAL else "K->"


MUTUAL_KNOWN = CdState(Phi.MUTUAL)
KNOWN = CdState(Phi.KNOWN)


def state_code(state: CdState) -> int:
    """Compact integer code used by the simulator: b >= 0, -1 for K<->, -2 for K->."""
    if state.phi == Phi.UNKNOWN:
        return state.b
    return -1 if state.phi == Phi.MUTUAL else -2


def state_from_code(code: int) -> CdState:
    if code >= 0:
        return CdState.buffered(code)
    return MUTUAL_KNOWN if code == -1 else KNOWN


@dataclass(frozen=True)
class AccessPolicy:
    """Stationary access probabilities.

    ``buffered[b]`` is the transmit probability in state ``(U, b)``; the last
    entry continues for every larger ``b``.
    """

    buffered: tuple = (1.0,)
    mutual: float = 1.0
    known: float = 1.0

    def __post_init__(self):
        buf = [float(x) for x in self.buffered]
        if not buf:
            raise ValueError("buffered must hold at least one value")
        # repeated trailing values say nothing beyond the tail rule; drop them
        while len(buf) > 1 and buf[-1] == buf[-2]:
            buf.pop()
        object.__setattr__(self, "buffered", tuple(buf))
        for v in (*self.buffered, self.mutual, self.known):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"access probabilities must lie in [0, 1], got {v}")

    def p_buffered(self, b: int) -> float:
        return self.buffered[min(b, len(self.buffered) - 1)]

    def __call__(self, state: CdState) -> float:
        if state.phi == Phi.UNKNOWN:
            return self.p_buffered(state.b)
        return self.mutual if state.phi == Phi.MUTUAL else self.known

    @classmethod
    def constant(cls, p: float) -> "AccessPolicy":
        return cls((p,), p, p)

    @classmethod
    def idle(cls) -> "AccessPolicy":
        return cls.constant(0.0)

    @classmethod
    def always(cls) -> "AccessPolicy":
        return cls.constant(1.0)

    @classmethod
    def three_state(cls, p_zero: float, p_known: float, p_rest: float = 1.0) -> "AccessPolicy":
        """The closed-form family: randomised at ``b = 0`` and ``K->`` only."""
        return cls((p_zero, p_rest), p_rest, p_known)

    @classmethod
    def interference_cancellation(cls) -> "AccessPolicy":
        return cls.three_state(0.0, 1.0)


@dataclass
class PolicyPerformance:
    su_throughput: float
    pu_degradation: float
    stationary: dict = field(repr=False)
    truncation_tail: float = 0.0


class NonErgodicChainError(RuntimeError):
    pass


def transition(state: CdState, a: int, profile: DecodingProfile) -> dict:
    """Next-state distribution ``P(. | state, a)`` as a sparse dict."""
    if a not in (0, 1):
        raise ValueError("action must be 0 or 1")
    pr = profile
    rho_a = pr.rho1 if a else pr.rho0
    row: dict = {}

    def add(x, p):
        if p != 0.0:
            row[x] = row.get(x, 0.0) + p

    zero = CdState.buffered(0)
    if state.phi == Phi.UNKNOWN:
        b = state.b
        if b == 0:
            add(zero, 1.0 - rho_a * (pr.d_p + a * pr.ups_s))
        else:
            add(zero, 1.0 - rho_a)
            add(state, rho_a * (1.0 - pr.d_p - a * pr.ups_s))
        add(CdState.buffered(b + 1), pr.rho1 * a * pr.ups_s)
        add(MUTUAL_KNOWN, pr.rho1 * a * pr.ups_sp)
        add(KNOWN, rho_a * (pr.d_p - a * pr.ups_sp))
    elif state.phi == Phi.MUTUAL:
        add(zero, 1.0 - rho_a)
        add(MUTUAL_KNOWN, rho_a * (1.0 - pr.d_p + a * pr.ups_sp))
        add(KNOWN, rho_a * (pr.d_p - a * pr.ups_sp))
    else:
        add(zero, 1.0 - rho_a)
        add(KNOWN, rho_a)
    return row


def virtual_reward(state: CdState, a: int, profile: DecodingProfile) -> float:
    """Expected virtual throughput accrued in one slot (bits/s/Hz)."""
    pr = profile
    if state.phi == Phi.UNKNOWN:
        return pr.rate_s * (a * (pr.delta_sp + pr.delta_s) + pr.d_p * state.b)
    if state.phi == Phi.MUTUAL:
        return pr.rate_s * (a * (pr.d_s - pr.ups_sp) + pr.d_p)
    return a * pr.rate_s * pr.d_s


def nabla_max(profile: DecodingProfile) -> float:
    return (profile.rho1 - profile.rho0) / (1.0 - profile.rho0)


def solve_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary row vector of a finite stochastic matrix (direct solve)."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NonErgodicChainError("balance equations are singular") from exc
    # one round of iterative refinement keeps the residual near machine precision
    pi += np.linalg.solve(A, rhs - A @ pi)
    if np.any(pi < -1e-9):
        raise NonErgodicChainError("negative stationary mass; chain is not ergodic")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _truncated_chain(policy: AccessPolicy, profile: DecodingProfile, B: int):
    """Transition matrix, per-slot reward and access vectors on {0..B, K<->, K->}."""
    states = [CdState.buffered(b) for b in range(B + 1)] + [MUTUAL_KNOWN, KNOWN]
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    reward = np.zeros(n)
    access = np.zeros(n)
    for i, s in enumerate(states):
        mu = policy(s)
        access[i] = mu
        for a, w in ((0, 1.0 - mu), (1, mu)):
            if w == 0.0:
                continue
            reward[i] += w * virtual_reward(s, a, profile)
            for x, p in transition(s, a, profile).items():
                # mass leaving the truncated range is lumped onto state B
                j = index.get(x, B)
                P[i, j] += w * p
    return states, P, reward, access


def stationary_distribution(policy: AccessPolicy, profile: DecodingProfile,
                            eps_trunc: float = 1e-12, _return_chain=False):
    """Stationary distribution of the chain induced by ``policy``.

    The buffered range ``0..B`` grows until the mass at ``B`` falls below
    ``eps_trunc * (1 - q)`` with ``q = rho1 * ups_s``.
    """
    if not eps_trunc > 0:
        raise ValueError("eps_trunc must be positive")
    q = profile.rho1 * profile.ups_s
    B = max(8, len(policy.buffered) + 2)
    while True:
        states, P, reward, access = _truncated_chain(policy, profile, B)
        pi = solve_stationary(P)
        if pi[B] < eps_trunc * (1.0 - q) or q == 0.0:
            break
        if B > 20000:
            raise NonErgodicChainError(f"truncation did not converge (mass at B={B}: {pi[B]:.3g})")
        B *= 2
    resid = np.max(np.abs(pi @ P - pi))
    if resid > 1e-10:
        raise NonErgodicChainError(f"balance residual {resid:.3g}")
    dist = {s: float(p) for s, p in zip(states, pi)}
    if _return_chain:
        return dist, (states, P, reward, access, pi)
    return dist


def evaluate_policy(policy: AccessPolicy, profile: DecodingProfile,
                    eps_trunc: float = 1e-12) -> PolicyPerformance:
    """Long-run SU virtual throughput and PU degradation of a stationary policy."""
    dist, (states, P, reward, access, pi) = stationary_distribution(
        policy, profile, eps_trunc, _return_chain=True)
    B = len(states) - 3
    q = profile.rho1 * profile.ups_s
    tail = float(pi[B] * q / (1.0 - q)) if q < 1.0 else float(pi[B])
    return PolicyPerformance(
        su_throughput=float(pi @ reward),
        pu_degradation=float(nabla_max(profile) * (pi @ access)),
        stationary=dist,
        truncation_tail=tail,
    )


def evaluate_kernel(states: list, kernel: Callable, reward: Callable, policy: Callable):
    """Exact average reward/access of a finite chain given by callables.

    ``kernel(s, a)`` returns a dict of next-state probabilities over ``states``;
    ``reward(s, a)`` the expected one-slot reward; ``policy(s)`` the transmit
    probability.  Returns ``(throughput, access_rate, stationary)``.
    """
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    r = np.zeros(n)
    acc = np.zeros(n)
    for i, s in enumerate(states):
        mu = policy(s)
        acc[i] = mu
        for a, w in ((0, 1.0 - mu), (1, mu)):
            if w == 0.0:
                continue
            r[i] += w * reward(s, a)
            for x, p in kernel(s, a).items():
                P[i, index[x]] += w * p
    pi = solve_stationary(P)
    return float(pi @ r), float(pi @ acc), dict(zip(states, pi))


MAX_ORACLE_B = 12


@dataclass(frozen=True)
class ParetoPoint:
    degradation: float
    throughput: float
    policy: AccessPolicy
    actions: tuple


def enumerate_deterministic(profile: DecodingProfile, max_b: int, eps_trunc: float = 1e-12):
    """Evaluate every deterministic policy on ``{0..max_b, K<->, K->}``.

    The action at ``max_b`` continues for all larger ``b``.  Action vectors are
    ordered ``(a(0), ..., a(max_b), a(K<->), a(K->))``.
    """
    if max_b > MAX_ORACLE_B:
        raise ValueError(f"max_b={max_b} would enumerate 2^{max_b + 3} policies; limit is {MAX_ORACLE_B}")
    if max_b < 0:
        raise ValueError("max_b must be nonnegative")
    out = []
    for actions in itertools.product((0, 1), repeat=max_b + 3):
        pol = AccessPolicy(actions[: max_b + 1], actions[-2], actions[-1])
        perf = evaluate_policy(pol, profile, eps_trunc)
        out.append(ParetoPoint(perf.pu_degradation, perf.su_throughput, pol, actions))
    return out


def upper_left_hull(points: list, tol: float = 1e-12) -> list:
    """Pareto envelope of the convex hull, by decreasing degradation.

    Starts from the throughput maximiser and repeatedly moves to the point of
    smaller degradation that minimises the throughput lost per unit of
    degradation saved.
    """
    # exact (degradation, throughput) ties: keep lexicographically smallest actions
    best = {}
    for p in points:
        key = (round(p.degradation, 12), round(p.throughput, 12))
        if key not in best or p.actions < best[key].actions:
            best[key] = p
    # equal degradation: keep the higher throughput
    by_deg = {}
    for (d, _), p in sorted(best.items(), key=lambda kv: (kv[0][0], -kv[0][1], kv[1].actions)):
        by_deg.setdefault(d, p)
    pts = list(by_deg.values())

    current = min(pts, key=lambda p: (-p.throughput, p.degradation, p.actions))
    hull = [current]
    while True:
        lower = [p for p in pts if p.degradation < current.degradation - tol]
        if not lower:
            break
        slopes = [(current.throughput - p.throughput) / (current.degradation - p.degradation) for p in lower]
        smin = min(slopes)
        ties = [p for p, s in zip(lower, slopes) if s <= smin + tol * max(1.0, abs(smin))]
        # collinear candidates: jump to the farthest so only vertices are kept
        current = min(ties, key=lambda p: (p.degradation, p.actions))
        hull.append(current)
    return hull


def pareto_oracle(profile: DecodingProfile, max_b: int = 6, eps_trunc: float = 1e-12) -> list:
    """Brute-force Pareto envelope over deterministic policies.

    Returns ``(degradation, throughput, policy)`` triples sorted by decreasing
    degradation.
    """
    hull = upper_left_hull(enumerate_deterministic(profile, max_b, eps_trunc))
    return [(p.degradation, p.throughput, p.policy) for p in hull]
