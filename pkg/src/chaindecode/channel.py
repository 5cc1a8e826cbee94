"""Block-fading link model and decoding outcomes at the secondary receiver.

The secondary receiver sees a two-user multiple access channel (SU and PU
signals).  Each slot falls into one of seven decoding regions determined by
the instantaneous SNRs ``(gamma_s, gamma_ps)`` and the rate pair.  All
downstream analysis only needs the probabilities of these regions, bundled in
:class:`DecodingProfile`.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class IntegrationError(RuntimeError):
    """Numerical integration did not reach the requested accuracy."""

    def __init__(self, what: str, achieved: float, tol: float):
        super().__init__(f"{what}: achieved accuracy {achieved:.3g} > tol {tol:.3g}")
        self.achieved = achieved
        self.tol = tol


class Outcome(enum.IntEnum):
    """Decoding regions at SUrx; values match the feedback index y_s."""

    BOTH_DECODED = 1
    ONLY_S = 2
    ONLY_P = 3
    P_UNLOCKS_S = 4
    S_UNLOCKS_P = 5
    MUTUAL = 6
    FAILURE = 7


# regions in which the SU packet is decodable once the PU packet is removed
S_DECODABLE = frozenset({1, 2, 4, 6})
# regions in which the PU packet is decodable once the SU packet is removed
P_DECODABLE = frozenset({1, 3, 5, 6})


def capacity(snr):
    """Gaussian channel capacity ``log2(1 + snr)`` in bits/s/Hz."""
    arr = np.asarray(snr, dtype=float)
    if np.any(arr < 0):
        raise ValueError("snr must be nonnegative")
    out = np.log2(1.0 + arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinkStats:
    """Mean SNRs (linear) of the four links and the two transmission rates."""

    mean_snr_s: float
    mean_snr_p: float
    mean_snr_sp: float
    mean_snr_ps: float
    rate_s: float
    rate_p: float

    def __post_init__(self):
        for name in ("mean_snr_s", "mean_snr_p", "mean_snr_sp", "mean_snr_ps", "rate_s", "rate_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


class Rayleigh:
    """Rayleigh block fading: the SNR is exponential with the given mean."""

    name = "rayleigh"

    def sample(self, mean, rng: np.random.Generator, size=None):
        return rng.exponential(mean, size=size)

    def sf(self, x, mean):
        x = np.maximum(x, 0.0)
        return np.exp(-x / mean)

    def cdf(self, x, mean):
        x = np.maximum(x, 0.0)
        return -np.expm1(-x / mean)

    def pdf(self, x, mean):
        return np.where(np.asarray(x) >= 0, np.exp(-np.asarray(x) / mean) / mean, 0.0)

    def ppf(self, u, mean):
        return -mean * np.log1p(-np.asarray(u))


RAYLEIGH = Rayleigh()


def sample_snr(mean: float, rng: np.random.Generator, size=None, fading=RAYLEIGH):
    """Draw block-fading SNR(s) with the given mean."""
    if not mean > 0:
        raise ValueError("mean must be positive")
    return fading.sample(mean, rng, size)


def interference_free_success(rate: float, mean_snr: float) -> float:
    """P(rate < C(gamma)) for exponential gamma: ``exp(-(2^rate - 1)/mean)``."""
    return math.exp(-math.expm1(rate * math.log(2.0)) / mean_snr)


def classify_outcomes(gamma_s, gamma_ps, rate_s: float, rate_p: float):
    """Vectorised region classification; returns an int8 array of region indices."""
    gs = np.asarray(gamma_s, dtype=float)
    gps = np.asarray(gamma_ps, dtype=float)
    c_s = np.log2(1.0 + gs)
    c_p = np.log2(1.0 + gps)
    c_sum = np.log2(1.0 + gs + gps)
    c_s_given_p = np.log2(1.0 + gs / (1.0 + gps))
    c_p_given_s = np.log2(1.0 + gps / (1.0 + gs))

    s_ok = rate_s < c_s
    p_ok = rate_p < c_p
    out = np.full(np.broadcast(gs, gps).shape, 7, dtype=np.int8)
    both = s_ok & p_ok
    out[both & (rate_s + rate_p < c_sum)] = 1
    out[both & ~(rate_s + rate_p < c_sum)] = 6
    only_s = s_ok & ~p_ok
    out[only_s & (rate_s < c_s_given_p)] = 2
    out[only_s & ~(rate_s < c_s_given_p)] = 4
    only_p = ~s_ok & p_ok
    out[only_p & (rate_p < c_p_given_s)] = 3
    out[only_p & ~(rate_p < c_p_given_s)] = 5
    return out


def classify_outcome(gamma_s: float, gamma_ps: float, rates) -> Outcome:
    """Region of the SUrx multiple access channel for one slot.

    ``rates`` is anything with ``rate_s`` and ``rate_p`` attributes (usually a
    :class:`LinkStats`) or a ``(rate_s, rate_p)`` pair.
    """
    if gamma_s < 0 or gamma_ps < 0:
        raise ValueError("SNRs must be nonnegative")
    if isinstance(rates, tuple):
        rate_s, rate_p = rates
    else:
        rate_s, rate_p = rates.rate_s, rates.rate_p
    c_s = math.log2(1.0 + gamma_s)
    c_p = math.log2(1.0 + gamma_ps)
    if rate_s < c_s and rate_p < c_p:
        if rate_s + rate_p < math.log2(1.0 + gamma_s + gamma_ps):
            return Outcome.BOTH_DECODED
        return Outcome.MUTUAL
    if rate_s < c_s:
        if rate_s < math.log2(1.0 + gamma_s / (1.0 + gamma_ps)):
            return Outcome.ONLY_S
        return Outcome.P_UNLOCKS_S
    if rate_p < c_p:
        if rate_p < math.log2(1.0 + gamma_ps / (1.0 + gamma_s)):
            return Outcome.ONLY_P
        return Outcome.S_UNLOCKS_P
    return Outcome.FAILURE


@dataclass(frozen=True)
class DecodingProfile:
    """Outcome probabilities at SUrx and PU failure probabilities.

    ``rate_s``/``rate_p`` ride along so that throughput figures (bits/s/Hz)
    can be produced from the profile alone.
    """

    delta_sp: float
    delta_s: float
    delta_p: float
    ups_s: float
    ups_p: float
    ups_sp: float
    ups_empty: float
    rho0: float
    rho1: float
    rate_s: float = 1.0
    rate_p: float = 1.0
    d_s: float = field(init=False)
    d_p: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d_s", self.delta_s + self.delta_sp + self.ups_s + self.ups_sp)
        object.__setattr__(self, "d_p", self.delta_p + self.delta_sp + self.ups_p + self.ups_sp)
        probs = self.region_probabilities()
        if min(probs) < -1e-12 or abs(sum(probs) - 1.0) > 1e-6:
            raise ValueError(f"region probabilities must form a distribution, got {probs}")
        if not (0.0 <= self.rho0 < self.rho1 <= 1.0):
            raise ValueError(f"need 0 <= rho0 < rho1 <= 1, got {self.rho0}, {self.rho1}")

    def region_probabilities(self) -> tuple:
        """Probabilities of regions 1..7 in feedback order."""
        return (self.delta_sp, self.delta_s, self.delta_p, self.ups_s,
                self.ups_p, self.ups_sp, self.ups_empty)

    def rho(self, a: float) -> float:
        """PU failure probability when the SU transmits with probability ``a``."""
        return self.rho0 + a * (self.rho1 - self.rho0)

    @classmethod
    def from_regions(cls, probs, rho0, rho1, rate_s=1.0, rate_p=1.0):
        p = [float(x) for x in probs]
        return cls(*p, rho0=float(rho0), rho1=float(rho1), rate_s=rate_s, rate_p=rate_p)


def _quad(fn, a, b, tol, what):
    # quad's own warnings are redundant: the error estimate is checked below
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, a, b, epsabs=tol / 20.0, epsrel=1e-12, limit=200)
    if not err <= tol / 2.0:
        raise IntegrationError(what, err, tol)
    return val, err


def pu_failure_probabilities(stats: LinkStats, tol: float = 1e-6, fading=RAYLEIGH):
    """``(rho0, rho1)``: PU failure probability with the SU idle / transmitting.

    rho1 is integrated over the SU->PUrx interference SNR ``x``, so any fading
    model exposing ``sf``/``cdf``/``ppf`` works.  The integral runs over
    ``u = F(x)``, which keeps it well scaled for any mean interference SNR.
    """
    t_p = math.expm1(stats.rate_p * math.log(2.0))
    rho0 = float(fading.cdf(t_p, stats.mean_snr_p))

    def integrand(u):
        if u >= 1.0:
            return 0.0
        x = float(fading.ppf(u, stats.mean_snr_sp))
        return float(fading.sf(t_p * (1.0 + x), stats.mean_snr_p))

    success1, _ = _quad(integrand, 0.0, 1.0, tol, "rho1")
    return rho0, 1.0 - success1


def rho1_closed_form(stats: LinkStats) -> float:
    """Rayleigh closed form of rho1, used as a cross-check."""
    t_p = math.expm1(stats.rate_p * math.log(2.0))
    ok = math.exp(-t_p / stats.mean_snr_p) / (1.0 + t_p * stats.mean_snr_sp / stats.mean_snr_p)
    return 1.0 - ok


def compute_profile(stats: LinkStats, tol: float = 1e-6, fading=RAYLEIGH) -> DecodingProfile:
    """Region probabilities by integrating the joint fading density.

    The inner integral over ``gamma_s`` is written through the fading
    survival function.  The outer one runs over ``u = F(gamma_ps)`` so the
    integrand stays bounded whatever the scale of ``gamma_ps``.  Each region
    is accurate to within ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ln2 = math.log(2.0)
    t_s = math.expm1(stats.rate_s * ln2)
    t_p = math.expm1(stats.rate_p * ln2)
    t_sum = math.expm1((stats.rate_s + stats.rate_p) * ln2)
    ms, mps = stats.mean_snr_s, stats.mean_snr_ps
    sf = lambda x: float(fading.sf(x, ms))
    cdf = lambda x: float(fading.cdf(x, ms))
    to_u = lambda y: float(fading.cdf(y, mps))
    to_y = lambda u: float(fading.ppf(u, mps))

    # gamma_ps values where the inner limits switch branches
    y_sum = t_sum - t_s          # above this, the sum-rate bound is slack
    y_p_given_s = t_p * (1.0 + t_s)
    u_p = to_u(t_p)

    # gamma_s cut separating region 3 (P decodable over S) from 5, given y
    def g_cut(y):
        return min(t_s, max(0.0, y / t_p - 1.0))

    above = {
        "delta_sp": lambda y: sf(max(t_s, t_sum - y)),
        "ups_sp": lambda y: max(0.0, sf(t_s) - sf(t_sum - y)) if t_sum - y > t_s else 0.0,
        "delta_p": lambda y: cdf(g_cut(y)),
        "ups_p": lambda y: cdf(t_s) - cdf(g_cut(y)),
    }
    below = {
        "delta_s": lambda y: sf(t_s * (1.0 + y)),
        "ups_s": lambda y: sf(t_s) - sf(t_s * (1.0 + y)),
    }
    brk_above = sorted({u_p, 1.0, *[to_u(y) for y in (y_sum, y_p_given_s) if y > t_p]})
    brk_below = [0.0, u_p]

    vals = {}
    for pieces, table in ((brk_above, above), (brk_below, below)):
        for name, fn in table.items():
            g = lambda u, fn=fn: fn(to_y(u)) if u < 1.0 else fn(math.inf)
            total = err = 0.0
            for lo, hi in zip(pieces, pieces[1:]):
                if hi > lo:
                    v, e = _quad(g, lo, hi, tol, name)
                    total += v
                    err += e
            if err > tol:
                raise IntegrationError(name, err, tol)
            vals[name] = total
    vals["ups_empty"] = cdf(t_s) * u_p

    rho0, rho1 = pu_failure_probabilities(stats, tol, fading)
    return DecodingProfile(
        delta_sp=vals["delta_sp"], delta_s=vals["delta_s"], delta_p=vals["delta_p"],
        ups_s=vals["ups_s"], ups_p=vals["ups_p"], ups_sp=vals["ups_sp"],
        ups_empty=vals["ups_empty"], rho0=rho0, rho1=rho1,
        rate_s=stats.rate_s, rate_p=stats.rate_p,
    )


def monte_carlo_profile(stats: LinkStats, n: int, rng: np.random.Generator, fading=RAYLEIGH):
    """Empirical region frequencies and their standard errors (oracle path)."""
    gs = fading.sample(stats.mean_snr_s, rng, n)
    gps = fading.sample(stats.mean_snr_ps, rng, n)
    regions = classify_outcomes(gs, gps, stats.rate_s, stats.rate_p)
    freq = np.bincount(regions, minlength=8)[1:] / n
    stderr = np.sqrt(freq * (1.0 - freq) / n)
    return freq, stderr
