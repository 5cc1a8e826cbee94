"""Scenario construction from the two-pair geometry.

PUtx sits at ``(0, 0)`` and PUrx at ``(0, d0)``; the SU pair is the same link
shifted by ``d_SP`` along the x axis.  Distances are expressed in units of
``d0``, so both direct links have unit length and both cross links have length
``sqrt(1 + d_SP^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from ..channel import RAYLEIGH, LinkStats
from ..learner import rate_fixed_point

PU_TX = (0.0, 0.0)
PU_RX = (0.0, 1.0)


@dataclass(frozen=True)
class Geometry:
    d_sp_over_d0: float
    pathloss_alpha: float = 2.0
    mean_snr_p: float = 20.0

    def __post_init__(self):
        for name in ("d_sp_over_d0", "pathloss_alpha", "mean_snr_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def su_tx(self):
        return (self.d_sp_over_d0, 0.0)

    @property
    def su_rx(self):
        return (self.d_sp_over_d0, 1.0)

    def mean_snr(self, tx, rx) -> float:
        return self.mean_snr_p * math.dist(tx, rx) ** (-self.pathloss_alpha)


def optimal_rate(mean_snr: float, fading=RAYLEIGH) -> float:
    """Rate maximising ``r * P(r < C(gamma))`` for a link with the given mean SNR."""
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    if fading is RAYLEIGH:
        return rate_fixed_point(mean_snr)
    hi = math.log2(1.0 + 50.0 * mean_snr)
    res = optimize.minimize_scalar(lambda r: -r * fading.sf(2.0 ** r - 1.0, mean_snr),
                                   bounds=(0.0, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def geometry_to_stats(geom: Geometry) -> LinkStats:
    g = geom
    snr_s = g.mean_snr(g.su_tx, g.su_rx)
    snr_p = g.mean_snr(PU_TX, PU_RX)
    return LinkStats(
        mean_snr_s=snr_s,
        mean_snr_p=snr_p,
        mean_snr_sp=g.mean_snr(g.su_tx, PU_RX),
        mean_snr_ps=g.mean_snr(PU_TX, g.su_rx),
        rate_s=optimal_rate(snr_s),
        rate_p=optimal_rate(snr_p),
    )
