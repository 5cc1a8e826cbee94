"""Slot-level Monte Carlo of the PU ARQ process and the SU access schemes.

Fading is drawn up front (one unit-mean exponential per link and slot plus one
uniform for the access coin), so a run is a deterministic function of its
:class:`Scenario`.  The per-slot loops work on plain Python lists and integer
state codes (``b >= 0``, ``-1`` for ``K<->``, ``-2`` for ``K->``) because they
run for millions of slots in the acceptance suite.
"""
from __future__ import annotations

import csv
import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..channel import (P_DECODABLE, S_DECODABLE, DecodingProfile, LinkStats, Outcome,
                       classify_outcomes, compute_profile)
from ..learner import LearnerConfig, LearnerState, sgd_update
from ..mdp import KNOWN, AccessPolicy, CdState, state_from_code
from ..policy import epsilon, optimal_policy
from .bic import bic_parameters
from .graph import MUTUAL, P_TO_S, S_TO_P, CdGraph


class Scheme(str, enum.Enum):
    OPCD = "OPCD"
    BIC = "BIC"
    NACD = "NACD"
    AO = "AO"
    GENIE = "GENIE"


@dataclass(frozen=True)
class ScriptedSlot:
    """Forced outcome for one slot: SUrx region, PU feedback and SU action."""

    region: int
    ack: bool
    transmit: bool = True


@dataclass(frozen=True)
class Scenario:
    stats: LinkStats
    nabla_th: float
    scheme: Scheme = Scheme.OPCD
    b_max: int | None = None
    t_arq: int | None = None
    horizon: int = 100_000
    seed: int = 0
    learner: LearnerConfig | None = None
    # optional (horizon, 4) array of mean SNRs (s, p, sp, ps) per slot
    snr_path: np.ndarray | None = field(default=None, compare=False, repr=False)
    script: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.script is not None:
            object.__setattr__(self, "script", tuple(self.script))
            object.__setattr__(self, "horizon", len(self.script))
        if self.horizon < 1:
            raise ValueError("horizon must be at least one slot")
        if self.nabla_th < 0:
            raise ValueError("nabla_th must be nonnegative")
        if self.b_max is not None and self.b_max < 0:
            raise ValueError("b_max must be nonnegative or None")
        if self.t_arq is not None and self.t_arq < 1:
            raise ValueError("t_arq must be positive or None")
        if self.snr_path is not None and np.shape(self.snr_path) != (self.horizon, 4):
            raise ValueError("snr_path must have shape (horizon, 4)")


@dataclass(frozen=True)
class SlotRecord:
    t: int
    a_s: int
    su_label: int | None
    outcome: str
    y_p: str
    y_s: int
    decoded_now: tuple
    cd_state_after: CdState
    buffer_occupancy: int


@dataclass
class SimMetrics:
    su_throughput_actual: float
    pu_throughput: float
    pu_degradation: float
    delay_samples: np.ndarray
    discarded_packets: int
    slots: int
    counts: dict
    access_rate: float
    learner_path: np.ndarray | None = None

    @property
    def decoded_packets(self) -> int:
        return self.counts["decoded"]


class _Packets:
    """Labels, SDUs and final status of every SU packet put on the air.

    An SDU that fails or is discarded goes back to the head of the queue and is
    sent again under a new label, so delays are measured per SDU from its very
    first transmission.
    """

    def __init__(self):
        self.label_sdu = [-1]
        self.label_rate = [0.0]
        self.sdu_first: list = []
        self.retry: deque = deque()
        self.delays: list = []
        self.bits = 0.0
        self.counts = dict(transmitted=0, decoded=0, failed=0, discarded_window=0,
                           discarded_buffer=0, pending=0)

    def fresh(self, t, rate):
        if self.retry:
            sdu = self.retry.popleft()
        else:
            sdu = len(self.sdu_first)
            self.sdu_first.append(t)
        self.label_sdu.append(sdu)
        self.label_rate.append(rate)
        self.counts["transmitted"] += 1
        return len(self.label_sdu) - 1

    def decoded(self, label, t):
        self.bits += self.label_rate[label]
        self.delays.append(t - self.sdu_first[self.label_sdu[label]] + 1)
        self.counts["decoded"] += 1

    def lost(self, label, why):
        self.counts[why] += 1
        self.retry.append(self.label_sdu[label])


class _Draws:
    """Per-slot channel realisations, either sampled or scripted."""

    def __init__(self, sc: Scenario, rate_s: float):
        st = sc.stats
        self.t_p = math.expm1(st.rate_p * math.log(2.0))
        n = sc.horizon
        if sc.script is not None:
            self.scripted = True
            self.region = [int(s.region) for s in sc.script]
            self.ack_forced = [bool(s.ack) for s in sc.script]
            self.transmit_forced = [bool(s.transmit) for s in sc.script]
            self.sdec = [r in S_DECODABLE for r in self.region]
            self.pdec = [r in P_DECODABLE for r in self.region]
            self.u = [0.0] * n
            self.gs = [0.0] * n
            return
        self.scripted = False
        rng = np.random.default_rng(sc.seed)
        e = rng.standard_exponential((4, n))
        self.u = rng.random(n).tolist()
        if sc.snr_path is not None:
            means = np.asarray(sc.snr_path, dtype=float).T
        else:
            means = np.array([[st.mean_snr_s], [st.mean_snr_p], [st.mean_snr_sp], [st.mean_snr_ps]])
        gs, gp, gsp, gps = e * means
        self.gs = gs.tolist()
        self.gps = gps.tolist()
        self.ack0 = (gp > self.t_p).tolist()
        self.ack1 = (gp / (1.0 + gsp) > self.t_p).tolist()
        self.pdec = (gps > self.t_p).tolist()
        if rate_s is not None:
            self.region = classify_outcomes(gs, gps, rate_s, st.rate_p).tolist()
            self.sdec = (gs > math.expm1(rate_s * math.log(2.0))).tolist()


def _region_at(gs, gps, t_s, t_p):
    """Scalar region index using linear-domain thresholds (for a varying SU rate)."""
    s_ok = gs > t_s
    p_ok = gps > t_p
    if s_ok and p_ok:
        return 1 if gs + gps > (1.0 + t_s) * (1.0 + t_p) - 1.0 else 6
    if s_ok:
        return 2 if gs / (1.0 + gps) > t_s else 4
    if p_ok:
        return 3 if gps / (1.0 + gs) > t_p else 5
    return 7


class _Access:
    """State-indexed transmit probabilities, refreshed per slot when learning."""

    def __init__(self, policy: AccessPolicy):
        self.set(policy)

    def set(self, policy: AccessPolicy):
        self.buf = list(policy.buffered)
        self.nbuf = len(self.buf)
        self.mutual = policy.mutual
        self.known = policy.known

    def set_nu(self, nu):
        self.buf = [max(nu - 1.0, 0.0), 1.0]
        self.nbuf = 2
        self.mutual = 1.0
        self.known = min(nu, 1.0)

    def __call__(self, code):
        if code >= 0:
            return self.buf[code] if code < self.nbuf else self.buf[-1]
        return self.mutual if code == -1 else self.known


def _scheme_policy(sc: Scenario, profile: DecodingProfile):
    if sc.nabla_th == 0.0:
        return AccessPolicy.idle()
    eps = epsilon(sc.nabla_th, profile)
    if sc.scheme == Scheme.OPCD:
        return optimal_policy(sc.nabla_th, profile)[0]
    if sc.scheme == Scheme.BIC:
        x, p_known = bic_parameters(sc.nabla_th, profile)
        # BIC state codes: 0 -> x, n > 0 -> 1, known (-2) -> p_known
        return AccessPolicy((x, 1.0), 1.0, p_known)
    return AccessPolicy.constant(eps)


def run_simulation(scenario: Scenario, trace: bool = False, profile: DecodingProfile | None = None):
    """Simulate ``scenario``; returns ``(SimMetrics, list[SlotRecord] or None)``."""
    sc = scenario
    if profile is None:
        profile = compute_profile(sc.stats)
    learning = sc.learner is not None and sc.scheme == Scheme.OPCD
    rate_s = None if learning else sc.stats.rate_s
    draws = _Draws(sc, rate_s)
    access = _Access(_scheme_policy(sc, profile))
    learner = None
    pu_min = None
    if learning:
        learner = LearnerState.from_config(sc.learner)
        pu_max = sc.stats.rate_p * (1.0 - profile.rho0)
        pu_min = sc.learner.pu_min_throughput
        if pu_min is None:
            pu_min = pu_max * (1.0 - sc.nabla_th)
        access.set_nu(learner.nu)
    runner = {Scheme.OPCD: _run_cd, Scheme.NACD: _run_cd, Scheme.BIC: _run_bic,
              Scheme.AO: _run_memoryless, Scheme.GENIE: _run_memoryless}[sc.scheme]
    return runner(sc, profile, draws, access, learner, pu_min, trace)


class _Slot:
    """Per-slot channel view shared by the scheme loops (varying SU rate aware)."""

    def __init__(self, sc, draws, learner, pu_min=None):
        self.sc = sc
        self._pu_min = pu_min
        self.d = draws
        self.learner = learner
        self.path = np.empty((sc.horizon, 3)) if learner is not None else None
        self.rate = learner.rate_s if learner is not None else sc.stats.rate_s
        self.t_s = math.expm1(self.rate * math.log(2.0))

    def region(self, t):
        if self.learner is None:
            return self.d.region[t]
        return _region_at(self.d.gs[t], self.d.gps[t], self.t_s, self.d.t_p)

    def sdec(self, t):
        if self.learner is None:
            return self.d.sdec[t]
        return self.d.gs[t] > self.t_s

    def learn(self, t, ack, a, access, bits):
        st = sgd_update(self.learner, ack, bool(a), self.d.gs[t] if a else None,
                        self.sc.stats.rate_p, self._pu_min)
        self.learner = st
        self.path[t] = st.nu, st.rate_s, bits
        access.set_nu(st.nu)
        self.rate = st.rate_s
        self.t_s = math.expm1(self.rate * math.log(2.0))


def _idle_region(pdec):
    return 3 if pdec else 7


def _finish(sc, profile, book, acks, tx, slot, records):
    rate_p = sc.stats.rate_p
    pu_thr = acks * rate_p / sc.horizon
    metrics = SimMetrics(
        su_throughput_actual=book.bits / sc.horizon,
        pu_throughput=pu_thr,
        pu_degradation=1.0 - pu_thr / (rate_p * (1.0 - profile.rho0)),
        delay_samples=np.asarray(book.delays, dtype=float),
        discarded_packets=book.counts["discarded_window"] + book.counts["discarded_buffer"],
        slots=sc.horizon,
        counts=dict(book.counts),
        access_rate=tx / sc.horizon,
        learner_path=slot.path,
    )
    return metrics, records


def _run_cd(sc, profile, draws, access, learner, pu_min, trace):
    slot = _Slot(sc, draws, learner, pu_min)
    book = _Packets()
    graph = CdGraph(sc.b_max)
    records = [] if trace else None
    scripted = draws.scripted
    u = draws.u
    pdec = draws.pdec
    t_arq = sc.t_arq
    code, pu_known, pid, win_len = 0, False, -1, 0
    limbo: set = set()
    root, root_dirty = None, False
    acks = tx = 0

    for t in range(sc.horizon):
        freed_now = [] if trace else None
        mu = access(code)
        if scripted:
            a = 1 if draws.transmit_forced[t] else 0
        else:
            a = 1 if (mu >= 1.0 or (mu > 0.0 and u[t] < mu)) else 0
        if scripted:
            ack = draws.ack_forced[t]
        else:
            ack = draws.ack1[t] if a else draws.ack0[t]
        label = None
        is_root = False
        if a:
            tx += 1
            if code == 0 or (code == -2 and pu_known):
                if root_dirty:
                    root = graph.root()
                    root_dirty = False
                label = root
            is_root = label is not None
            if not is_root:
                label = book.fresh(t, slot.rate)
            r = slot.region(t)
            outcome = Outcome(r).name
            if pu_known:
                outcome = "IF_SUCCESS" if slot.sdec(t) else "IF_FAIL"
            decode_s = decode_p = False
            store = None
            if pu_known:
                decode_s = slot.sdec(t)
            elif r == 1:
                decode_s = decode_p = True
            elif r == 2:
                decode_s = True
            elif r == 3:
                decode_p = True
            elif r == P_TO_S:
                store = P_TO_S
            elif r == S_TO_P and code != -2:
                store = S_TO_P
            elif r == MUTUAL:
                store = MUTUAL
            if decode_s:
                freed = graph.chain_decode(label)
                freed.add(label)
                root_dirty = True
                for x in freed:
                    if x > 0:
                        limbo.discard(x)
                        book.decoded(x, t)
                    elif x == pid and not pu_known:
                        pu_known, code = True, -2
                if trace:
                    freed_now.extend(freed)
            if decode_p and not pu_known:
                freed = graph.chain_decode(pid)
                for x in freed:
                    if x > 0:
                        limbo.discard(x)
                        book.decoded(x, t)
                pu_known, code = True, -2
                root_dirty = True
                if trace:
                    freed_now.extend(freed)
                    freed_now.append(pid)
            if store is not None:
                if graph.add_signal(store, label, pid):
                    limbo.add(label)
                    if store == P_TO_S:
                        if code >= 0:
                            code += 1
                    else:
                        root_dirty = True
                        if store == S_TO_P:
                            code = -2
                        elif code >= 0:
                            code = -1
                elif not is_root:
                    book.lost(label, "discarded_buffer")
            elif not decode_s and not is_root:
                book.lost(label, "failed")
            y_s = r
        else:
            y_s = _idle_region(pdec[t])
            outcome = "IDLE"
            if not pu_known and pdec[t]:
                freed = graph.chain_decode(pid)
                for x in freed:
                    if x > 0:
                        limbo.discard(x)
                        book.decoded(x, t)
                pu_known, code = True, -2
                root_dirty = True
                if trace:
                    freed_now.extend(freed)
                    freed_now.append(pid)

        if ack:
            acks += 1
        if learner is not None:
            slot.learn(t, ack, a, access, book.bits)
        win_len += 1
        if ack or (t_arq is not None and win_len >= t_arq):
            if code >= 0:
                graph.drop_node(pid)
            pid -= 1
            code, pu_known, win_len = 0, False, 0
            if limbo:
                root = _collect(graph, limbo, book)
                root_dirty = False
        if trace:
            records.append(SlotRecord(t, a, label, outcome, "ACK" if ack else "NACK", y_s,
                                      tuple(sorted(freed_now)), state_from_code(code), graph.occupancy))
    book.counts["pending"] = len(limbo)
    return _finish(sc, profile, book, acks, tx, slot, records)


def _collect(graph: CdGraph, limbo: set, book: _Packets):
    """End-of-window cleanup: keep the CD root and what it unlocks, discard the rest."""
    root = graph.root()
    alive = set() if root is None else graph.unlock_set(root) | {root}
    for label in sorted(limbo - alive):
        limbo.discard(label)
        book.lost(label, "discarded_window")
    for sid, (_, su, pu) in list(graph.signals.items()):
        if su not in alive or pu not in alive:
            graph._drop(sid)
    return root


def _run_bic(sc, profile, draws, access, learner, pu_min, trace):
    slot = _Slot(sc, draws, None)
    book = _Packets()
    records = [] if trace else None
    cap = sc.b_max
    t_arq = sc.t_arq
    stored: list = []
    known = False
    win_len = acks = tx = 0
    for t in range(sc.horizon):
        freed_now = []
        code = -2 if known else min(len(stored), 1)
        mu = access(code)
        if draws.scripted:
            a = 1 if draws.transmit_forced[t] else 0
            ack = draws.ack_forced[t]
        else:
            a = 1 if (mu >= 1.0 or (mu > 0.0 and draws.u[t] < mu)) else 0
            ack = draws.ack1[t] if a else draws.ack0[t]
        label = None
        if a:
            tx += 1
            label = book.fresh(t, slot.rate)
            r = slot.region(t)
            y_s = r
            outcome = Outcome(r).name
            p_now = False
            if known:
                outcome = "IF_SUCCESS" if slot.sdec(t) else "IF_FAIL"
                if slot.sdec(t):
                    book.decoded(label, t)
                    freed_now.append(label)
                else:
                    book.lost(label, "failed")
            elif r in (1, 2):
                book.decoded(label, t)
                freed_now.append(label)
                p_now = r == 1
            elif r in (P_TO_S, MUTUAL):
                if cap is None or len(stored) < cap:
                    stored.append(label)
                else:
                    book.lost(label, "discarded_buffer")
            else:
                p_now = r == 3
                book.lost(label, "failed")
        else:
            y_s = _idle_region(draws.pdec[t])
            outcome = "IDLE"
            p_now = not known and draws.pdec[t]
        if p_now and not known:
            known = True
            for x in stored:
                book.decoded(x, t)
            freed_now.extend(stored)
            stored = []
        if ack:
            acks += 1
        win_len += 1
        if ack or (t_arq is not None and win_len >= t_arq):
            for x in stored:
                book.lost(x, "discarded_window")
            stored = []
            known = False
            win_len = 0
        if trace:
            state = KNOWN if known else CdState.buffered(len(stored))
            records.append(SlotRecord(t, a, label, outcome, "ACK" if ack else "NACK", y_s,
                                      tuple(sorted(freed_now)), state, len(stored)))
    book.counts["pending"] = len(stored)
    return _finish(sc, profile, book, acks, tx, slot, records)


def _run_memoryless(sc, profile, draws, access, learner, pu_min, trace):
    slot = _Slot(sc, draws, None)
    book = _Packets()
    records = [] if trace else None
    genie = sc.scheme == Scheme.GENIE
    mu = access(0)
    acks = tx = 0
    zero = CdState.buffered(0)
    for t in range(sc.horizon):
        if draws.scripted:
            a = 1 if draws.transmit_forced[t] else 0
            ack = draws.ack_forced[t]
        else:
            a = 1 if (mu >= 1.0 or (mu > 0.0 and draws.u[t] < mu)) else 0
            ack = draws.ack1[t] if a else draws.ack0[t]
        label = None
        freed = ()
        if a:
            tx += 1
            label = book.fresh(t, slot.rate)
            r = slot.region(t)
            y_s = r
            ok = slot.sdec(t) if genie else r <= 2
            outcome = ("IF_SUCCESS" if ok else "IF_FAIL") if genie else Outcome(r).name
            if ok:
                book.decoded(label, t)
                freed = (label,)
            else:
                book.lost(label, "failed")
        else:
            y_s = _idle_region(draws.pdec[t])
            outcome = "IDLE"
        if ack:
            acks += 1
        if trace:
            records.append(SlotRecord(t, a, label, outcome, "ACK" if ack else "NACK", y_s,
                                      freed, zero, 0))
    return _finish(sc, profile, book, acks, tx, slot, records)


def delay_cdf(metrics: SimMetrics, normalization: float):
    """Empirical CDF of the delay divided by ``normalization`` (slots).

    Returns a list of ``(normalized_delay, cumulative_probability)`` at each
    distinct delay value.  Discarded packets are reported by the metrics
    counters, not here.
    """
    d = np.asarray(metrics.delay_samples, dtype=float)
    if d.size == 0:
        raise ValueError("no delay samples")
    if not normalization > 0:
        raise ValueError("normalization must be positive")
    values, counts = np.unique(d, return_counts=True)
    cum = np.cumsum(counts) / d.size
    return [(float(v / normalization), float(c)) for v, c in zip(values, cum)]


TRACE_COLUMNS = ("t", "a_s", "su_label", "outcome", "y_p", "y_s", "decoded_now",
                 "cd_state", "buffer_occupancy")


def write_trace_csv(records, fh):
    """Write a slot trace to an open text file."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in records:
        w.writerow([r.t, r.a_s, "" if r.su_label is None else r.su_label, r.outcome, r.y_p,
                    r.y_s, " ".join(str(x) for x in r.decoded_now), str(r.cd_state_after),
                    r.buffer_occupancy])


def analytic_throughput(scheme, nabla_th: float, profile: DecodingProfile) -> float:
    """Long-run SU throughput of ``scheme`` predicted by closed forms or exact chains."""
    from ..mdp import evaluate_policy
    from ..policy import closed_form_performance, genie_aided
    from .bic import bic_performance

    scheme = Scheme(scheme)
    if nabla_th == 0.0:
        return 0.0
    eps = epsilon(nabla_th, profile)
    if scheme == Scheme.OPCD:
        return closed_form_performance(nabla_th, profile)[0]
    if scheme == Scheme.NACD:
        return evaluate_policy(AccessPolicy.constant(eps), profile).su_throughput
    if scheme == Scheme.AO:
        return eps * profile.rate_s * (profile.delta_s + profile.delta_sp)
    if scheme == Scheme.GENIE:
        return genie_aided(eps, profile.rate_s, profile.d_s)
    return bic_performance(nabla_th, profile)[0]
