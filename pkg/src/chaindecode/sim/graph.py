"""Chain-decoding graph kept at SUrx.

SU packets carry positive integer labels and PU packets negative ones.  Each
buffered received signal ties one SU packet to one PU packet and records which
way the decoding dependence goes:

* ``P_TO_S`` (region 4): the SU packet is decodable once the PU packet is known;
* ``S_TO_P`` (region 5): the PU packet is decodable once the SU packet is known;
* ``MUTUAL`` (region 6): either one unlocks the other.

A signal is consumed as soon as either endpoint is decoded, so the graph only
ever holds undecoded packets.
"""
from __future__ import annotations

from collections import deque

from ..mdp import CdState, Phi

P_TO_S = 4
S_TO_P = 5
MUTUAL = 6

FRESH = None  # marker returned by packet selection for "send a new packet"


def _unlocks(kind: int, from_su: bool) -> bool:
    if kind == MUTUAL:
        return True
    return (kind == S_TO_P) if from_su else (kind == P_TO_S)


class CdGraph:
    """Buffered signals at SUrx with a bounded capacity ``b_max`` (None = unbounded)."""

    def __init__(self, b_max: int | None = None):
        if b_max is not None and b_max < 0:
            raise ValueError("b_max must be nonnegative")
        self.b_max = b_max
        self.signals: dict = {}
        self._by_node: dict = {}
        self._next_sid = 0

    def __len__(self):
        return len(self.signals)

    @property
    def occupancy(self) -> int:
        return len(self.signals)

    @property
    def nodes(self) -> set:
        return set(self._by_node)

    def has_room(self) -> bool:
        return self.b_max is None or len(self.signals) < self.b_max

    def add_signal(self, kind: int, su: int, pu: int) -> bool:
        """Buffer one received signal; returns False (and stores nothing) when full."""
        if kind not in (P_TO_S, S_TO_P, MUTUAL):
            raise ValueError(f"only regions 4, 5 and 6 are buffered, got {kind}")
        if su <= 0 or pu >= 0:
            raise ValueError("SU labels are positive and PU labels negative")
        if not self.has_room():
            return False
        sid = self._next_sid
        self._next_sid += 1
        self.signals[sid] = (kind, su, pu)
        self._by_node.setdefault(su, set()).add(sid)
        self._by_node.setdefault(pu, set()).add(sid)
        return True

    def _drop(self, sid):
        kind, su, pu = self.signals.pop(sid)
        for node in (su, pu):
            bucket = self._by_node[node]
            bucket.discard(sid)
            if not bucket:
                del self._by_node[node]

    def drop_node(self, node: int) -> int:
        """Discard every signal touching ``node``; returns how many were removed."""
        sids = list(self._by_node.get(node, ()))
        for sid in sids:
            self._drop(sid)
        return len(sids)

    def _neighbours(self, node):
        for sid in self._by_node.get(node, ()):
            kind, su, pu = self.signals[sid]
            if node == su:
                if _unlocks(kind, True):
                    yield sid, pu
            elif _unlocks(kind, False):
                yield sid, su

    def chain_decode(self, trigger: int) -> set:
        """Propagate the decoding of ``trigger`` and return the other packets it frees."""
        out = set()
        queue = deque([trigger])
        while queue:
            x = queue.popleft()
            unlocked = [y for _, y in self._neighbours(x)]
            self.drop_node(x)
            for y in unlocked:
                if y != trigger and y not in out:
                    out.add(y)
                    queue.append(y)
        return out

    def unlock_set(self, node: int) -> set:
        """Packets that would be decoded via CD if ``node`` were decoded (read-only)."""
        seen = {node}
        queue = deque([node])
        while queue:
            x = queue.popleft()
            for _, y in self._neighbours(x):
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        seen.discard(node)
        return seen

    def root(self):
        """Undecoded SU packet unlocking the most SU packets (oldest wins ties), or None."""
        best = None
        best_key = None
        candidates = {su for kind, su, _ in self.signals.values() if kind != P_TO_S}
        for su in sorted(candidates):
            count = sum(1 for y in self.unlock_set(su) if y > 0)
            if count >= 1 and (best_key is None or count > best_key):
                best, best_key = su, count
        return best


def _select(phi_code: int, pu_known: bool, root):
    # retransmit the root only from an empty chain or once the PU packet is known
    if root is not None and (phi_code == 0 or (phi_code == -2 and pu_known)):
        return root
    return FRESH


def cd_protocol_select(graph: CdGraph, state: CdState, pu_known: bool = True):
    """Label to transmit under the CD protocol; ``FRESH`` (None) means a new packet.

    ``pu_known`` only matters in ``K->``: it distinguishes a PU packet that SUrx
    has actually decoded from one that is merely decodable through the root.
    """
    if state.phi == Phi.UNKNOWN:
        code = 0 if state.b == 0 else 1
    else:
        code = -1 if state.phi == Phi.MUTUAL else -2
    if code in (1, -1) or (code == -2 and not pu_known):
        return FRESH
    return _select(code, pu_known, graph.root())
