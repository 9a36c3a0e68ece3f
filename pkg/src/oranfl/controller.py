"""Near-RT FL controller: handover decisions and per-O-RU slice sizing.

The joint problem is split into a per-client best-link assignment (with a
hysteresis margin) followed by an independent convex bandwidth split at every
O-RU, minimising ``sum_s a_s * K_s / f_s`` over the slice fractions ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import radio
from .descriptor import MobilityPredictor, predict_many

SE_FLOOR = 1e-3


class InfeasibleSplitError(ValueError):
    pass


@dataclass
class AssignmentPlan:
    oru: np.ndarray  # per client O-RU index, -1 when unassigned
    handovers: list[tuple[int, int, int]] = field(default_factory=list)

    @classmethod
    def empty(cls, n_clients: int) -> "AssignmentPlan":
        return cls(np.full(n_clients, -1, dtype=np.int64))


@dataclass
class SliceAllocation:
    fractions: np.ndarray  # (n_oru, n_services)
    bandwidth: np.ndarray  # fractions scaled by each O-RU's bandwidth, Hz

    @classmethod
    def from_fractions(cls, fractions: np.ndarray, oru_bandwidths: np.ndarray) -> "SliceAllocation":
        f = np.asarray(fractions, dtype=float)
        return cls(f, f * np.asarray(oru_bandwidths, dtype=float)[:, None])

    @property
    def n_services(self) -> int:
        return self.fractions.shape[1]


@dataclass
class SliceRequest:
    service_id: int
    bandwidth: np.ndarray  # Hz per O-RU
    deadline: float
    weight: float


def predict_state(predictor: MobilityPredictor, windows: np.ndarray, since_last_sample,
                  horizon: float, oru_positions: np.ndarray, params: radio.RadioParams):
    """Predicted positions ``horizon`` ahead and the client-by-O-RU SE matrix.

    ``since_last_sample`` is the time already elapsed since each window's
    newest sample, so the prediction targets ``now + horizon``.
    """
    pos = predict_many(predictor, windows, np.asarray(since_last_sample) + horizon)
    return pos, radio.se_matrix(pos, oru_positions, params)


def assign_clients(se: np.ndarray, previous: AssignmentPlan, hysteresis_margin: float) -> AssignmentPlan:
    """Keep each client's O-RU unless the best one beats it by more than the margin.

    Unassigned clients take the best O-RU; ties go to the lowest O-RU index.
    """
    se = np.asarray(se, dtype=float)
    best = np.argmax(se, axis=1)
    prev = np.asarray(previous.oru)
    out = prev.copy()
    handovers = []
    for c in range(len(se)):
        if prev[c] < 0:
            out[c] = best[c]
        elif best[c] != prev[c] and se[c, best[c]] - se[c, prev[c]] > hysteresis_margin:
            out[c] = best[c]
            handovers.append((c, int(prev[c]), int(best[c])))
    return AssignmentPlan(out, handovers)


def compute_load(assignment: np.ndarray, service_of: np.ndarray, remaining_bits: np.ndarray,
                 active: np.ndarray, se: np.ndarray, oru_bandwidths: np.ndarray,
                 n_services: int) -> np.ndarray:
    """``K[o, s] = (n_os / B_o) * sum(L_c / se_c,o)`` over active clients of ``s`` at ``o``.

    ``K / f`` is then the summed upload latency of slice ``(o, s)`` when its
    ``n_os`` clients share ``f * B_o`` equally.
    """
    n_oru = len(oru_bandwidths)
    K = np.zeros((n_oru, n_services))
    count = np.zeros((n_oru, n_services))
    for c in np.flatnonzero(active):
        o, s = assignment[c], service_of[c]
        if o < 0 or s < 0:
            continue
        K[o, s] += remaining_bits[c] / max(se[c, o], SE_FLOOR)
        count[o, s] += 1
    return count * K / np.asarray(oru_bandwidths, dtype=float)[:, None]


def slice_split(weights, K, f_min: float = 0.0, objective: str = "sum") -> np.ndarray:
    """Bandwidth fractions for the slices of one O-RU.

    Minimises ``sum(a * K / f)`` (or ``max`` with ``objective="max"``) over
    ``sum(f) = 1``, ``f >= f_min`` for slices with load and ``f = 0`` for
    slices without.
    """
    a = np.asarray(weights, dtype=float)
    K = np.asarray(K, dtype=float)
    f = np.zeros(len(K))
    active = np.flatnonzero(K > 0)
    if len(active) == 0:
        return f
    if f_min * len(active) > 1 + 1e-12:
        raise InfeasibleSplitError(
            f"f_min={f_min} with {len(active)} active slices exceeds the band")
    if objective == "max":
        return _split_max(a, K, f_min, active)
    if objective != "sum":
        raise ValueError(f"unknown objective {objective!r}")

    root = np.sqrt(a[active] * K[active])
    pinned = np.zeros(len(active), dtype=bool)
    while True:
        free = ~pinned
        budget = 1.0 - f_min * pinned.sum()
        share = np.where(free, budget * root / root[free].sum(), f_min)
        low = free & (share < f_min)
        if not low.any():
            break
        # shrinking the budget only pushes free shares lower, so pin all at once
        pinned |= low
    f[active] = share
    return f


def _split_max(a, K, f_min, active, iters: int = 200) -> np.ndarray:
    # equalise a*K/f = t across slices not held at the floor; bisect on t
    c = a[active] * K[active]
    lo = c.sum()
    hi = c.sum() / max(1.0 - f_min * len(c), 1e-12)
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        if np.maximum(f_min, c / mid).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    share = np.maximum(f_min, c / hi)
    f = np.zeros(len(K))
    f[active] = share / share.sum()
    return f


def split_all(weights, K: np.ndarray, f_min: float, objective: str = "sum") -> np.ndarray:
    return np.vstack([slice_split(weights, row, f_min, objective) for row in K]) \
        if len(K) else np.zeros((0, len(weights)))


def split_objective(weights, K, f) -> float:
    a = np.asarray(weights, dtype=float)
    K = np.asarray(K, dtype=float)
    f = np.asarray(f, dtype=float)
    m = K > 0
    return float(np.sum(a[m] * K[m] / f[m]))


def make_slice_requests(allocation: SliceAllocation, services) -> list[SliceRequest]:
    """One request per service carrying its per-O-RU bandwidth, deadline and weight."""
    if allocation.fractions.size == 0 or allocation.n_services == 0:
        return []
    return [SliceRequest(s.service_id, allocation.bandwidth[:, j].copy(), s.deadline, s.weight)
            for j, s in enumerate(services)]
