"""Per-slice FL MAC scheduler: gain-sorted greedy bandwidth assignment.

Every tick, clients of one slice are served in descending channel quality
with just enough bandwidth to finish by their deadline; whatever is left is
shared equally among the slice's uploading clients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from enum import Enum

import numpy as np


class Status(str, Enum):
    COMPUTING = "computing"
    UPLOADING = "uploading"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class UploadState:
    client_id: int
    bits_total: float
    bits_sent: float
    deadline_t: float
    status: Status = Status.UPLOADING

    @property
    def remaining(self) -> float:
        return self.bits_total - self.bits_sent


def required_bandwidth(upload: UploadState, se: float, now: float) -> float | None:
    """Bandwidth (Hz) that finishes the upload exactly at the deadline.

    ``None`` when no finite amount can: the deadline has passed or ``se <= 0``.
    """
    left = upload.deadline_t - now
    if left <= 0 or se <= 0:
        return None
    return upload.remaining / (left * se)


def greedy_split(remaining: np.ndarray, time_left: np.ndarray, se: np.ndarray,
                 W: float, order: np.ndarray) -> np.ndarray:
    """Two-pass allocation over clients already known to be uploading.

    ``order`` lists client positions in service order. Returns Hz per client.
    """
    n = len(order)
    alloc = np.zeros(len(remaining))
    if n == 0:
        return alloc
    left = float(W)
    for rank, i in enumerate(order):
        if time_left[i] <= 0 or se[i] <= 0:
            # unservable; only the last client in line mops up what remains
            give = left if rank == n - 1 else 0.0
        else:
            give = min(remaining[i] / (time_left[i] * se[i]), left)
        alloc[i] = give
        left -= give
    if left > 0:
        alloc[order] += left / n
    return conserve(alloc, W)


def conserve(alloc: np.ndarray, W: float) -> np.ndarray:
    """``alloc`` unchanged if its exact sum fits in ``W``, else nudged down ulp by ulp until it does."""
    if math.fsum(alloc) <= W * (1 - 1e-12):
        return alloc
    while sum(Fraction(float(a)) for a in alloc) > Fraction(float(W)):
        alloc = np.nextafter(alloc, 0.0)
    return alloc


def service_order(se: np.ndarray, ids: np.ndarray, gains: np.ndarray | None = None,
                  remaining: np.ndarray | None = None, time_left: np.ndarray | None = None,
                  rule: str = "gain") -> np.ndarray:
    """Indices in service order: best gain first, ties to the lowest client id.

    ``rule="cheapest"`` orders by ascending required bandwidth instead.
    """
    key = se if gains is None else gains
    if rule == "gain":
        return np.lexsort((ids, -np.asarray(key, dtype=float)))
    if rule == "cheapest":
        with np.errstate(divide="ignore", invalid="ignore"):
            req = np.where((time_left > 0) & (se > 0), remaining / (time_left * se), np.inf)
        return np.lexsort((ids, req))
    raise ValueError(f"unknown service order {rule!r}")


def schedule(uploads: list[UploadState], W_slice: float, se, now: float,
             gains=None, rule: str = "gain") -> dict[int, float]:
    """Allocate ``W_slice`` Hz among one slice's clients for the current tick.

    ``se`` (and optional ``gains``) map client id to the predicted value.
    Clients that are not uploading get nothing and are omitted.
    """
    if W_slice < 0:
        raise ValueError("W_slice must be >= 0")
    active = [u for u in uploads if u.status == Status.UPLOADING]
    if not active:
        return {}
    ids = np.array([u.client_id for u in active])
    s = np.array([se[u.client_id] for u in active], dtype=float)
    g = None if gains is None else np.array([gains[u.client_id] for u in active], dtype=float)
    rem = np.array([u.remaining for u in active], dtype=float)
    tl = np.array([u.deadline_t - now for u in active], dtype=float)
    order = service_order(s, ids, g, rem, tl, rule)
    alloc = greedy_split(rem, tl, s, W_slice, order)
    return {int(c): float(a) for c, a in zip(ids, alloc)}


def apply_allocation(uploads: list[UploadState], allocation: dict[int, float], se,
                     now: float, dt: float = 0.010) -> list[UploadState]:
    """Advance transmissions over ``[now, now + dt]``.

    Bits sent after the deadline do not count; an upload still short when the
    deadline falls inside the tick fails.
    """
    out = []
    for u in uploads:
        if u.status != Status.UPLOADING:
            out.append(u)
            continue
        usable = min(dt, max(u.deadline_t - now, 0.0))
        sent = u.bits_sent + se[u.client_id] * allocation.get(u.client_id, 0.0) * usable
        if sent >= u.bits_total:
            out.append(replace(u, bits_sent=u.bits_total, status=Status.DONE))
        elif now + dt >= u.deadline_t:
            out.append(replace(u, bits_sent=sent, status=Status.FAILED))
        else:
            out.append(replace(u, bits_sent=sent))
    return out
