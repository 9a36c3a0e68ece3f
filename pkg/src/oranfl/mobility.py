"""Truncated Levy-walk mobility with specular reflection at the area bounds."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class LevyParams:
    tail_exponent: float = 1.5
    min_flight: float = 1.0
    max_flight: float = 100.0
    speed: float = 1.5

    def __post_init__(self):
        if self.tail_exponent <= 0:
            raise ValueError("tail_exponent must be > 0")
        if not 0 < self.min_flight <= self.max_flight:
            raise ValueError("need 0 < min_flight <= max_flight")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")


@dataclass(frozen=True)
class ClientMotion:
    position: tuple[float, float]
    heading: float
    flight_remaining: float


Bounds = tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


def truncated_pareto_ppf(u, params: LevyParams):
    """Inverse CDF of the Pareto law truncated to ``[min_flight, max_flight]``."""
    a, lo, hi = params.tail_exponent, params.min_flight, params.max_flight
    span = 1.0 - (lo / hi) ** a
    x = lo * (1.0 - np.asarray(u, dtype=float) * span) ** (-1.0 / a)
    # rounding can push the top end a hair over max_flight
    x = np.clip(x, lo, hi)
    return float(x) if np.ndim(x) == 0 else x


def truncated_pareto_mean(params: LevyParams) -> float:
    """Closed-form mean of the truncated Pareto flight length."""
    a, lo, hi = params.tail_exponent, params.min_flight, params.max_flight
    if lo == hi:
        return lo
    norm = 1.0 - (lo / hi) ** a
    if a == 1.0:
        return lo * np.log(hi / lo) / norm
    return a * lo**a * (hi ** (1 - a) - lo ** (1 - a)) / ((1 - a) * norm)


def sample_flight_length(rng: np.random.Generator, params: LevyParams, size=None):
    return truncated_pareto_ppf(rng.random(size), params)


def _reflect(x: float, v: float, lo: float, hi: float) -> tuple[float, float]:
    """Fold coordinate ``x`` into ``[lo, hi]``, flipping velocity sign per bounce."""
    if lo <= x <= hi:
        return x, v
    width = hi - lo
    if width <= 0:
        return lo, v
    y = (x - lo) % (2.0 * width)
    bounces = int(np.floor((x - lo) / width))
    if y > width:
        y = 2.0 * width - y
    if bounces % 2:
        v = -v
    return lo + y, v


def _advance(x, y, heading, dist, bounds: Bounds):
    dx = np.cos(heading)
    dy = np.sin(heading)
    nx, rx = _reflect(x + dist * dx, dx, bounds[0], bounds[2])
    ny, ry = _reflect(y + dist * dy, dy, bounds[1], bounds[3])
    if rx != dx or ry != dy:
        heading = float(np.arctan2(ry, rx))
    return nx, ny, heading


def step(motion: ClientMotion, dt: float, bounds: Bounds, params: LevyParams,
         rng: np.random.Generator) -> ClientMotion:
    """Advance one client by ``dt`` seconds.

    Exhausted flights draw a fresh uniform heading then a fresh flight length,
    in that order, and the rest of ``dt`` continues on the new flight.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if params.speed == 0 or dt == 0:
        return motion

    x, y = motion.position
    heading = motion.heading
    remaining = motion.flight_remaining
    travel_left = params.speed * dt
    while travel_left > 0:
        if remaining <= 0:
            heading = rng.uniform(0.0, 2.0 * np.pi)
            remaining = sample_flight_length(rng, params)
        leg = min(travel_left, remaining)
        x, y, heading = _advance(x, y, heading, leg, bounds)
        remaining -= leg
        travel_left -= leg
    return replace(motion, position=(float(x), float(y)), heading=heading,
                   flight_remaining=max(remaining, 0.0))


def initial_motion(rng: np.random.Generator, bounds: Bounds, params: LevyParams) -> ClientMotion:
    x = rng.uniform(bounds[0], bounds[2])
    y = rng.uniform(bounds[1], bounds[3])
    heading = rng.uniform(0.0, 2.0 * np.pi)
    return ClientMotion((float(x), float(y)), float(heading),
                        float(sample_flight_length(rng, params)))


class LevyWalkers:
    """Array-backed population of walkers.

    ``advance`` produces exactly the trajectories of calling :func:`step` on
    each client in index order with the same generator; the common case of a
    flight that outlasts the step is handled without a Python loop.
    """

    def __init__(self, motions: list[ClientMotion], bounds: Bounds, params: LevyParams,
                 rng: np.random.Generator):
        self.bounds = bounds
        self.params = params
        self.rng = rng
        self.positions = np.array([m.position for m in motions], dtype=float).reshape(-1, 2)
        self.headings = np.array([m.heading for m in motions], dtype=float)
        self.remaining = np.array([m.flight_remaining for m in motions], dtype=float)

    @classmethod
    def random(cls, n: int, bounds: Bounds, params: LevyParams, rng: np.random.Generator):
        return cls([initial_motion(rng, bounds, params) for _ in range(n)], bounds, params, rng)

    def motion(self, i: int) -> ClientMotion:
        return ClientMotion(tuple(map(float, self.positions[i])), float(self.headings[i]),
                            float(self.remaining[i]))

    def advance(self, dt: float) -> None:
        speed = self.params.speed
        if speed == 0 or dt == 0 or len(self.headings) == 0:
            return
        travel = speed * dt
        xmin, ymin, xmax, ymax = self.bounds
        simple = self.remaining > travel
        if simple.any():
            idx = np.flatnonzero(simple)
            dx = np.cos(self.headings[idx])
            dy = np.sin(self.headings[idx])
            nx = self.positions[idx, 0] + travel * dx
            ny = self.positions[idx, 1] + travel * dy
            inside = (nx >= xmin) & (nx <= xmax) & (ny >= ymin) & (ny <= ymax)
            ok = idx[inside]
            self.positions[ok, 0] = nx[inside]
            self.positions[ok, 1] = ny[inside]
            self.remaining[ok] -= travel
            simple[idx[~inside]] = False
        # bounces and flight changes go through the scalar path, in index order
        for i in np.flatnonzero(~simple):
            m = step(self.motion(i), dt, self.bounds, self.params, self.rng)
            self.positions[i] = m.position
            self.headings[i] = m.heading
            self.remaining[i] = m.flight_remaining
