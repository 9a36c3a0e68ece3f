import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oranfl import mobility
from oranfl.mobility import ClientMotion, LevyParams, LevyWalkers

BOUNDS = (-500.0, -433.0, 500.0, 433.0)


def _density_mean(p: LevyParams, n: int = 400_001) -> float:
    # trapezoid rule on a log grid, independent of the closed form
    x = np.geomspace(p.min_flight, p.max_flight, n)
    a, lo, hi = p.tail_exponent, p.min_flight, p.max_flight
    pdf = a * lo**a * x ** (-a - 1) / (1 - (lo / hi) ** a)
    f = x * pdf
    return float(np.sum((f[1:] + f[:-1]) * np.diff(x)) / 2)


def test_ppf_endpoints():
    p = LevyParams()
    assert mobility.truncated_pareto_ppf(0.0, p) == p.min_flight
    assert mobility.truncated_pareto_ppf(1.0, p) == pytest.approx(p.max_flight)


@given(st.floats(0, 1))
def test_flight_within_truncation(u):
    p = LevyParams()
    x = mobility.truncated_pareto_ppf(u, p)
    assert p.min_flight <= x <= p.max_flight


def test_closed_form_mean_matches_integral():
    for p in (LevyParams(), LevyParams(tail_exponent=1.0), LevyParams(tail_exponent=2.5,
                                                                      max_flight=50)):
        assert mobility.truncated_pareto_mean(p) == pytest.approx(_density_mean(p), rel=1e-6)


def test_sample_mean_within_two_percent():
    p = LevyParams(tail_exponent=1.5, min_flight=1.0, max_flight=100.0)
    x = mobility.sample_flight_length(np.random.default_rng(7), p, 1_000_000)
    assert abs(x.mean() / _density_mean(p) - 1) < 0.02


def test_survival_tail_slope():
    p = LevyParams(tail_exponent=1.5, min_flight=1.0, max_flight=100.0)
    x = np.sort(mobility.sample_flight_length(np.random.default_rng(11), p, 1_000_000))
    grid = np.geomspace(p.min_flight, p.max_flight / 2, 40)
    surv = 1.0 - np.searchsorted(x, grid, side="right") / len(x)
    slope = np.polyfit(np.log(grid), np.log(surv), 1)[0]
    assert abs(slope + p.tail_exponent) <= 0.15


def test_stationary_client_unchanged(rng):
    m = ClientMotion((1.0, 2.0), 0.3, 5.0)
    assert mobility.step(m, 1.0, BOUNDS, LevyParams(speed=0.0), rng) == m


def test_straight_line_kinematics(rng):
    m = ClientMotion((0.0, 0.0), 0.0, 10.0)
    out = mobility.step(m, 2.0, BOUNDS, LevyParams(speed=1.5), rng)
    assert out.position == pytest.approx((3.0, 0.0))
    assert out.flight_remaining == pytest.approx(7.0)


def test_reflection_at_wall(rng):
    m = ClientMotion((499.0, 0.0), 0.0, 50.0)
    out = mobility.step(m, 2.0, BOUNDS, LevyParams(speed=1.5), rng)
    # 1 m to the wall, 2 m back
    assert out.position == pytest.approx((498.0, 0.0))
    assert math.cos(out.heading) == pytest.approx(-1.0)


def test_exhausted_flight_continues_on_new_one(rng):
    m = ClientMotion((0.0, 0.0), 0.0, 1.0)
    p = LevyParams(min_flight=10.0, max_flight=10.0, speed=1.5)
    out = mobility.step(m, 2.0, BOUNDS, p, rng)
    # 1 m east, then the other 2 m on a fresh 10 m flight
    assert np.hypot(out.position[0] - 1.0, out.position[1]) == pytest.approx(2.0)
    assert out.flight_remaining == pytest.approx(8.0)


def test_negative_dt_rejected(rng):
    with pytest.raises(ValueError):
        mobility.step(ClientMotion((0.0, 0.0), 0.0, 1.0), -0.1, BOUNDS, LevyParams(), rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_steps_stay_inside_and_bounded(seed):
    rng = np.random.default_rng(seed)
    p = LevyParams(speed=30.0)
    m = mobility.initial_motion(rng, BOUNDS, p)
    dt = 0.5
    for _ in range(3000):
        nxt = mobility.step(m, dt, BOUNDS, p, rng)
        x, y = nxt.position
        assert BOUNDS[0] <= x <= BOUNDS[2] and BOUNDS[1] <= y <= BOUNDS[3]
        assert np.hypot(x - m.position[0], y - m.position[1]) <= p.speed * dt + 1e-9
        m = nxt


def test_vectorised_walkers_match_scalar_steps():
    p = LevyParams()
    a = LevyWalkers.random(20, BOUNDS, p, np.random.default_rng(3))
    rng = np.random.default_rng(3)
    motions = [mobility.initial_motion(rng, BOUNDS, p) for _ in range(20)]
    for _ in range(2000):
        a.advance(0.01)
        motions = [mobility.step(m, 0.01, BOUNDS, p, rng) for m in motions]
    assert np.array_equal(a.positions, np.array([m.position for m in motions]))


def test_trajectory_is_deterministic():
    p = LevyParams()
    runs = []
    for _ in range(2):
        w = LevyWalkers.random(5, BOUNDS, p, np.random.default_rng(99))
        for _ in range(500):
            w.advance(0.01)
        runs.append(w.positions.copy())
    assert np.array_equal(*runs)
