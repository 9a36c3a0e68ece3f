import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oranfl import radio
from oranfl.controller import (AssignmentPlan, InfeasibleSplitError, SliceAllocation,
                               assign_clients, compute_load, make_slice_requests,
                               predict_state, slice_split, split_all, split_objective)
from oranfl.descriptor import fallback_predictor

BOX = (-600.0, -600.0, 600.0, 600.0)


def grid_oracle(aK, f_min):
    # exhaustive search over f1 at 1e-4 resolution for two slices
    f1 = np.arange(1, 10000) * 1e-4
    f1 = f1[(f1 >= f_min - 1e-12) & (1 - f1 >= f_min - 1e-12)]
    cost = aK[0] / f1 + aK[1] / (1 - f1)
    return f1[np.argmin(cost)]


def test_single_active_slice_takes_band():
    assert slice_split([30, 100], [0.0, 2.0]).tolist() == [0.0, 1.0]


def test_no_load_gives_zero():
    assert slice_split([1, 1], [0, 0]).tolist() == [0.0, 0.0]


def test_symmetric_split():
    assert np.allclose(slice_split([2, 1], [1, 2]), [0.5, 0.5])


@pytest.mark.parametrize("aK,f_min,expected", [((9, 1), 0.0, (0.75, 0.25)),
                                               ((1, 1e6), 0.05, (0.05, 0.95))])
def test_split_examples_against_grid(aK, f_min, expected):
    f = slice_split([1, 1], aK, f_min)
    assert abs(grid_oracle(aK, f_min) - expected[0]) <= 1e-4
    assert np.allclose(f, expected, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.0, 0.3))
def test_split_matches_grid(k1, k2, f_min):
    f = slice_split([1, 1], [k1, k2], f_min)
    assert abs(f[0] - grid_oracle((k1, k2), f_min)) <= 2e-4
    assert f.min() >= f_min - 1e-12 and abs(f.sum() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1e3), min_size=2, max_size=5), st.floats(0.1, 1e3))
def test_split_scale_invariant(K, c):
    a = np.ones(len(K))
    assert np.allclose(slice_split(a, K, 0.02), slice_split(a, np.array(K) * c, 0.02))


def test_split_monotone_in_weight():
    prev = 0.0
    for w in (1, 3, 10, 30, 100, 300):
        f = slice_split([30, w], [1.0, 1.0], 0.05)
        assert f[1] >= prev
        prev = f[1]


def test_split_is_optimal_among_perturbations(rng):
    a, K = np.array([30.0, 100.0, 5.0]), np.array([0.4, 0.1, 2.0])
    f = slice_split(a, K, 0.05)
    best = split_objective(a, K, f)
    for _ in range(200):
        d = rng.normal(0, 0.01, 3)
        g = f + d - d.mean()
        if g.min() >= 0.05:
            assert split_objective(a, K, g) >= best - 1e-12


def test_infeasible_floor():
    with pytest.raises(InfeasibleSplitError):
        slice_split([1, 1, 1], [1, 1, 1], 0.4)


def test_max_objective_equalises():
    a, K = np.array([1.0, 1.0]), np.array([9.0, 1.0])
    f = slice_split(a, K, 0.0, "max")
    assert np.allclose(f, [0.9, 0.1], atol=1e-9)
    with pytest.raises(ValueError):
        slice_split(a, K, 0.0, "median")


def test_split_all_rows():
    out = split_all([1, 1], np.array([[9, 1], [0, 0], [0, 5]]), 0.0)
    assert np.allclose(out, [[0.75, 0.25], [0, 0], [0, 1]])


def test_compute_load_examples():
    se = np.array([[2.0]])
    K = compute_load(np.array([0]), np.array([0]), np.array([1e6]), np.array([True]),
                     se, np.array([1.5e6]), 2)
    assert np.allclose(K, [[1 / 3, 0.0]])
    K2 = compute_load(np.array([0]), np.array([0]), np.array([2e6]), np.array([True]),
                      se, np.array([1.5e6]), 2)
    assert np.allclose(K2, 2 * K)
    empty = compute_load(np.array([], int), np.array([], int), np.array([]),
                         np.array([], bool), np.zeros((0, 1)), np.array([1.5e6]), 2)
    assert not empty.any()


def test_compute_load_doubles_with_bits_many_clients(rng):
    n = 12
    asg = rng.integers(0, 3, n)
    svc = rng.integers(0, 2, n)
    bits = rng.uniform(1e5, 1e6, n)
    se = rng.uniform(0.5, 10, (n, 3))
    args = (asg, svc)
    K1 = compute_load(*args, bits, np.ones(n, bool), se, np.full(3, 1.5e6), 2)
    K2 = compute_load(*args, 2 * bits, np.ones(n, bool), se, np.full(3, 1.5e6), 2)
    assert np.allclose(K2, 2 * K1)


def test_compute_load_zero_se_is_finite():
    K = compute_load(np.array([0]), np.array([0]), np.array([1e6]), np.array([True]),
                     np.array([[0.0]]), np.array([1.5e6]), 1)
    assert np.isfinite(K).all() and K[0, 0] > 0


def test_assign_single_oru():
    plan = assign_clients(np.ones((5, 1)), AssignmentPlan.empty(5), 0.1)
    assert plan.oru.tolist() == [0] * 5 and plan.handovers == []


@pytest.mark.parametrize("alt,moves", [(2.05, False), (2.5, True)])
def test_assign_hysteresis(alt, moves):
    prev = AssignmentPlan(np.array([0]))
    plan = assign_clients(np.array([[2.0, alt]]), prev, 0.1)
    assert (plan.oru[0] == 1) == moves
    assert plan.handovers == ([(0, 0, 1)] if moves else [])


def test_predict_state_client_at_oru():
    params = radio.RadioParams()
    sites = radio.build_hex_grid(1, 500.0, 1.5e6)
    oru = np.array([s.position for s in sites])
    fb = fallback_predictor(3, 3.0, 10.0, BOX)
    win = np.repeat(oru[:, None, :], 3, axis=1)
    pos, se = predict_state(fb, win, np.zeros(len(oru)), 3.0, oru, params)
    assert np.allclose(pos, oru)
    assert np.isfinite(se).all() and (np.argmax(se, axis=1) == np.arange(len(oru))).all()


def test_slice_requests():
    alloc = SliceAllocation.from_fractions(np.full((7, 2), 0.5), np.full(7, 1.5e6))

    class S:
        def __init__(self, sid):
            self.service_id, self.deadline, self.weight = sid, 30.0, 1.0

    reqs = make_slice_requests(alloc, [S(1), S(2)])
    assert len(reqs) == 2 and all(len(r.bandwidth) == 7 for r in reqs)
    assert np.allclose(reqs[0].bandwidth, 7.5e5)
    empty = SliceAllocation.from_fractions(np.zeros((0, 2)), np.zeros(0))
    assert make_slice_requests(empty, [S(1), S(2)]) == []
