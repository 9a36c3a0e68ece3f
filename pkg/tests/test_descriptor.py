import json

import numpy as np
import pytest

from oranfl import descriptor as D
from oranfl.descriptor import ClientDescriptor, Registry, ServiceDescriptor

BOX = (-500.0, -433.0, 500.0, 433.0)


def _client(cid, dtype="mnist"):
    return ClientDescriptor(cid, dtype, 100, 0.1)


def test_register_and_lookup():
    reg = Registry()
    c = _client(3)
    reg.register_client(c)
    assert reg.client(3) is c
    s = ServiceDescriptor(1, "mnist", 30.0, 30.0, 0.9)
    reg.register_service(s)
    assert reg.service(1) is s


def test_duplicate_registration():
    reg = Registry()
    reg.register_client(_client(0))
    with pytest.raises(D.RegistrationError):
        reg.register_client(_client(0))
    reg.register_service(ServiceDescriptor(1, "mnist", 30.0, 30.0))
    with pytest.raises(D.RegistrationError):
        reg.register_service(ServiceDescriptor(1, "fashion", 20.0, 100.0))


def test_registry_sizes():
    reg = Registry()
    for i in range(32):
        reg.register_client(_client(i))
    reg.register_service(ServiceDescriptor(1, "mnist", 30.0, 30.0))
    reg.register_service(ServiceDescriptor(2, "fashion", 20.0, 100.0))
    assert (len(reg.clients), len(reg.services)) == (32, 2)


def test_descriptor_validation():
    with pytest.raises(ValueError):
        ClientDescriptor(0, "mnist", 1, 0.0)
    with pytest.raises(ValueError):
        ServiceDescriptor(1, "mnist", 0.0, 1.0)
    with pytest.raises(ValueError):
        ServiceDescriptor(1, "mnist", 1.0, -1.0)


def test_record_positions_every_ten_seconds():
    reg = Registry()
    for i in range(3):
        reg.register_client(_client(i))
    for t in range(0, 100, 10):
        D.record_positions(reg, float(t), np.full((3, 2), float(t)))
    assert all(len(c.position_history) == 10 for c in reg.clients.values())


def test_out_of_order_timestamp_rejected_atomically():
    reg = Registry()
    for i in range(3):
        reg.register_client(_client(i))
    D.record_positions(reg, 10.0, np.zeros((3, 2)))
    before = [list(c.position_history) for c in reg.clients.values()]
    with pytest.raises(D.HistoryOrderError):
        D.record_positions(reg, 10.0, np.ones((3, 2)))
    assert [c.position_history for c in reg.clients.values()] == before


def test_stationary_history_constant():
    reg = Registry()
    reg.register_client(_client(0))
    for t in range(5):
        D.record_positions(reg, t * 10.0, np.array([[4.0, 2.0]]))
    assert {p[1:] for p in reg.client(0).position_history} == {(4.0, 2.0)}


def test_recruit_by_dataset_type():
    clients = [_client(i, "mnist") for i in range(16)] + [_client(16, "cifar")]
    s1 = ServiceDescriptor(1, "mnist", 30.0, 30.0)
    s2 = ServiceDescriptor(2, "fashion", 20.0, 100.0)
    out = D.recruit(clients, [s1, s2])
    assert out[1] == set(range(16)) and out[2] == set()
    assert s1.recruited_clients == set(range(16))
    assert D.recruit([], [s1, s2]) == {1: set(), 2: set()}


def test_registry_dump_is_json_lines(tmp_path):
    reg = Registry()
    reg.register_client(_client(0))
    D.record_positions(reg, 0.0, np.array([[1.0, 2.0]]))
    reg.register_service(ServiceDescriptor(1, "mnist", 30.0, 30.0))
    path = tmp_path / "reg.jsonl"
    reg.dump(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["kind"] for r in rows] == ["client", "service"]
    assert rows[0]["position_history"] == [[0.0, 1.0, 2.0]]


def _histories(positions_fn, n_clients, n_samples, period=10.0):
    return [[(t * period, *positions_fn(c, t)) for t in range(n_samples)]
            for c in range(n_clients)]


def test_eapp_stationary_mse():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        spots = rng.uniform(-400, 400, (20, 2))
        hist = _histories(lambda c, t: spots[c], 20, 8)
        pred, flagged = D.train_eapp(hist, 3, 10.0, 200, rng, BOX, 10.0)
        assert not flagged and pred.trained
        assert pred.final_mse <= 1e-3


def test_eapp_network_has_four_layers():
    rng = np.random.default_rng(0)
    hist = _histories(lambda c, t: (c, 0.0), 4, 6)
    pred, _ = D.train_eapp(hist, 3, 10.0, 1, rng, BOX, 10.0)
    assert len(pred.network.layer_sizes) == 4
    assert pred.network.layer_sizes[-1] == 2


def test_eapp_zero_epochs_flagged():
    hist = _histories(lambda c, t: (c, 0.0), 4, 6)
    pred, flagged = D.train_eapp(hist, 3, 10.0, 0, np.random.default_rng(0), BOX, 10.0)
    assert flagged and not pred.trained and pred.network is not None


def test_eapp_no_pairs_falls_back():
    hist = _histories(lambda c, t: (c, 0.0), 4, 2)
    pred, flagged = D.train_eapp(hist, 3, 10.0, 10, np.random.default_rng(0), BOX, 10.0)
    assert flagged and pred.is_fallback


def test_eapp_beats_repeat_last_on_constant_velocity():
    rng = np.random.default_rng(4)
    start = rng.uniform(-300, 0, (30, 2))
    vel = rng.uniform(-1.5, 1.5, (30, 2))
    hist = _histories(lambda c, t: start[c] + vel[c] * 10 * t, 30, 10)
    pred, _ = D.train_eapp(hist, 3, 10.0, 200, rng, BOX, 10.0)
    win, target = D.training_pairs(hist, 3, 10.0)
    span = np.array([BOX[2] - BOX[0], BOX[3] - BOX[1]])
    repeat = np.mean(((win[:, -1] - target) / span) ** 2)
    assert pred.final_mse <= repeat


def test_eapp_deterministic():
    hist = _histories(lambda c, t: (c * 3.0 + t, -t * 0.5), 6, 8)
    a, _ = D.train_eapp(hist, 3, 10.0, 20, np.random.default_rng(1), BOX, 10.0)
    b, _ = D.train_eapp(hist, 3, 10.0, 20, np.random.default_rng(1), BOX, 10.0)
    assert np.array_equal(a.network.flat(), b.network.flat())


def test_fallback_examples():
    fb = D.fallback_predictor(2, 2.0, 1.0, BOX)
    assert D.predict_position(fb, [[5.0, 5.0], [5.0, 5.0]], 2.0).tolist() == [5.0, 5.0]
    assert D.predict_position(fb, [[0.0, 0.0], [1.0, 0.0]], 2.0).tolist() == [3.0, 0.0]


def test_prediction_clamped_to_bounds():
    fb = D.fallback_predictor(2, 10.0, 1.0, BOX)
    p = D.predict_position(fb, [[0.0, 0.0], [100.0, 100.0]], 10.0)
    assert BOX[0] <= p[0] <= BOX[2] and BOX[1] <= p[1] <= BOX[3]


def test_predict_position_needs_k_points():
    fb = D.fallback_predictor(3, 10.0, 10.0, BOX)
    with pytest.raises(ValueError):
        D.predict_position(fb, [[0.0, 0.0]], 10.0)


def test_predict_many_matches_scalar():
    rng = np.random.default_rng(2)
    hist = _histories(lambda c, t: (c * 10.0 + t, 5.0 * t), 8, 8)
    pred, _ = D.train_eapp(hist, 3, 10.0, 20, rng, BOX, 10.0)
    wins = rng.uniform(-100, 100, (5, 3, 2))
    many = D.predict_many(pred, wins, 3.0)
    for w, m in zip(wins, many):
        assert np.allclose(D.predict_position(pred, w, 3.0), m)
