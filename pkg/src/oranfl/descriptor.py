"""Non-RT system descriptor: client/service registry and the mobility eApp."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, activations, backprop, init_model

log = logging.getLogger(__name__)


class RegistrationError(ValueError):
    pass


class HistoryOrderError(ValueError):
    pass


@dataclass
class ClientDescriptor:
    client_id: int
    dataset_type: str
    dataset_size: int
    compute_time_per_iteration: float
    position_history: list[tuple[float, float, float]] = field(default_factory=list)
    current_oru: int | None = None

    def __post_init__(self):
        if self.compute_time_per_iteration <= 0:
            raise ValueError("compute_time_per_iteration must be > 0")

    def append_position(self, t: float, position) -> None:
        if self.position_history and t <= self.position_history[-1][0]:
            raise HistoryOrderError(
                f"client {self.client_id}: timestamp {t} not after {self.position_history[-1][0]}")
        self.position_history.append((float(t), float(position[0]), float(position[1])))

    def recent_positions(self, k: int) -> np.ndarray:
        return np.array([(x, y) for _, x, y in self.position_history[-k:]], dtype=float)


@dataclass
class ServiceDescriptor:
    service_id: int
    dataset_type: str
    deadline: float
    weight: float
    target_accuracy: float = 1.0
    recruitment_budget: float = 0.0
    recruited_clients: set[int] = field(default_factory=set)

    def __post_init__(self):
        if self.deadline <= 0:
            raise ValueError("deadline must be > 0")
        if self.weight <= 0:
            raise ValueError("weight must be > 0")
        if not 0 < self.target_accuracy <= 1:
            raise ValueError("target_accuracy must be in (0, 1]")


class Registry:
    def __init__(self):
        self.clients: dict[int, ClientDescriptor] = {}
        self.services: dict[int, ServiceDescriptor] = {}

    def register_client(self, desc: ClientDescriptor) -> int:
        if desc.client_id in self.clients:
            raise RegistrationError(f"client {desc.client_id} already registered")
        self.clients[desc.client_id] = desc
        return desc.client_id

    def register_service(self, desc: ServiceDescriptor) -> int:
        if desc.service_id in self.services:
            raise RegistrationError(f"service {desc.service_id} already registered")
        self.services[desc.service_id] = desc
        return desc.service_id

    def client(self, client_id: int) -> ClientDescriptor:
        return self.clients[client_id]

    def service(self, service_id: int) -> ServiceDescriptor:
        return self.services[service_id]

    def dump(self, path) -> None:
        """One JSON object per line: ``{"kind": "client"|"service", ...fields}``."""
        with open(path, "w") as fh:
            for c in self.clients.values():
                fh.write(json.dumps({
                    "kind": "client", "client_id": c.client_id,
                    "dataset_type": c.dataset_type, "dataset_size": c.dataset_size,
                    "compute_time_per_iteration": c.compute_time_per_iteration,
                    "current_oru": c.current_oru,
                    "position_history": [list(p) for p in c.position_history],
                }) + "\n")
            for s in self.services.values():
                fh.write(json.dumps({
                    "kind": "service", "service_id": s.service_id,
                    "dataset_type": s.dataset_type, "deadline": s.deadline,
                    "weight": s.weight, "target_accuracy": s.target_accuracy,
                    "recruitment_budget": s.recruitment_budget,
                    "recruited_clients": sorted(s.recruited_clients),
                }) + "\n")


def record_positions(registry: Registry, t: float, positions) -> None:
    """Append ``(t, position)`` to every client's history (clients in id order).

    A stale timestamp is rejected before any history is touched.
    """
    ids = sorted(registry.clients)
    for cid in ids:
        hist = registry.clients[cid].position_history
        if hist and t <= hist[-1][0]:
            raise HistoryOrderError(f"timestamp {t} not after {hist[-1][0]} (client {cid})")
    for row, cid in enumerate(ids):
        registry.clients[cid].append_position(t, positions[row])


def recruit(clients: list[ClientDescriptor],
            services: list[ServiceDescriptor]) -> dict[int, set[int]]:
    """Assign each client to the first service (by id) accepting its dataset type."""
    out = {s.service_id: set() for s in services}
    by_type: dict[str, int] = {}
    for s in sorted(services, key=lambda s: s.service_id):
        by_type.setdefault(s.dataset_type, s.service_id)
    for c in clients:
        sid = by_type.get(c.dataset_type)
        if sid is None:
            log.info("client %s (%s) matches no service; left unrecruited",
                     c.client_id, c.dataset_type)
            continue
        out[sid].add(c.client_id)
    for s in services:
        s.recruited_clients = set(out[s.service_id])
    return out


@dataclass
class MobilityPredictor:
    """Shared position predictor.

    Input features are the latest normalised position followed by the
    ``k - 1`` most recent per-sample displacements divided by ``step_scale``;
    the network outputs the displacement ``horizon`` seconds past the last
    sample, in the same scaled units. With ``network=None`` it falls back to
    linear extrapolation from the last two positions.
    """
    network: ModelParams | None
    k: int
    horizon: float
    sample_period: float
    box: tuple[float, float, float, float]
    step_scale: float = 1.0
    trained: bool = False
    final_mse: float = float("nan")

    @property
    def is_fallback(self) -> bool:
        return self.network is None


def fallback_predictor(k: int, horizon: float, sample_period: float, box) -> MobilityPredictor:
    return MobilityPredictor(None, k, horizon, sample_period, tuple(box))


def _span(box) -> np.ndarray:
    return np.maximum(np.array([box[2] - box[0], box[3] - box[1]], dtype=float), 1e-12)


def _features(windows: np.ndarray, box, step_scale: float) -> np.ndarray:
    """``windows`` is ``(n, k, 2)`` in metres."""
    lo = np.array(box[:2], dtype=float)
    span = _span(box)
    norm = (windows - lo) / span
    last = norm[:, -1, :]
    steps = np.diff(norm, axis=1) / step_scale
    return np.concatenate([last, steps.reshape(len(windows), -1)], axis=1)


def training_pairs(histories, k: int, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """Windows of ``k`` consecutive samples and the position ``horizon`` after the last."""
    xs, ys = [], []
    for hist in histories:
        if len(hist) < k + 1:
            continue
        t = np.array([h[0] for h in hist])
        p = np.array([(h[1], h[2]) for h in hist])
        for end in range(k - 1, len(hist)):
            j = np.searchsorted(t, t[end] + horizon - 1e-9)
            if j < len(t) and abs(t[j] - (t[end] + horizon)) < 1e-9:
                xs.append(p[end - k + 1:end + 1])
                ys.append(p[j])
    if not xs:
        return np.zeros((0, k, 2)), np.zeros((0, 2))
    return np.array(xs), np.array(ys)


def train_eapp(histories, k: int, horizon: float, epochs: int, rng: np.random.Generator,
               box, sample_period: float, hidden=(32, 32), learning_rate: float = 0.01,
               batch_size: int = 32) -> tuple[MobilityPredictor, bool]:
    """Fit the shared predictor by mini-batch SGD on MSE.

    Returns ``(predictor, flagged)``; ``flagged`` is True when no training
    happened (no usable pairs, which yields the fallback, or ``epochs == 0``,
    which yields the untrained network).
    """
    windows, targets = training_pairs(histories, k, horizon)
    if len(windows) == 0:
        log.info("eApp: no usable training pairs, using linear extrapolation")
        return fallback_predictor(k, horizon, sample_period, box), True

    span = _span(box)
    lo = np.array(box[:2], dtype=float)
    disp = (targets - windows[:, -1, :]) / span
    rms = float(np.sqrt(np.mean(disp ** 2)))
    step_scale = rms if rms > 0 else 1.0
    x = _features(windows, box, step_scale)
    y = disp / step_scale

    net = init_model([x.shape[1], *hidden, 2], rng)
    # start from the zero-displacement guess
    net.weights[-1][:] = 0.0
    pred = MobilityPredictor(net, k, horizon, sample_period, tuple(box), step_scale)
    if epochs == 0:
        pred.final_mse = _mse(pred, x, targets, windows, lo, span)
        return pred, True

    n = len(x)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            b = order[start:start + batch_size]
            acts = activations(net, x[b])
            delta = 2.0 * (acts[-1] - y[b]) / y[b].size
            g = backprop(net, acts, delta)
            for p, dp in zip(net.arrays(), g.arrays()):
                p -= learning_rate * dp
    pred.trained = True
    pred.final_mse = _mse(pred, x, targets, windows, lo, span)
    return pred, False


def _mse(pred, x, targets, windows, lo, span) -> float:
    out = activations(pred.network, x)[-1] * pred.step_scale
    guess = (windows[:, -1, :] - lo) / span + out
    return float(np.mean((guess - (targets - lo) / span) ** 2))


def predict_displacement(predictor: MobilityPredictor, recent: np.ndarray) -> np.ndarray:
    """Displacement over ``predictor.horizon`` for a batch ``(n, k, 2)`` of windows."""
    recent = np.asarray(recent, dtype=float)
    if predictor.is_fallback:
        if recent.shape[1] < 2:
            return np.zeros((len(recent), 2))
        velocity = (recent[:, -1] - recent[:, -2]) / predictor.sample_period
        return velocity * predictor.horizon
    x = _features(recent, predictor.box, predictor.step_scale)
    return activations(predictor.network, x)[-1] * predictor.step_scale * _span(predictor.box)


def clamp(points: np.ndarray, box) -> np.ndarray:
    lo = np.array(box[:2], dtype=float)
    hi = np.array(box[2:], dtype=float)
    return np.clip(points, lo, hi)


def predict_position(predictor: MobilityPredictor, recent, horizon: float) -> np.ndarray:
    """Position ``horizon`` seconds after the last of the ``k`` recent samples.

    Horizons other than the predictor's own scale its displacement linearly.
    """
    recent = np.asarray(recent, dtype=float)
    if recent.shape != (predictor.k, 2):
        raise ValueError(f"expected {predictor.k} recent positions, got shape {recent.shape}")
    disp = predict_displacement(predictor, recent[None])[0] * (horizon / predictor.horizon)
    return clamp(recent[-1] + disp, predictor.box)


def predict_many(predictor: MobilityPredictor, recent: np.ndarray,
                 horizons: np.ndarray | float) -> np.ndarray:
    """Vectorised :func:`predict_position` for ``(n, k, 2)`` windows."""
    disp = predict_displacement(predictor, recent)
    scale = np.asarray(horizons, dtype=float) / predictor.horizon
    return clamp(recent[:, -1] + disp * np.reshape(scale, (-1, 1)), predictor.box)
