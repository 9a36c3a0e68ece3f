"""Feedforward softmax classifier, SGD, FedAvg, and a flat checkpoint format.

Checkpoint layout (all little-endian)::

    uint32  n_sizes
    uint32  layer_sizes[n_sizes]
    float64 W0 (row-major, in x out), b0, W1, b1, ...
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import Dataset


class AggregationError(ValueError):
    pass


@dataclass
class ModelParams:
    weights: list[np.ndarray]  # weights[i] has shape (sizes[i], sizes[i + 1])
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases disagree on layer count")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} does not chain")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "ModelParams":
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> "ModelParams":
        return ModelParams([w.astype(dtype) for w in self.weights],
                           [b.astype(dtype) for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def init_model(layer_sizes, rng: np.random.Generator) -> ModelParams:
    """He-initialised weights, zero biases."""
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    ws = [rng.standard_normal((a, b)) * np.sqrt(2.0 / a) for a, b in zip(sizes[:-1], sizes[1:])]
    return ModelParams(ws, [np.zeros(b) for b in sizes[1:]])


def zeros_like(model: ModelParams) -> ModelParams:
    return ModelParams.from_arrays([np.zeros_like(a) for a in model.arrays()])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def activations(model: ModelParams, x: np.ndarray) -> list[np.ndarray]:
    """Layer outputs from the input through the raw (pre-softmax) output.

    Hidden layers use ReLU; the last layer is linear.
    """
    acts = [x]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == last else np.maximum(z, 0))
    return acts


def forward(model: ModelParams, features: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample."""
    x = np.atleast_2d(features)
    return softmax(activations(model, x)[-1])


def cross_entropy(model: ModelParams, features: np.ndarray, labels: np.ndarray) -> float:
    p = forward(model, features)
    picked = p[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(p.dtype).tiny))))


def backprop(model: ModelParams, acts: list[np.ndarray], delta: np.ndarray) -> ModelParams:
    """Parameter gradients given d(loss)/d(raw output) for a forward pass."""
    gw, gb = [], []
    for i in range(len(model.weights) - 1, -1, -1):
        gw.append(acts[i].T @ delta)
        gb.append(delta.sum(axis=0))
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return ModelParams(gw[::-1], gb[::-1])


def compute_gradients(model: ModelParams, features: np.ndarray,
                      labels: np.ndarray) -> ModelParams:
    """Backprop of mean cross-entropy; returned in the model's own layout."""
    acts = activations(model, np.atleast_2d(features))
    n = len(labels)
    delta = softmax(acts[-1])
    delta[np.arange(n), labels] -= 1.0
    return backprop(model, acts, delta / n)


@dataclass(frozen=True)
class TrainConfig:
    local_iterations: int = 30
    learning_rate: float = 0.05
    batch_size: int = 32

    def __post_init__(self):
        if self.local_iterations < 0:
            raise ValueError("local_iterations must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def local_train(model: ModelParams, shard: Dataset, config: TrainConfig,
                rng: np.random.Generator) -> ModelParams:
    """Mini-batch SGD with batches drawn uniformly (with replacement) from the shard."""
    out = model.copy()
    if len(shard) == 0 or config.local_iterations == 0 or config.learning_rate == 0:
        return out
    for _ in range(config.local_iterations):
        idx = rng.integers(0, len(shard), size=config.batch_size)
        g = compute_gradients(out, shard.features[idx], shard.labels[idx])
        for p, dp in zip(out.arrays(), g.arrays()):
            p -= config.learning_rate * dp
    return out


def fedavg(models: list[ModelParams], weights) -> ModelParams:
    """Coordinate-wise weighted mean; weights are normalised to sum to one."""
    if not models:
        raise AggregationError("no models to aggregate")
    w = np.asarray(weights, dtype=float)
    if len(w) != len(models):
        raise AggregationError("one weight per model required")
    if (w < 0).any() or w.sum() <= 0:
        raise AggregationError("weights must be non-negative and not all zero")
    w = w / w.sum()
    shapes = [a.shape for a in models[0].arrays()]
    for m in models[1:]:
        if [a.shape for a in m.arrays()] != shapes:
            raise AggregationError("models have different shapes")
    out = []
    for j in range(len(shapes)):
        acc = np.zeros(shapes[j])
        for wi, m in zip(w, models):
            if wi:
                acc += wi * m.arrays()[j]
        out.append(acc)
    return ModelParams.from_arrays(out)


def predict(model: ModelParams, features: np.ndarray) -> np.ndarray:
    # argmax breaks ties toward the lowest class index
    return np.argmax(forward(model, features), axis=1)


def evaluate(model: ModelParams, test: Dataset) -> float:
    if len(test) == 0:
        return 0.0
    return float(np.mean(predict(model, test.features) == test.labels))


def payload_bits(model: ModelParams, bits_per_param: int = 32) -> int:
    return bits_per_param * model.n_params


def to_bytes(model: ModelParams) -> bytes:
    sizes = model.layer_sizes
    head = struct.pack(f"<I{len(sizes)}I", len(sizes), *sizes)
    return head + model.flat().astype("<f8").tobytes()


def from_bytes(blob: bytes) -> ModelParams:
    (n,) = struct.unpack_from("<I", blob, 0)
    sizes = struct.unpack_from(f"<{n}I", blob, 4)
    flat = np.frombuffer(blob, dtype="<f8", offset=4 + 4 * n).astype(float)
    arrays, pos = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        arrays.append(flat[pos:pos + a * b].reshape(a, b))
        pos += a * b
        arrays.append(flat[pos:pos + b].copy())
        pos += b
    if pos != len(flat):
        raise ValueError(f"checkpoint holds {len(flat)} values, header implies {pos}")
    return ModelParams.from_arrays(arrays)


def save(model: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path) -> ModelParams:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
