"""Datasets for the FL workload: IDX files, synthetic blobs, Dirichlet shards."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


class DatasetConsistencyError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n_samples, n_features), values in [0, 1]
    labels: np.ndarray  # (n_samples,), ints in [0, n_classes)
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetConsistencyError("features must be 2-D")
        if len(self.features) != len(self.labels):
            raise DatasetConsistencyError(
                f"{len(self.features)} feature rows but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DatasetConsistencyError("labels outside [0, n_classes)")

    def __len__(self):
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path, expected_magic: int) -> np.ndarray:
    with _open(path) as fh:
        head = fh.read(4)
        if len(head) < 4:
            raise IdxFormatError(f"{path}: truncated header")
        (magic,) = struct.unpack(">I", head)
        if magic != expected_magic:
            raise IdxFormatError(
                f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
        ndim = magic & 0xFF
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        raw = fh.read()
    count = int(np.prod(dims))
    if len(raw) != count:
        raise IdxFormatError(f"{path}: {len(raw)} data bytes, header promises {count}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (1-D labels or 3-D images)."""
    arr = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | arr.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def avg_pool(images: np.ndarray, side: int) -> np.ndarray:
    """Average-pool square images ``(n, s, s)`` down to ``(n, side, side)``.

    ``s`` must be a multiple of ``side``.
    """
    n, h, w = images.shape
    if h != w or h % side:
        raise ValueError(f"cannot pool {h}x{w} images to {side}x{side}")
    f = h // side
    return images.reshape(n, side, f, side, f).mean(axis=(2, 4))


def load_idx(images_path, labels_path, pool_to: int | None = None,
             n_classes: int | None = None) -> Dataset:
    images = _read_idx(images_path, IMAGE_MAGIC).astype(float) / 255.0
    labels = _read_idx(labels_path, LABEL_MAGIC).astype(np.int64)
    if images.ndim != 3:
        raise IdxFormatError(f"{images_path}: expected 3-D image array")
    if len(images) != len(labels):
        raise DatasetConsistencyError(
            f"{images_path} has {len(images)} images but {labels_path} has {len(labels)} labels")
    if pool_to is not None and pool_to != images.shape[1]:
        images = avg_pool(images, pool_to)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if len(labels) else 1
    return Dataset(images.reshape(len(images), -1), labels, n_classes)


def class_centres(n_classes: int, n_features: int, separation: float, noise_std: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Blob centres with pairwise distance ``separation * noise_std``.

    Centres are offsets along orthonormal directions around 0.5, so they are
    mutually equidistant.
    """
    if n_classes > n_features:
        raise ValueError("need n_features >= n_classes for equidistant centres")
    q, _ = np.linalg.qr(rng.standard_normal((n_features, n_classes)))
    radius = separation * noise_std / np.sqrt(2.0)
    return 0.5 + radius * q.T


def synth_dataset(n_classes: int, n_per_class: int, n_features: int, rng: np.random.Generator,
                  separation: float = 10.0, noise_std: float = 0.1,
                  centres: np.ndarray | None = None) -> Dataset:
    """Gaussian blobs, one per class, clipped to [0, 1] and sorted by label.

    Pass ``centres`` to draw a second split (e.g. a test set) from the same blobs.
    """
    if min(n_classes, n_per_class, n_features) < 1:
        raise ValueError("all counts must be >= 1")
    if centres is None:
        centres = class_centres(n_classes, n_features, separation, noise_std, rng)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    x = centres[labels] + noise_std * rng.standard_normal((len(labels), n_features))
    return Dataset(np.clip(x, 0.0, 1.0), labels, n_classes)


def log_gamma_sample(rng: np.random.Generator, shape: float, size) -> np.ndarray:
    """Logarithm of Gamma(shape, 1) draws, stable for tiny shapes.

    For shape < 1, uses G(a) = G(a + 1) * U ** (1 / a) in log space, which
    avoids the underflow that makes plain draws collapse to zero at a ~ 0.01.
    """
    if shape >= 1:
        return np.log(rng.gamma(shape, 1.0, size))
    g = rng.gamma(shape + 1.0, 1.0, size)
    u = rng.random(size)
    return np.log(g) + np.log(u) / shape


def dirichlet_sample(rng: np.random.Generator, alpha: float, k: int) -> np.ndarray:
    """Symmetric Dirichlet(alpha * 1_k) point via normalised Gamma draws."""
    logs = log_gamma_sample(rng, alpha, k)
    logs -= logs.max()
    w = np.exp(logs)
    return w / w.sum()


@dataclass(frozen=True)
class PartitionSpec:
    alpha: float
    n_clients: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")


def dirichlet_partition(dataset: Dataset, spec: PartitionSpec,
                        rng: np.random.Generator) -> list[np.ndarray]:
    """Split sample indices across clients, class by class, with Dirichlet shares.

    Shards are disjoint, cover every index, and may be empty when alpha is small.
    """
    if len(dataset) == 0:
        raise ValueError("cannot partition an empty dataset")
    shards: list[list[np.ndarray]] = [[] for _ in range(spec.n_clients)]
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if len(idx) == 0:
            continue
        idx = rng.permutation(idx)
        p = dirichlet_sample(rng, spec.alpha, spec.n_clients)
        cuts = (np.cumsum(p)[:-1] * len(idx)).astype(int)
        for k, part in enumerate(np.split(idx, cuts)):
            shards[k].append(part)
    return [np.sort(np.concatenate(s)) if s else np.zeros(0, dtype=np.int64) for s in shards]


def label_entropy(labels: np.ndarray, n_classes: int) -> float:
    """Shannon entropy (nats) of a label multiset; 0 for an empty one."""
    if len(labels) == 0:
        return 0.0
    p = np.bincount(labels, minlength=n_classes) / len(labels)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mean_shard_entropy(dataset: Dataset, shards: list[np.ndarray]) -> float:
    """Mean label entropy over non-empty shards."""
    ents = [label_entropy(dataset.labels[s], dataset.n_classes) for s in shards if len(s)]
    return float(np.mean(ents)) if ents else 0.0
