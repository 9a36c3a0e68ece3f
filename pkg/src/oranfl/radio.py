"""Hexagonal O-RU deployment and a distance-driven uplink rate model.

Each O-RU owns an orthogonal band; there is no inter-cell interference.
Rates are linear in allocated bandwidth (noise scales with bandwidth), which
the controller's closed-form slice split relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OruSite:
    id: int
    position: tuple[float, float]
    total_bandwidth: float

    def __post_init__(self):
        if self.total_bandwidth <= 0:
            raise ValueError(f"O-RU {self.id}: total_bandwidth must be > 0")


@dataclass(frozen=True)
class RadioParams:
    reference_distance: float = 1.0
    path_loss_exponent: float = 3.0
    reference_snr: float = 1e6
    hysteresis_margin: float = 0.1
    shadowing_std_db: float = 0.0

    def __post_init__(self):
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be > 0")
        if self.path_loss_exponent < 2:
            raise ValueError("path_loss_exponent must be >= 2")
        if self.reference_snr <= 0:
            raise ValueError("reference_snr must be > 0")
        if self.hysteresis_margin < 0:
            raise ValueError("hysteresis_margin must be >= 0")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing_std_db must be >= 0")


@dataclass(frozen=True)
class LinkQuality:
    channel_gain: float
    spectral_efficiency: float


# axial hex directions, counter-clockwise starting east
_HEX_DIRS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def build_hex_grid(n_rings: int, inter_site_distance: float, bandwidth: float) -> list[OruSite]:
    """Sites on a hexagonal lattice, ring by ring outward from the origin.

    Site 0 is the centre. Ring ``k`` holds ``6k`` sites, so the grid has
    ``1 + 3 n (n + 1)`` sites; lattice neighbours sit exactly
    ``inter_site_distance`` apart.
    """
    if n_rings < 0:
        raise ValueError("n_rings must be >= 0")
    if inter_site_distance <= 0:
        raise ValueError("inter_site_distance must be > 0")

    axial = [(0, 0)]
    for ring in range(1, n_rings + 1):
        # start at a corner of the ring and walk its six sides
        q, r = ring * _HEX_DIRS[4][0], ring * _HEX_DIRS[4][1]
        for side in range(6):
            dq, dr = _HEX_DIRS[side]
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + dq, r + dr

    sites = []
    for i, (q, r) in enumerate(axial):
        x = inter_site_distance * (q + r / 2.0)
        y = inter_site_distance * (r * np.sqrt(3.0) / 2.0)
        sites.append(OruSite(i, (float(x), float(y)), float(bandwidth)))
    return sites


def site_positions(sites: list[OruSite]) -> np.ndarray:
    return np.array([s.position for s in sites], dtype=float).reshape(-1, 2)


def site_bandwidths(sites: list[OruSite]) -> np.ndarray:
    return np.array([s.total_bandwidth for s in sites], dtype=float)


def grid_bounds(sites: list[OruSite]) -> tuple[float, float, float, float]:
    """Bounding rectangle ``(xmin, ymin, xmax, ymax)`` of the site positions."""
    pos = site_positions(sites)
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    # a single site has a degenerate box; pad it to something walkable
    pad = np.where(hi - lo > 0, 0.0, 250.0)
    return (float(lo[0] - pad[0]), float(lo[1] - pad[1]),
            float(hi[0] + pad[0]), float(hi[1] + pad[1]))


def channel_gain(distance, params: RadioParams):
    """Log-distance path gain ``(d0 / max(d, d0)) ** eta``; 1 inside ``d0``.

    Accepts scalars or arrays.
    """
    d0 = params.reference_distance
    d = np.maximum(np.asarray(distance, dtype=float), d0)
    g = (d0 / d) ** params.path_loss_exponent
    return float(g) if np.ndim(g) == 0 else g


def shadowing(rng: np.random.Generator, shape, params: RadioParams):
    """Linear log-normal shadowing factors; all ones when disabled."""
    if params.shadowing_std_db == 0:
        return np.ones(shape)
    return 10.0 ** (rng.normal(0.0, params.shadowing_std_db, size=shape) / 10.0)


def spectral_efficiency(gain, params: RadioParams):
    se = np.log2(1.0 + params.reference_snr * np.asarray(gain, dtype=float))
    return float(se) if np.ndim(se) == 0 else se


def data_rate(se, bandwidth):
    rate = np.asarray(se, dtype=float) * np.asarray(bandwidth, dtype=float)
    return float(rate) if np.ndim(rate) == 0 else rate


def link_quality(distance: float, params: RadioParams) -> LinkQuality:
    g = channel_gain(distance, params)
    return LinkQuality(g, spectral_efficiency(g, params))


def distance_matrix(positions: np.ndarray, oru_positions: np.ndarray) -> np.ndarray:
    """Client-by-O-RU Euclidean distances."""
    diff = np.asarray(positions, dtype=float)[:, None, :] - np.asarray(oru_positions)[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def se_matrix(positions: np.ndarray, oru_positions: np.ndarray, params: RadioParams) -> np.ndarray:
    """Client-by-O-RU spectral efficiency from positions."""
    return spectral_efficiency(channel_gain(distance_matrix(positions, oru_positions), params), params)
