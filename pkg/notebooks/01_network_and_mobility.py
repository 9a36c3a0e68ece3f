"""Walkthrough: the radio grid, link quality, and how clients move.

Run with ``python3 notebooks/01_network_and_mobility.py``.
"""

import numpy as np

from oranfl import radio
from oranfl.config import default_config
from oranfl.mobility import LevyWalkers

cfg = default_config()
params = cfg.radio.params()

# Seven cells: one in the centre, six around it at the inter-site distance.
sites = radio.build_hex_grid(cfg.topology.rings, cfg.topology.inter_site_distance,
                             cfg.topology.bandwidth_hz)
print(f"{len(sites)} O-RUs, {sites[0].total_bandwidth:.3g} Hz each")
for s in sites:
    print(f"  O-RU {s.id}: ({s.position[0]:7.1f}, {s.position[1]:7.1f})")

# Spectral efficiency falls off with distance; rate is linear in bandwidth.
print("\ndistance (m) -> spectral efficiency (bit/s/Hz), rate on 100 kHz")
for d in (1, 10, 50, 100, 250, 500):
    se = radio.spectral_efficiency(radio.channel_gain(d, params), params)
    print(f"  {d:4d} -> {se:6.2f}, {radio.data_rate(se, 1e5) / 1e6:6.2f} Mbit/s")

# A heavy-tailed walk: mostly short hops, the occasional long flight.
rng = np.random.default_rng(0)
bounds = radio.grid_bounds(sites)
walkers = LevyWalkers.random(cfg.n_clients, bounds, cfg.mobility.params(), rng)
start = walkers.positions.copy()
for _ in range(6000):  # 60 s at 10 ms per step
    walkers.advance(cfg.control.mac_dt)
moved = np.hypot(*(walkers.positions - start).T)
print(f"\nafter 60 s: median displacement {np.median(moved):.1f} m, max {moved.max():.1f} m")

# Which O-RU serves each client best now, and how many share each cell.
se = radio.se_matrix(walkers.positions, radio.site_positions(sites), params)
print("clients per best O-RU:", np.bincount(se.argmax(axis=1), minlength=len(sites)).tolist())
