"""Experiment orchestration: single runs, policy comparison, the a2 sweep.

Every command writes CSV only, atomically, once its runs are complete.
Summary tables use these column orders::

    compare:    policy, service_id, n_seeds, mean_successful, mean_final_accuracy
    ablate-a2:  a2, service_id, n_seeds, mean_successful, mean_final_accuracy
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import SimConfig
from .data import synth_dataset, class_centres, write_idx
from .engine import Policy, run, stream
from .metrics import (MetricsLog, allocations_csv, atomic_write, mac_csv, rounds_csv,
                      write_csv)

log = logging.getLogger(__name__)

COMPARE_COLUMNS = ["policy", "service_id", "n_seeds", "mean_successful", "mean_final_accuracy"]
ABLATION_COLUMNS = ["a2", "service_id", "n_seeds", "mean_successful", "mean_final_accuracy"]
DEFAULT_A2 = (10.0, 30.0, 100.0, 300.0)
_GEN_TAG = 99


def parse_seeds(text: str) -> list[int]:
    """``"0..4"`` (inclusive), ``"3"`` or ``"1,5,7"``."""
    text = text.strip()
    if ".." in text:
        a, _, b = text.partition("..")
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def parse_floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def run_stem(policy: Policy | str, seed: int) -> str:
    return f"{Policy.parse(policy).value.lower()}_seed{seed}"


def write_run(log_: MetricsLog, out_dir, stem: str) -> Path:
    """Round log at ``<stem>.csv``, slice allocations beside it, MAC ticks if recorded."""
    out_dir = Path(out_dir)
    path = out_dir / f"{stem}.csv"
    atomic_write(path, rounds_csv(log_))
    atomic_write(out_dir / f"{stem}_alloc.csv", allocations_csv(log_))
    if log_.mac_ticks:
        atomic_write(out_dir / f"{stem}_mac.csv", mac_csv(log_))
    return path


def cmd_run(cfg: SimConfig, policy: Policy | str, seed: int, out_dir) -> Path:
    metrics = run(cfg, policy, seed)
    return write_run(metrics, out_dir, run_stem(policy, seed))


def _job(args):
    cfg, policy, seed = args
    return run(cfg, policy, seed)


def run_many(jobs: list[tuple[SimConfig, str, int]], workers: int = 1) -> list[MetricsLog]:
    """Run independent simulations, in parallel when ``workers > 1``; order is kept."""
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def run_summary(metrics: MetricsLog, service_id: int) -> tuple[float, float]:
    """Mean successful clients per round and final-round accuracy of one service."""
    rows = metrics.service_rows(service_id)
    return float(np.mean([r.successful for r in rows])), float(rows[-1].accuracy)


def _summarise(logs: list[MetricsLog], n_services: int):
    out = []
    for sid in range(1, n_services + 1):
        stats = [run_summary(m, sid) for m in logs]
        out.append((sid, len(stats), math.fsum(s for s, _ in stats) / len(stats),
                    math.fsum(a for _, a in stats) / len(stats)))
    return out


def cmd_compare(cfg: SimConfig, seeds: list[int], out_dir, workers: int = 1) -> Path:
    out_dir = Path(out_dir)
    policies = list(Policy)
    jobs = [(cfg, p.value, s) for p in policies for s in seeds]
    logs = run_many(jobs, workers)
    rows = []
    for k, p in enumerate(policies):
        mine = logs[k * len(seeds):(k + 1) * len(seeds)]
        for m, s in zip(mine, seeds):
            write_run(m, out_dir / "runs", run_stem(p, s))
        rows += [(p.value, *r) for r in _summarise(mine, len(cfg.services))]
    path = out_dir / "compare.csv"
    write_csv(path, COMPARE_COLUMNS, rows,
              {"seeds": " ".join(map(str, seeds)), "config_hash": cfg.config_hash()})
    return path


def cmd_ablate_a2(cfg: SimConfig, a2_values, seeds: list[int], out_dir,
                  policy: Policy | str = Policy.EFL, workers: int = 1) -> Path:
    """Sweep the second service's weight with everything else fixed."""
    if len(cfg.services) < 2:
        raise ValueError("the a2 sweep needs at least two services")
    values = sorted(set(float(v) for v in a2_values))
    out_dir = Path(out_dir)
    cfgs = [cfg.replace(**{"services.1.weight": v}) for v in values]
    jobs = [(c, Policy.parse(policy).value, s) for c in cfgs for s in seeds]
    logs = run_many(jobs, workers)
    rows = []
    for k, v in enumerate(values):
        mine = logs[k * len(seeds):(k + 1) * len(seeds)]
        for m, s in zip(mine, seeds):
            write_run(m, out_dir / "runs", f"a2_{v:g}_{run_stem(policy, s)}")
        rows += [(v, *r) for r in _summarise(mine, len(cfg.services))]
    path = out_dir / "ablate_a2.csv"
    write_csv(path, ABLATION_COLUMNS, rows,
              {"policy": Policy.parse(policy).value, "a1": cfg.services[0].weight,
               "seeds": " ".join(map(str, seeds)), "config_hash": cfg.config_hash()})
    return path


def cmd_gen_synth(cfg: SimConfig, out_dir, seed: int = 0) -> list[Path]:
    """Write each configured dataset type's synthetic blobs as IDX image/label files.

    Images are square (``n_features`` must be a perfect square) and quantised
    to uint8, so they load back through the ``idx`` source.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for k, (name, d) in enumerate(sorted(cfg.datasets.items())):
        side = math.isqrt(d.n_features)
        if side * side != d.n_features:
            raise ValueError(f"datasets.{name}: n_features={d.n_features} is not a square")
        rng = stream(seed, _GEN_TAG, k)
        centres = class_centres(d.n_classes, d.n_features, d.separation, d.noise_std, rng)
        n_clients = max((s.n_clients for s in cfg.services if s.dataset_type == name), default=1)
        per_class = max(1, cfg.fl.samples_per_client * n_clients // d.n_classes)
        splits = {"train": per_class, "test": cfg.fl.test_samples_per_class}
        for split, n in splits.items():
            ds = synth_dataset(d.n_classes, n, d.n_features, rng, noise_std=d.noise_std,
                               centres=centres)
            order = rng.permutation(len(ds))
            img = np.rint(ds.features[order] * 255).astype(np.uint8).reshape(-1, side, side)
            for kind, arr in (("images-idx3", img), ("labels-idx1", ds.labels[order])):
                path = out_dir / f"{name}-{split}-{kind}-ubyte"
                write_idx(path, arr)
                written.append(path)
    return written
