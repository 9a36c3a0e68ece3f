"""Run records and their CSV encodings.

Round log columns (fixed order)::

    policy, seed, service_id, round, successful, failed, accuracy,
    round_start_s, round_end_s, mean_alloc_hz, handovers

preceded by ``# key=value`` header lines for policy, seed and config_hash.
Floats are written with 17 significant digits so reruns are byte-comparable.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path

ROUND_COLUMNS = ["policy", "seed", "service_id", "round", "successful", "failed", "accuracy",
                 "round_start_s", "round_end_s", "mean_alloc_hz", "handovers"]
ALLOC_COLUMNS = ["t", "oru", "service", "fraction", "bandwidth_hz", "handovers"]
MAC_COLUMNS = ["t", "oru", "service", "client", "hz"]


@dataclass
class RoundRecord:
    policy: str
    seed: int
    service_id: int
    round: int
    successful: int
    failed: int
    accuracy: float
    round_start_s: float
    round_end_s: float
    mean_alloc_hz: float
    handovers: int


@dataclass
class AllocationRecord:
    t: float
    oru: int
    service: int
    fraction: float
    bandwidth_hz: float
    handovers: int


@dataclass
class MetricsLog:
    policy: str
    seed: int
    config_hash: str
    rounds: list[RoundRecord] = field(default_factory=list)
    allocations: list[AllocationRecord] = field(default_factory=list)
    mac_ticks: list[tuple[float, int, int, int, float]] = field(default_factory=list)
    counters: dict[str, float] = field(default_factory=dict)

    def service_rows(self, service_id: int) -> list[RoundRecord]:
        return [r for r in self.rounds if r.service_id == service_id]


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _csv_text(header: dict | None, columns: list[str], rows) -> str:
    buf = io.StringIO()
    if header:
        for k, v in header.items():
            buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rounds_csv(log: MetricsLog) -> str:
    header = {"policy": log.policy, "seed": log.seed, "config_hash": log.config_hash}
    rows = ([getattr(r, c) for c in ROUND_COLUMNS] for r in log.rounds)
    return _csv_text(header, ROUND_COLUMNS, rows)


def allocations_csv(log: MetricsLog) -> str:
    header = {"policy": log.policy, "seed": log.seed, "config_hash": log.config_hash}
    rows = ([getattr(a, c) for c in ALLOC_COLUMNS] for a in log.allocations)
    return _csv_text(header, ALLOC_COLUMNS, rows)


def mac_csv(log: MetricsLog) -> str:
    header = {"policy": log.policy, "seed": log.seed, "config_hash": log.config_hash}
    return _csv_text(header, MAC_COLUMNS, log.mac_ticks)


def write_csv(path, columns: list[str], rows, header: dict | None = None) -> None:
    atomic_write(path, _csv_text(header, columns, rows))


def read_csv(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Header key/values and rows (as strings) of a file written by this module."""
    header, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                header[k] = v
            else:
                body.append(line)
    return header, list(csv.DictReader(body))


def round_record_from_row(row: dict[str, str]) -> RoundRecord:
    kinds = {f.name: f.type for f in fields(RoundRecord)}
    out = {}
    for k, v in row.items():
        t = kinds[k]
        out[k] = int(v) if t == "int" else float(v) if t == "float" else v
    return RoundRecord(**out)
