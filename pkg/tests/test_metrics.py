import os

import pytest

from oranfl.metrics import (ROUND_COLUMNS, MetricsLog, RoundRecord, atomic_write, fmt, read_csv,
                            round_record_from_row, rounds_csv, write_csv)


def _log():
    log = MetricsLog("EFL", 4, "abc123")
    log.rounds.append(RoundRecord("EFL", 4, 1, 0, 9, 7, 0.1 + 0.2, 60.0, 90.0, 1234.5, 2))
    return log


def test_float_format_round_trips():
    for v in (0.1 + 0.2, 1e-300, 1.5e6, 2.0 / 3):
        assert float(fmt(v)) == v
    assert fmt(True) == "1" and fmt(7) == "7"


def test_rounds_csv_layout(tmp_path):
    path = tmp_path / "r.csv"
    atomic_write(path, rounds_csv(_log()))
    header, rows = read_csv(path)
    assert header == {"policy": "EFL", "seed": "4", "config_hash": "abc123"}
    assert list(rows[0]) == ROUND_COLUMNS
    assert round_record_from_row(rows[0]) == _log().rounds[0]


def test_atomic_write_leaves_no_temp(tmp_path):
    write_csv(tmp_path / "sub" / "x.csv", ["a"], [(1,), (2,)], {"k": "v"})
    assert os.listdir(tmp_path / "sub") == ["x.csv"]
    assert (tmp_path / "sub" / "x.csv").read_text() == "# k=v\na\n1\n2\n"


def test_atomic_write_failure_keeps_old(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("old")

    with pytest.raises(TypeError):
        atomic_write(path, 3)
    assert path.read_text() == "old" and os.listdir(tmp_path) == ["x.csv"]
