import math

import numpy as np
import pytest
from conftest import small_config

from oranfl import cli, harness
from oranfl.config import DEFAULT_CONFIG_PATH, parse_config
from oranfl.data import load_idx
from oranfl.metrics import read_csv


@pytest.fixture
def cfg_file(tmp_path):
    # the default scenario shrunk to two rounds, written back out as TOML
    text = DEFAULT_CONFIG_PATH.read_text()
    text = text.replace("rounds = 10", "rounds = 2")
    text = text.replace("samples_per_client = 600", "samples_per_client = 40")
    text = text.replace("test_samples_per_class = 100", "test_samples_per_class = 10")
    text = text.replace("epochs = 200", "epochs = 5")
    text = text.replace("warmup = 60.0", "warmup = 30.0")
    path = tmp_path / "small.toml"
    path.write_text(text)
    return path


def test_parse_seeds():
    assert harness.parse_seeds("0..4") == [0, 1, 2, 3, 4]
    assert harness.parse_seeds("3") == [3]
    assert harness.parse_seeds("1,5") == [1, 5]
    with pytest.raises(ValueError):
        harness.parse_seeds("4..1")


def test_run_writes_round_log(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg_file), "--policy", "efl", "--seed", "0",
                     "--out", str(out)]) == 0
    path = out / "efl_seed0.csv"
    assert capsys.readouterr().out.strip() == str(path)
    header, rows = read_csv(path)
    assert header["policy"] == "EFL" and header["seed"] == "0"
    assert header["config_hash"] == parse_config(cfg_file).config_hash()
    assert len(rows) == 2 * 2
    first = path.read_bytes()
    cli.main(["run", "--config", str(cfg_file), "--policy", "efl", "--seed", "0",
              "--out", str(out)])
    assert path.read_bytes() == first


def test_run_baseline2_header(tmp_path, cfg_file):
    cli.main(["run", "--config", str(cfg_file), "--policy", "baseline2", "--seed", "1",
              "--out", str(tmp_path)])
    header, _ = read_csv(tmp_path / "baseline2_seed1.csv")
    assert header["policy"] == "Baseline2"


def test_compare_shape_and_means(tmp_path):
    cfg = small_config()
    path = harness.cmd_compare(cfg, [0, 1], tmp_path, workers=2)
    header, rows = read_csv(path)
    assert header["seeds"] == "0 1"
    assert list(rows[0]) == harness.COMPARE_COLUMNS
    assert [(r["policy"], r["service_id"]) for r in rows] == [
        (p, s) for p in ("EFL", "Baseline1", "Baseline2") for s in ("1", "2")]
    for r in rows:
        succ, acc = [], []
        for seed in (0, 1):
            stem = harness.run_stem(r["policy"], seed)
            _, runs = read_csv(tmp_path / "runs" / f"{stem}.csv")
            mine = [x for x in runs if x["service_id"] == r["service_id"]]
            succ.append(np.mean([int(x["successful"]) for x in mine]))
            acc.append(float(mine[-1]["accuracy"]))
        assert math.isclose(float(r["mean_successful"]), np.mean(succ), rel_tol=1e-12)
        assert math.isclose(float(r["mean_final_accuracy"]), np.mean(acc), rel_tol=1e-12)


def test_ablation_shape(tmp_path):
    cfg = small_config(**{"fl.rounds": 1})
    path = harness.cmd_ablate_a2(cfg, [300, 10, 30, 100, 30], [0], tmp_path)
    header, rows = read_csv(path)
    assert header["a1"] == "30.0" and header["policy"] == "EFL"
    assert len(rows) == 8
    assert [float(r["a2"]) for r in rows[::2]] == [10, 30, 100, 300]


def test_ablation_needs_two_services():
    cfg = small_config()
    one = cfg.replace(**{"services": [cfg.to_dict()["services"][0]]})
    with pytest.raises(ValueError):
        harness.cmd_ablate_a2(one, [10], [0], "unused")


def test_gen_synth_round_trip(tmp_path):
    cfg = small_config()
    paths = harness.cmd_gen_synth(cfg, tmp_path, seed=0)
    assert len(paths) == 8
    ds = load_idx(tmp_path / "mnist-test-images-idx3-ubyte",
                  tmp_path / "mnist-test-labels-idx1-ubyte", None, 10)
    assert ds.features.shape == (100, 196)
    assert np.bincount(ds.labels).tolist() == [10] * 10


def test_print_config_reference(capsys):
    assert cli.main(["print-config-reference"]) == 0
    out = capsys.readouterr().out
    assert "[control]" in out and "nearrt_period = 3.0" in out


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[fl]\nbogus = 1\n")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
