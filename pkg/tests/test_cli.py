import json

import numpy as np
import pytest

from ranlase.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main, read_csv


def floats(rows, key):
    return np.array([float(r[key]) for r in rows])


def test_sweep_csv(tmp_path):
    out = tmp_path / "single.csv"
    assert main(["sweep", "--case", "single-mode", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# ranlase-csv v1"
    meta, rows = read_csv(out)
    assert meta["command"] == "sweep" and len(meta["config_sha256"]) == 16
    for col in ("pump_total", "pump_over_g", "n_photons_primary", "fano_total", "fano_primary", "n_lasing", "status"):
        assert col in rows[0]
    f = floats(rows, "fano_total")
    assert np.sum((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])) == 1
    assert abs(f[-1] - 1) <= 1e-2


def test_sweep_from_config(tmp_path):
    cfg = tmp_path / "cav.json"
    cfg.write_text(json.dumps({"loss": [0.1], "decay": [1.0], "pump": [0.0], "coupling": [[1.0]]}))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--pump-min", "0.1", "--pump-over-g", "100", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 31 and all(r["status"] == "ok" for r in rows)


def test_random_sample_deterministic(tmp_path):
    args = ["random-sample", "--mean-loss", "0.5", "--n-modes", "10", "--seed", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, rows = read_csv(a)
    rows = [r for r in rows if r["status"] == "ok"]
    assert float(rows[-1]["fano_primary"]) > 1
    nl = floats(rows, "n_lasing")
    assert np.all(np.diff(nl) >= -1)
    pump = floats(rows, "pump_total")
    assert pump[np.nanargmax(floats(rows, "medium_local"))] < pump[np.nanargmax(floats(rows, "medium_coherent"))]


def test_ensemble_threads_identical(tmp_path):
    base = ["ensemble", "--mean-loss", "0.1", "--n-modes", "6", "--n-samples", "16", "--seed", "8"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--threads", "1", "--out", str(a)]) == 0
    assert main(base + ["--threads", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["n_samples"] == 16
    assert {"histogram", "mean_by_n_lasing", "mean_by_g_primary_decile"} <= set(summary)
    _, rows = read_csv(a)
    assert [int(r["sample_index"]) for r in rows] == list(range(16))


def test_ensemble_config_file(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"mean_loss": 0.3, "n_modes": 4, "n_sites": 5, "n_samples": 3}))
    out = tmp_path / "e.csv"
    assert main(["ensemble", "--config", str(cfg), "--out", str(out), "--summary", str(tmp_path / "s.json")]) == 0
    meta, rows = read_csv(out)
    assert len(rows) == 3 and meta["seed"] == "0"


def test_oracle_mm_infty(tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle-check", "--preset", "mm-infty", "--seed", "1", "--windows", "500", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert abs(rep["fano_excitations"]["z"]) <= 3 and rep["pass"]


def test_oracle_single_mode(tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle-check", "--preset", "single-mode-laser", "--windows", "2000", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["fano_emitted"]["relative_difference"] <= 0.1


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["oracle-check", "--preset", "nope"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["sweep"])
    assert info.value.code == EXIT_USAGE
    assert main(["random-sample", "--mean-loss", "2", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
    assert main(["sweep", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["ensemble", "--config", str(bad), "--out", str(tmp_path / "e.csv")]) == EXIT_USAGE


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--case", "single-mode", "--out", str(blocker / "x.csv")]) == EXIT_IO
    assert main(["sweep", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "y.csv")]) == EXIT_IO


def test_numerical_failure(tmp_path):
    cfg = tmp_path / "cav.json"
    cfg.write_text(json.dumps({"loss": [0.0, 0.1], "decay": [1.0], "pump": [0.0], "coupling": [[0.5], [0.5]]}))
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_NUMERICAL
    _, rows = read_csv(out)
    assert all(r["status"] == "UnboundedSolutionError" for r in rows)
