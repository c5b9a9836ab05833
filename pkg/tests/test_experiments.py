import math

import numpy as np
import pytest

from ranlase.experiments import (
    ENSEMBLE_COLUMNS,
    ensemble_summary,
    evaluate_far_above_threshold,
    evaluate_sample,
    pump_grid,
    resolve_threads,
    run_ensemble,
    run_sweep,
)
from ranlase.model import Case, CavityConfig, EnsembleSpec, make_test_cavity, sample_cavity, sample_rng


def local_maxima(y):
    y = np.asarray(y)
    return int(np.sum((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])))


def sweep(case):
    return run_sweep(make_test_cavity(case), pump_grid(1e-4, 1e7, 10))


def test_pump_grid():
    g = pump_grid(1e-2, 1e3, 4)
    assert g[0] == pytest.approx(1e-2) and g[-1] == pytest.approx(1e3)
    assert len(g) == 21 and np.all(np.diff(g) > 0)
    with pytest.raises(ValueError):
        pump_grid(1.0, 1.0, 3)


def test_single_mode_sweep_shape():
    rows = sweep(Case.SINGLE_MODE)
    assert all(r["status"] == "ok" for r in rows)
    f = [r["fano_total"] for r in rows]
    assert local_maxima(f) == 1
    assert abs(f[-1] - 1) <= 1e-2
    peak = rows[int(np.argmax(f))]["pump_over_g"]
    assert 0.1 < peak < 100


def test_beta_laser_peak_excess():
    single = max(r["fano_primary"] for r in sweep(Case.SINGLE_MODE))
    beta = max(r["fano_primary"] for r in sweep(Case.BETA_LASER))
    assert 4 <= (beta - 1) / (single - 1) <= 16


def test_identical_modes_diverge():
    rows = sweep(Case.IDENTICAL_MODES)
    last = rows[-1]
    assert last["fano_primary"] > 10 and last["fano_total"] < 1.05
    tail = [r["fano_primary"] for r in rows[-11:]]
    assert np.all(np.diff(tail) > 0)


def test_sweep_records_failures():
    cfg = CavityConfig([0.0, 0.1], [1.0], [0.0], [[0.5], [0.5]])
    rows = run_sweep(cfg, [1.0, 10.0], g_ref=0.1)
    assert [r["status"] for r in rows] == ["UnboundedSolutionError"] * 2
    assert math.isnan(rows[0]["fano_total"]) and rows[0]["n_lasing"] == -1


def test_far_above_threshold_targets_primary_mode():
    cav = sample_cavity(0.1, 10, 10, sample_rng(1, 7))
    res = evaluate_far_above_threshold(cav, 1e7)
    g = res.config.loss[res.report.primary_mode]
    assert res.config.pump_total / g == pytest.approx(1e7)


def test_evaluate_sample_row():
    spec = EnsembleSpec(0.1, 10, 10, 3, master_seed=4)
    row = evaluate_sample(spec, 2)
    assert row.sample_index == 2 and row.status == "ok"
    assert row.fano_scaled == pytest.approx((row.fano_primary - 1) / row.g_primary)
    assert row.pump_total / row.g_primary == pytest.approx(1e7)


def test_ensemble_independent_of_workers():
    spec = EnsembleSpec(0.2, 6, 6, 24, master_seed=12)
    a = run_ensemble(spec, threads=1)
    b = run_ensemble(spec, threads=3)
    assert [r.sample_index for r in a] == list(range(24))
    # repr compares NaN fields as equal
    assert list(map(repr, a)) == list(map(repr, b))
    c = run_ensemble(spec, threads=1, indices=[5, 3])
    assert list(map(repr, c)) == [repr(a[3]), repr(a[5])]


def test_summary():
    spec = EnsembleSpec(0.1, 10, 10, 60, master_seed=3)
    rows = run_ensemble(spec)
    s = ensemble_summary(rows)
    assert s["n_samples"] == 60 and s["n_ok"] + s["n_failed"] == 60
    assert sum(s["histogram"]["counts"]) == s["n_ok"] - s["n_nonpositive"]
    edges = np.array(s["histogram"]["edges"])
    assert np.allclose(np.diff(np.log(edges)), np.diff(np.log(edges))[0])
    assert sum(v["count"] for v in s["mean_by_n_lasing"].values()) == s["n_ok"]
    assert sum(d["count"] for d in s["mean_by_g_primary_decile"]) == s["n_ok"]
    assert ensemble_summary([])["n_ok"] == 0
    assert "sample_index" in ENSEMBLE_COLUMNS


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("RANLASE_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    assert resolve_threads(0) >= 1
    with pytest.raises(ValueError):
        resolve_threads(-1)
