"""Command-line driver: pump sweeps, single random cavities, ensembles, oracle checks.

Every command is a deterministic function of its flags, the optional JSON
config file and the seed.  CSV output starts with ``#``-prefixed metadata
lines, the first of which is ``# ranlase-csv v1``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InfeasibleScaleError, InsufficientDataError, InvalidArgumentError, RanlaseError
from .experiments import (
    ENSEMBLE_COLUMNS,
    EXTRA_COLUMNS,
    MEDIUM_COLUMNS,
    SWEEP_COLUMNS,
    analyze,
    ensemble_summary,
    pump_grid,
    resolve_threads,
    rows_as_dicts,
    run_ensemble,
    run_sweep,
)
from .model import Case, CavityConfig, EnsembleSpec, make_test_cavity, sample_cavity, sample_rng
from .oracle import JumpState, default_window, estimate_fano, simulate
from .statistics import fano_mode

log = logging.getLogger("ranlase")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
CSV_SCHEMA = "# ranlase-csv v1"
PRESETS = ("mm-infty", "single-mode-laser")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def config_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return value


def write_csv(path, columns, rows, meta: dict):
    """Write ``rows`` (dicts) with the versioned metadata header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(CSV_SCHEMA + "\n")
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])


def read_csv(path):
    """Read a file written by :func:`write_csv`; returns ``(meta, rows)``."""
    meta, lines = {}, []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                if value:
                    meta[key] = value
            else:
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _meta(command, seed, payload):
    return {"tool": f"ranlase {__version__}", "command": command, "seed": seed, "config_sha256": config_hash(payload)}


def _grid(args):
    return pump_grid(args.pump_min, args.pump_over_g, args.per_decade)


def cmd_sweep(args) -> int:
    data = _load_config(args.config)
    if "loss" in data:
        cavity = CavityConfig.from_dict(data)
        label = "custom"
    else:
        label = data.get("case", args.case)
        if label is None:
            raise UsageError("sweep needs --case or a config file")
        cavity = make_test_cavity(Case(label))
    threshold = float(data.get("photon_threshold", args.photon_threshold))
    grid = _grid(args)
    rows = run_sweep(cavity, grid, threshold)
    payload = {"case": label, "cavity": cavity.to_dict(), "grid": grid.tolist(), "photon_threshold": threshold}
    write_csv(args.out, SWEEP_COLUMNS + EXTRA_COLUMNS, rows, _meta("sweep", args.seed, payload))
    if all(r["status"] != "ok" for r in rows):
        raise NumericalFailure("every sweep point failed")
    return EXIT_OK


def cmd_random_sample(args) -> int:
    data = _load_config(args.config)
    mean_loss = float(data.get("mean_loss", args.mean_loss))
    n_modes = int(data.get("n_modes", args.n_modes))
    n_sites = int(data.get("n_sites", args.n_sites or n_modes))
    kind = data.get("profile_kind", args.profile_kind)
    # validates ranges the same way as an ensemble
    EnsembleSpec(mean_loss, n_modes, n_sites, 1, args.seed, args.pump_over_g, 1.0, kind)
    cavity = sample_cavity(mean_loss, n_modes, n_sites, sample_rng(args.seed, args.index), profile_kind=kind)
    rows = run_sweep(cavity, _grid(args), args.photon_threshold)
    payload = {"mean_loss": mean_loss, "n_modes": n_modes, "n_sites": n_sites, "index": args.index, "profile_kind": kind}
    write_csv(args.out, SWEEP_COLUMNS + MEDIUM_COLUMNS + EXTRA_COLUMNS, rows, _meta("random-sample", args.seed, payload))
    if args.cavity_out:
        _write_json(args.cavity_out, cavity.to_dict())
    if all(r["status"] != "ok" for r in rows):
        raise NumericalFailure("every sweep point failed")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    data = _load_config(args.config)
    overrides = {
        "mean_loss": args.mean_loss,
        "n_modes": args.n_modes,
        "n_sites": args.n_sites,
        "n_samples": args.n_samples,
        "master_seed": args.seed,
        "pump_over_g": args.pump_over_g,
        "profile_kind": args.profile_kind,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data.setdefault("n_sites", data.get("n_modes"))
    if data.get("mean_loss") is None or data.get("n_modes") is None or data.get("n_samples") is None:
        raise UsageError("ensemble needs mean_loss, n_modes and n_samples (flags or config)")
    spec = EnsembleSpec.from_dict(data)
    threads = resolve_threads(args.threads)
    rows = run_ensemble(spec, threads=threads, photon_threshold=args.photon_threshold)
    payload = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    write_csv(args.out, ENSEMBLE_COLUMNS, rows_as_dicts(rows), _meta("ensemble", spec.master_seed, payload))
    summary = ensemble_summary(rows)
    summary["spec"] = payload
    failures = {}
    for r in rows:
        if r.status != "ok":
            failures[r.status] = failures.get(r.status, 0) + 1
    summary["failures_by_status"] = failures
    summary_path = args.summary or Path(args.out).with_suffix(".json")
    _write_json(summary_path, summary)
    log.info("ensemble: %d samples, %d failed", summary["n_samples"], summary["n_failed"])
    if summary["n_ok"] == 0:
        raise NumericalFailure("every ensemble sample failed")
    return EXIT_OK


def _oracle_mm_infty(args, rng):
    # no cavity coupling: the excitation number is an M/M/infinity queue
    P, a = 50.0, 1.0
    cavity = CavityConfig([1.0], [a], [P], [[0.0]])
    window = 50.0 / a
    n_windows = args.windows or 2000
    res = simulate(cavity, 10 * window, n_windows * window, rng, window_length=window,
                   initial=JumpState(np.array([0]), np.array([int(P / a)])))
    f, se = res.number_fano_excitations()
    mean, sem = float(res.mean_excitations[0]), float(res.sem_excitations[0])
    return {
        "cavity": cavity.to_dict(),
        "window_length": window,
        "n_windows": res.record.n_windows,
        "n_events": res.n_events,
        "mean_excitations": {"oracle": mean, "sem": sem, "exact": P / a, "z": (mean - P / a) / sem},
        "fano_excitations": {"oracle": float(f[0]), "se": float(se[0]), "exact": 1.0, "z": float((f[0] - 1) / se[0])},
        "pass": bool(abs(mean - P / a) <= 3 * sem and abs(f[0] - 1) <= 3 * se[0]),
    }


def _oracle_single_mode(args, rng):
    cavity = CavityConfig([0.1], [1.0], [20.0], [[1.0]])
    lin = analyze(cavity)
    n_bar = float(lin.state.photons[0])
    var = float(lin.solution.covariance[0, 0])
    predicted = fano_mode(0.1, var, n_bar)
    window = default_window(cavity, 20.0)
    n_windows = args.windows or 10000
    res = simulate(cavity, 10 * window, n_windows * window, rng, window_length=window)
    mean, sem = float(res.mean_photons[0]), float(res.sem_photons[0])
    f, se = estimate_fano(res.record)
    rel = abs(f - predicted) / predicted
    return {
        "cavity": cavity.to_dict(),
        "window_length": window,
        "n_windows": res.record.n_windows,
        "n_events": res.n_events,
        "mean_photons": {"oracle": mean, "sem": sem, "linearized": n_bar, "z": (mean - n_bar) / sem},
        "variance_photons": {"oracle": float(res.var_photons[0]), "linearized": var},
        "fano_emitted": {"oracle": f, "se": se, "linearized": predicted, "relative_difference": rel,
                         "z": (f - predicted) / se},
        "pass": bool(abs(mean - n_bar) <= 3 * sem and rel <= 0.1),
    }


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    run = _oracle_mm_infty if args.preset == "mm-infty" else _oracle_single_mode
    report = {"tool": f"ranlase {__version__}", "preset": args.preset, "seed": args.seed}
    report.update(run(args, rng))
    if args.out:
        _write_json(args.out, report)
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--config", type=Path, help="JSON file whose keys mirror the config field names")
    common.add_argument("--threads", type=int, default=None, help="worker processes; 0 = all cores (env RANLASE_THREADS)")
    common.add_argument("--photon-threshold", type=float, default=2.0, help="photons needed to count a mode as lasing")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--pump-min", type=float, default=1e-4, help="smallest P_total / g of the sweep")
    grid.add_argument("--pump-over-g", type=float, default=1e7, help="largest P_total / g of the sweep")
    grid.add_argument("--per-decade", type=int, default=10, help="grid points per decade")

    ap = argparse.ArgumentParser(prog="ranlase", description="Photon statistics of random lasers.")
    ap.add_argument("--version", action="version", version=f"ranlase {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common, grid], help="pump sweep of a comparison cavity")
    p.add_argument("--case", choices=[c.value for c in Case])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("random-sample", parents=[common, grid], help="pump sweep of one sampled chaotic cavity")
    p.add_argument("--mean-loss", type=float, default=0.5)
    p.add_argument("--n-modes", type=int, default=10)
    p.add_argument("--n-sites", type=int, default=None, help="default: same as --n-modes")
    p.add_argument("--index", type=int, default=0, help="sample index within the seed's ensemble")
    p.add_argument("--profile-kind", choices=["orthogonal", "unitary"], default="orthogonal")
    p.add_argument("--cavity-out", type=Path, help="also write the sampled cavity as JSON")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_random_sample)

    p = sub.add_parser("ensemble", parents=[common], help="Monte Carlo ensemble far above threshold")
    p.add_argument("--mean-loss", type=float)
    p.add_argument("--n-modes", type=int)
    p.add_argument("--n-sites", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--pump-over-g", type=float, default=None, help="evaluation pump P_total / g_primary (default 1e7)")
    p.add_argument("--profile-kind", choices=["orthogonal", "unitary"], default=None)
    p.add_argument("--out", type=Path, required=True, help="per-sample CSV")
    p.add_argument("--summary", type=Path, help="JSON summary (default: --out with .json suffix)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("oracle-check", parents=[common], help="compare the jump-process oracle with the linearization")
    p.add_argument("--preset", choices=PRESETS, required=True)
    p.add_argument("--windows", type=int, default=None, help="counting windows (default 2000 / 10000)")
    p.add_argument("--out", type=Path, help="JSON report (default: stdout)")
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError, TypeError, ValueError) as exc:
        print(f"ranlase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ranlase: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailure, InfeasibleScaleError, InsufficientDataError, RanlaseError) as exc:
        print(f"ranlase: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
