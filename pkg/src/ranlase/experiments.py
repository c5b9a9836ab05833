"""Pump sweeps and Monte Carlo ensembles built on the solver pipeline."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DefectiveSpectrumError, RanlaseError, SingularityError
from .fluctuations import (
    CovarianceMethod,
    CovarianceSolution,
    LinearizedSystem,
    build_linearized_system,
    solve_covariance,
)
from .model import CavityConfig, EnsembleSpec, sample_cavity, sample_rng
from .statistics import EmissionReport, emission_report
from .steady_state import SteadyState, solve_steady_state

__all__ = [
    "Analysis",
    "EnsembleResultRow",
    "analyze",
    "ensemble_summary",
    "evaluate_far_above_threshold",
    "evaluate_sample",
    "pump_grid",
    "resolve_threads",
    "run_ensemble",
    "run_sweep",
    "rows_as_dicts",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Analysis:
    config: CavityConfig
    state: SteadyState
    system: LinearizedSystem
    solution: CovarianceSolution
    report: EmissionReport


def analyze(
    config: CavityConfig,
    init: SteadyState | None = None,
    photon_threshold: float = 2.0,
    method: CovarianceMethod | str = CovarianceMethod.EIGEN_EXPANSION,
) -> Analysis:
    """Steady state, fluctuations and emission statistics at one pump.

    The eigen expansion falls back to the direct Lyapunov solve when the
    eigenvector basis is too ill-conditioned to be trusted.
    """
    state = solve_steady_state(config, init=init)
    system = build_linearized_system(config, state)
    try:
        sol = solve_covariance(system, method)
    except (DefectiveSpectrumError, SingularityError) as exc:
        log.debug("falling back to direct Lyapunov solve: %s", exc)
        sol = solve_covariance(system, CovarianceMethod.DIRECT_LYAPUNOV)
    return Analysis(config, state, system, sol, emission_report(config, state, sol, photon_threshold))


def pump_grid(min_over_g: float, max_over_g: float, per_decade: int) -> np.ndarray:
    """Log-spaced values of ``P_total / g`` including both end points."""
    if not 0 < min_over_g < max_over_g or per_decade < 1:
        raise ValueError("pump grid needs 0 < min < max and per_decade >= 1")
    decades = math.log10(max_over_g / min_over_g)
    n = max(2, int(round(decades * per_decade)) + 1)
    return np.logspace(math.log10(min_over_g), math.log10(max_over_g), n)


SWEEP_COLUMNS = ["pump_total", "pump_over_g", "n_photons_primary", "fano_total", "fano_primary", "n_lasing", "status"]
MEDIUM_COLUMNS = ["medium_local", "medium_coherent", "medium_incoherent"]
EXTRA_COLUMNS = ["pump_over_g_primary", "primary_mode"]


def run_sweep(config: CavityConfig, pump_over_g, photon_threshold: float = 2.0, g_ref: float | None = None):
    """Analyse ``config`` along a pump sweep with continuation.

    ``pump_over_g`` is multiplied by ``g_ref`` (default: smallest loss rate)
    to give the total pump, spread uniformly over sites.  Returns one dict per
    grid point; a failed point carries its error in ``status`` and NaNs.
    """
    g_ref = float(config.loss[config.loss > 0].min()) if g_ref is None else g_ref
    rows = []
    prev = None
    for x in pump_over_g:
        total = float(x) * g_ref
        cfg = config.with_total_pump(total)
        row = {"pump_total": total, "pump_over_g": float(x)}
        try:
            res = analyze(cfg, init=prev, photon_threshold=photon_threshold)
        except RanlaseError as exc:
            log.warning("sweep point %g failed: %s", total, exc)
            row.update({k: math.nan for k in SWEEP_COLUMNS[2:] + MEDIUM_COLUMNS + EXTRA_COLUMNS})
            row["n_lasing"] = row["primary_mode"] = -1
            row["status"] = type(exc).__name__
            rows.append(row)
            continue
        prev = res.state
        rep = res.report
        row.update(
            pump_over_g_primary=total / float(cfg.loss[rep.primary_mode]),
            n_photons_primary=float(res.state.photons[rep.primary_mode]),
            fano_total=rep.fano_total,
            fano_primary=rep.fano_primary,
            n_lasing=rep.n_lasing,
            status="ok",
            medium_local=rep.medium_local,
            medium_coherent=rep.medium_coherent,
            medium_incoherent=rep.medium_incoherent,
            primary_mode=rep.primary_mode,
        )
        rows.append(row)
    return rows


def evaluate_far_above_threshold(
    config: CavityConfig,
    pump_over_g: float = 1e7,
    photon_threshold: float = 2.0,
    max_rounds: int = 6,
) -> Analysis:
    """Analyse ``config`` at ``P_total = pump_over_g * g`` of its primary mode.

    The primary mode is only known after solving, so the pump is ramped up in
    decades from deep below threshold, and re-targeted until the primary mode
    whose loss sets the pump is the one that ends up most occupied.
    """
    g = config.loss
    target_g = float(g[g > 0].min())
    state = None
    seen = set()
    for _ in range(max_rounds):
        target = pump_over_g * target_g
        current = 0.0 if state is None else config.pump_total
        start = target * 1e-12 if state is None else current
        for total in np.geomspace(start, target, max(2, int(abs(math.log10(target / start))) + 1)):
            state = solve_steady_state(config.with_total_pump(float(total)), init=state)
        config = config.with_total_pump(target)
        primary_g = float(g[state.primary_mode])
        if primary_g == target_g or primary_g in seen:
            break
        seen.add(target_g)
        target_g = primary_g
    return analyze(config, init=state, photon_threshold=photon_threshold)


@dataclass(frozen=True)
class EnsembleResultRow:
    sample_index: int
    g_primary: float
    fano_primary: float
    fano_scaled: float
    n_lasing: int
    fano_total: float
    pump_total: float
    status: str = "ok"


ENSEMBLE_COLUMNS = list(EnsembleResultRow.__dataclass_fields__)


def evaluate_sample(spec: EnsembleSpec, index: int, photon_threshold: float = 2.0) -> EnsembleResultRow:
    """Draw cavity ``index`` of the ensemble and evaluate it far above threshold."""
    rng = sample_rng(spec.master_seed, index)
    cavity = sample_cavity(
        spec.mean_loss, spec.n_modes, spec.n_sites, rng, decay=spec.decay, profile_kind=spec.profile_kind
    )
    try:
        res = evaluate_far_above_threshold(cavity, spec.pump_over_g, photon_threshold)
    except RanlaseError as exc:
        return EnsembleResultRow(index, math.nan, math.nan, math.nan, -1, math.nan, math.nan, type(exc).__name__)
    rep = res.report
    g_primary = float(res.config.loss[rep.primary_mode])
    f = rep.fano_primary
    return EnsembleResultRow(
        sample_index=index,
        g_primary=g_primary,
        fano_primary=f,
        fano_scaled=(f - 1.0) / g_primary,
        n_lasing=rep.n_lasing,
        fano_total=rep.fano_total,
        pump_total=res.config.pump_total,
        status="ok" if math.isfinite(f) else "undefined-fano",
    )


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit value, else ``RANLASE_THREADS``, else 1; 0 means all cores."""
    if threads is None:
        threads = int(os.environ.get("RANLASE_THREADS", "1"))
    if threads < 0:
        raise ValueError("thread count must be non-negative")
    return threads or (os.cpu_count() or 1)


def _evaluate_chunk(args):
    spec, indices, photon_threshold = args
    return [evaluate_sample(spec, i, photon_threshold) for i in indices]


def run_ensemble(
    spec: EnsembleSpec,
    threads: int | None = 1,
    photon_threshold: float = 2.0,
    indices=None,
) -> list[EnsembleResultRow]:
    """Evaluate every sample of ``spec``; rows come back sorted by index.

    Each sample draws from its own stream derived from ``(master_seed,
    index)``, so the result does not depend on the number of workers.
    """
    indices = list(range(spec.n_samples)) if indices is None else list(indices)
    workers = resolve_threads(threads)
    if workers == 1 or len(indices) < 2:
        rows = _evaluate_chunk((spec, indices, photon_threshold))
    else:
        chunk = max(1, len(indices) // (8 * workers))
        jobs = [(spec, indices[k : k + chunk], photon_threshold) for k in range(0, len(indices), chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_evaluate_chunk, jobs) for row in part]
    return sorted(rows, key=lambda r: r.sample_index)


def ensemble_summary(rows, n_bins: int = 40) -> dict:
    """Histogram and conditional means of ``(F - 1) / g`` over successful samples."""
    ok = [r for r in rows if r.status == "ok"]
    summary = {"n_samples": len(rows), "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
    if not ok:
        return summary
    scaled = np.array([r.fano_scaled for r in ok])
    n_lasing = np.array([r.n_lasing for r in ok])
    g_primary = np.array([r.g_primary for r in ok])
    summary["mean_fano_scaled"] = float(scaled.mean())

    positive = scaled[scaled > 0]
    summary["n_nonpositive"] = int(scaled.size - positive.size)
    if positive.size:
        lo, hi = positive.min(), positive.max()
        if hi > lo:
            edges = np.logspace(math.log10(lo), math.log10(hi), n_bins + 1)
            edges[0], edges[-1] = lo, hi  # the last bin is closed, so the extremes are counted
        else:
            edges = np.array([lo, lo * 2])
        counts, edges = np.histogram(positive, bins=edges)
        density = counts / (positive.size * np.diff(edges))
        summary["histogram"] = {"edges": edges.tolist(), "counts": counts.tolist(), "density": density.tolist()}

    by_lasing = {}
    for k in np.unique(n_lasing):
        sel = scaled[n_lasing == k]
        by_lasing[str(int(k))] = {"count": int(sel.size), "mean": float(sel.mean())}
    summary["mean_by_n_lasing"] = by_lasing

    deciles = np.quantile(g_primary, np.linspace(0, 1, 11))
    which = np.clip(np.searchsorted(deciles, g_primary, side="right") - 1, 0, 9)
    summary["mean_by_g_primary_decile"] = [
        {
            "g_low": float(deciles[d]),
            "g_high": float(deciles[d + 1]),
            "count": int(np.count_nonzero(which == d)),
            "mean": float(scaled[which == d].mean()) if np.any(which == d) else None,
        }
        for d in range(10)
    ]
    return summary


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
