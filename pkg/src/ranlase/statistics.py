"""Emitted-light observables computed from the internal fluctuations.

With rates measured in units of the level spacing, the loss rate ``g_i`` of a
mode equals the transmission probability ``t_i`` of the opening.  The Fano
factor of the light leaving mode ``i`` mixes the internal Fano factor (weight
``t_i``) with reflected vacuum noise (weight ``1 - t_i``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UndefinedFanoError
from .fluctuations import CovarianceSolution
from .model import CavityConfig
from .steady_state import SteadyState

__all__ = [
    "EmissionReport",
    "count_lasing_modes",
    "emission_report",
    "fano_mode",
    "fano_total",
    "medium_diagnostics",
]


def _check_transmission(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise InvalidArgumentError("transmission probabilities must lie in [0, 1]; rescale the unit of time")
    return t


def fano_mode(transmission: float, variance: float, mean: float) -> float:
    """Fano factor of the light emitted from one mode.

    >>> fano_mode(0.01, 2.0, 1.0)
    1.01
    """
    t = float(_check_transmission(transmission))
    if not mean > 0:
        raise UndefinedFanoError("Fano factor of an empty mode is undefined")
    return t * variance / mean + 1.0 - t


def fano_total(transmissions, covariance, means) -> float:
    """Fano factor when all modes are detected together.

    ``covariance`` is either the full photon-number covariance matrix or a
    vector of variances.  A vector means the modes are taken as uncorrelated;
    for modes that compete for the same excitations the cross covariances are
    large and negative and the full matrix must be passed.
    """
    t = _check_transmission(transmissions)
    n = np.asarray(means, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim == 1:
        cov = np.diag(cov)
    if cov.shape != (t.size, t.size) or n.shape != t.shape:
        raise InvalidArgumentError("transmissions, covariance and means have inconsistent shapes")
    current = t @ n
    if not current > 0:
        raise UndefinedFanoError("no emitted current; Fano factor undefined")
    return float((t @ cov @ t + (t * (1 - t)) @ n) / current)


def count_lasing_modes(state: SteadyState, photon_threshold: float = 2.0) -> int:
    """Number of modes holding at least ``photon_threshold`` photons."""
    if not photon_threshold > 0:
        raise InvalidArgumentError("photon_threshold must be positive")
    return int(np.count_nonzero(np.asarray(state.photons) >= photon_threshold))


def medium_diagnostics(config: CavityConfig, state: SteadyState, sol: CovarianceSolution):
    """Excitation-number fluctuations of the gain medium.

    Returns ``(local, coherent, incoherent)``:

    * ``local``: ``<dN_l^2> / N_l`` at the site where the primary mode couples
      most strongly,
    * ``coherent``: ``<(sum_j dN_j)^2> / sum_j N_j``, cross-site terms included,
    * ``incoherent``: ``sum_j <dN_j^2> / sum_j N_j``.
    """
    N = np.asarray(state.excitations, dtype=float)
    total = N.sum()
    if not total > 0:
        raise UndefinedFanoError("medium is empty; diagnostics undefined")
    block = sol.medium_block
    site = int(np.argmax(config.coupling[state.primary_mode]))
    local = block[site, site] / N[site] if N[site] > 0 else math.nan
    coherent = block.sum() / total
    incoherent = np.trace(block) / total
    return float(local), float(coherent), float(incoherent)


@dataclass(frozen=True, eq=False)
class EmissionReport:
    currents: np.ndarray
    fano_mode: np.ndarray
    fano_total: float
    n_lasing: int
    primary_mode: int
    medium_local: float
    medium_coherent: float
    medium_incoherent: float

    @property
    def fano_primary(self) -> float:
        return float(self.fano_mode[self.primary_mode])


def emission_report(
    config: CavityConfig, state: SteadyState, sol: CovarianceSolution, photon_threshold: float = 2.0
) -> EmissionReport:
    """Collect currents, Fano factors, the lasing census and medium diagnostics.

    Quantities that are undefined (empty modes, transmissions above one, an
    unpumped medium) are reported as NaN.
    """
    g = config.loss
    n = np.asarray(state.photons, dtype=float)
    var = np.diag(sol.photon_covariance)
    per_mode = np.full(config.n_modes, math.nan)
    for i in range(config.n_modes):
        if n[i] > 0 and g[i] <= 1:
            per_mode[i] = fano_mode(g[i], var[i], n[i])
    try:
        total = fano_total(g, sol.photon_covariance, n)
    except (UndefinedFanoError, InvalidArgumentError):
        total = math.nan
    try:
        medium = medium_diagnostics(config, state, sol)
    except UndefinedFanoError:
        medium = (math.nan,) * 3
    return EmissionReport(
        currents=g * n,
        fano_mode=per_mode,
        fano_total=total,
        n_lasing=count_lasing_modes(state, photon_threshold),
        primary_mode=state.primary_mode,
        medium_local=medium[0],
        medium_coherent=medium[1],
        medium_incoherent=medium[2],
    )
