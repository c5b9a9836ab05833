"""Linearized fluctuations around the stationary state and their covariance.

Fluctuations ``x = (dn_1..dn_Np, dN_1..dN_Ns)`` obey ``dx/dt = A x + L`` where
``L`` is white noise with ``<L(t) L(t')^T> = D delta(t - t')``.  The
stationary covariance ``C = <x x^T>`` is the solution of
``A C + C A^T + D = 0``.  Two independent routes are offered: the eigenmode
expansion over the spectrum of ``A`` and a direct Bartels-Stewart solve.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DefectiveSpectrumError,
    InvalidArgumentError,
    SingularityError,
    StabilityError,
)
from .model import CavityConfig
from .steady_state import SteadyState, residual_norm

__all__ = [
    "CovarianceMethod",
    "CovarianceSolution",
    "LinearizedSystem",
    "build_linearized_system",
    "lyapunov_residual",
    "medium_covariance",
    "photon_number_variance",
    "solve_covariance",
]

log = logging.getLogger(__name__)

# relative to max|A|; a few ulps.  Far above threshold the slowest relaxation
# rate is ~ g / n, which reaches 1e-14 max|A| in the identical-mode cavity.
STABILITY_EPS = 1e-15
MAX_EIGVEC_COND = 1e6
IMAG_RESIDUE_TOL = 1e-10
# accepted Lyapunov residual of the eigen expansion, in units of the
# roundoff floor eps * max|A| * max|C| / max|D|
RESIDUAL_SLACK = 1e4
REFINEMENT_STEPS = 3
REFINE_BELOW = 1e-13


class CovarianceMethod(enum.Enum):
    EIGEN_EXPANSION = "eigen"
    DIRECT_LYAPUNOV = "direct"


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """Drift ``A`` and noise ``D`` of the fluctuation dynamics; modes come first.

    ``scale`` holds the typical fluctuation size of each variable (square
    root of its mean).  When present the covariance solvers work on the
    rescaled variables ``x / scale``, which keeps the eigenvector basis well
    conditioned far above threshold.
    """

    drift: np.ndarray
    noise: np.ndarray
    n_modes: int
    scale: np.ndarray | None = None

    @property
    def n_sites(self) -> int:
        return self.drift.shape[0] - self.n_modes

    def scaled(self, c: float) -> "LinearizedSystem":
        return LinearizedSystem(c * self.drift, c * self.noise, self.n_modes, self.scale)


@dataclass(frozen=True, eq=False)
class CovarianceSolution:
    """Stationary equal-time covariance of the fluctuations.

    ``covariance`` is ordered like the system: photon numbers, then sites.
    """

    covariance: np.ndarray
    spectrum: np.ndarray
    stable: bool
    n_modes: int
    method: CovarianceMethod
    relative_residual: float

    @property
    def photon_covariance(self) -> np.ndarray:
        return self.covariance[: self.n_modes, : self.n_modes]

    @property
    def medium_block(self) -> np.ndarray:
        return self.covariance[self.n_modes :, self.n_modes :]


def build_linearized_system(config: CavityConfig, state: SteadyState, stationarity_tol: float = 1e-8) -> LinearizedSystem:
    """Assemble drift and noise matrices at a stationary state.

    The noise matrix uses the stationary identities ``<f_i f_i> = 2 g_i n_i``
    and ``<g_j g_j> = 2 P_j``, so ``state`` must actually solve the
    stationary equations for ``config``.
    """
    rn = residual_norm(config, state)
    if not rn <= stationarity_tol:
        raise InvalidArgumentError(f"state is not stationary for this cavity (relative residual {rn:.3g})")
    g, a, P, K = config.loss, config.decay, config.pump, config.coupling
    n = np.asarray(state.photons, dtype=float)
    N = np.asarray(state.excitations, dtype=float)
    p, s = config.n_modes, config.n_sites

    emit = (n + 1)[:, None] * K * N[None, :]  # emission rate into mode i at site j
    drift = np.empty((p + s, p + s))
    drift[:p, :p] = np.diag(-g + K @ N)
    drift[:p, p:] = (n + 1)[:, None] * K
    drift[p:, :p] = -(K * N[None, :]).T
    drift[p:, p:] = -np.diag(a + (n + 1) @ K)

    noise = np.zeros((p + s, p + s))
    noise[:p, :p] = np.diag(2 * g * n)
    noise[:p, p:] = -emit
    noise[p:, :p] = -emit.T
    noise[p:, p:] = np.diag(2 * P)
    scale = np.sqrt(np.concatenate([n + 1, np.where(N > 0, N, 1.0)]))
    return LinearizedSystem(drift, noise, p, scale)


def lyapunov_residual(system: LinearizedSystem, covariance: np.ndarray) -> float:
    """``max|A C + C A^T + D| / max|D|`` (absolute value when ``D`` vanishes)."""
    A, D = system.drift, system.noise
    r = A @ covariance + covariance @ A.T + D
    dmax = np.abs(D).max()
    return float(np.abs(r).max() / dmax) if dmax > 0 else float(np.abs(r).max())


def _check_stable(A: np.ndarray, spectrum: np.ndarray, eps: float):
    worst = int(np.argmax(spectrum.real))
    if not spectrum.real[worst] < -eps:
        raise StabilityError(
            f"drift matrix is not stable: eigenvalue {spectrum[worst]:.6g} (threshold {-eps:.3g}); "
            "no stationary covariance exists",
            eigenvalue=complex(spectrum[worst]),
        )


def _eigen_expansion(spectrum, vectors, eps):
    """Return ``D -> C`` summing the eigenmode expansion over a fixed basis."""
    cond = np.linalg.cond(vectors)
    if not cond <= MAX_EIGVEC_COND:
        raise DefectiveSpectrumError(
            f"eigenvector matrix has condition number {cond:.3g}; use CovarianceMethod.DIRECT_LYAPUNOV"
        )
    pair = spectrum[:, None] + spectrum[None, :]
    if np.abs(pair).min() < eps:
        raise SingularityError("eigenvalue pair sums vanish; covariance expansion is singular")
    inv = np.linalg.inv(vectors)

    def solve(D):
        cov = vectors @ (-(inv @ D @ inv.T) / pair) @ vectors.T
        scale = np.abs(cov).max()
        if scale > 0 and np.abs(cov.imag).max() > IMAG_RESIDUE_TOL * scale:
            raise SingularityError(
                f"eigen expansion left an imaginary residue of {np.abs(cov.imag).max() / scale:.3g} (relative)"
            )
        return cov.real

    return solve


def solve_covariance(
    system: LinearizedSystem,
    method: CovarianceMethod | str = CovarianceMethod.EIGEN_EXPANSION,
    stability_eps: float | None = None,
) -> CovarianceSolution:
    """Stationary covariance ``C`` with ``A C + C A^T + D = 0``.

    Parameters
    ----------
    system : LinearizedSystem
    method : CovarianceMethod or {"eigen", "direct"}
        ``eigen`` sums the eigenmode expansion
        ``C = -U [ (U^-1 D U^-T)_mn / (E_m + E_n) ] U^T``;
        ``direct`` uses the Bartels-Stewart algorithm.
    stability_eps : float, optional
        Eigenvalues with real part above ``-stability_eps`` are rejected.
        Defaults to ``STABILITY_EPS * max|A|``.

    Raises
    ------
    StabilityError
        If ``A`` has an eigenvalue with non-negative (or marginal) real part.
    DefectiveSpectrumError
        If ``method`` is eigen and the eigenvector basis is ill-conditioned.
    """
    method = CovarianceMethod(method)
    A, D = system.drift, system.noise
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(D))):
        raise InvalidArgumentError("drift and noise must be finite")
    # similarity transform to x / scale: spectrum unchanged, covariance scaled back below
    s = np.ones(A.shape[0]) if system.scale is None else np.asarray(system.scale, dtype=float)
    S = np.outer(s, s)
    A = A * s[None, :] / s[:, None]
    D = D / S
    eps = STABILITY_EPS * np.abs(A).max() if stability_eps is None else stability_eps
    spectrum, vectors = np.linalg.eig(A)
    _check_stable(A, spectrum, eps)

    if method is CovarianceMethod.EIGEN_EXPANSION:
        solve = _eigen_expansion(spectrum, vectors, eps)
    else:
        def solve(rhs):
            return scipy.linalg.solve_continuous_lyapunov(A, -rhs)

    cov = solve(D) * S
    cov = 0.5 * (cov + cov.T)
    rel = lyapunov_residual(system, cov)
    # iterative refinement: solve again for the defect; the spectrum spans
    # many decades far above threshold and one solve loses digits
    for _ in range(REFINEMENT_STEPS):
        if rel <= REFINE_BELOW:
            break
        defect = system.drift @ cov + cov @ system.drift.T + system.noise
        trial = cov + solve(defect / S) * S
        trial = 0.5 * (trial + trial.T)
        trial_rel = lyapunov_residual(system, trial)
        if not trial_rel < rel:
            break
        cov, rel = trial, trial_rel
    if method is CovarianceMethod.EIGEN_EXPANSION:
        floor = np.finfo(float).eps * np.abs(system.drift).max() * np.abs(cov).max()
        dmax = np.abs(system.noise).max()
        if dmax > 0 and rel > max(1e-8, RESIDUAL_SLACK * floor / dmax):
            raise DefectiveSpectrumError(
                f"eigen expansion lost accuracy (Lyapunov residual {rel:.3g}); use CovarianceMethod.DIRECT_LYAPUNOV"
            )
    if rel > 1e-8:
        log.debug("Lyapunov residual %.3g exceeds 1e-8 (ill-conditioned drift)", rel)
    return CovarianceSolution(cov, spectrum, True, system.n_modes, method, rel)


def photon_number_variance(sol: CovarianceSolution, mode: int) -> float:
    """``<dn_i dn_i>`` for mode ``i``."""
    if not 0 <= mode < sol.n_modes:
        raise IndexError(f"mode {mode} out of range for {sol.n_modes} modes")
    return float(sol.covariance[mode, mode])


def medium_covariance(sol: CovarianceSolution, site: int, site2: int | None = None) -> float:
    """``<dN_j dN_j'>`` between two sites (variance when ``site2`` is omitted)."""
    n_sites = sol.covariance.shape[0] - sol.n_modes
    site2 = site if site2 is None else site2
    for idx in (site, site2):
        if not 0 <= idx < n_sites:
            raise IndexError(f"site {idx} out of range for {n_sites} sites")
    return float(sol.covariance[sol.n_modes + site, sol.n_modes + site2])
