"""Stationary solution of the deterministic rate equations.

The stationary state satisfies, for every mode ``i`` and site ``j``::

    g_i n_i = (n_i + 1) sum_j K_ij N_j
    P_j     = a_j N_j + sum_i (n_i + 1) K_ij N_j

The medium equations are linear in ``N`` and are eliminated exactly,
``N_j = P_j / (a_j + sum_i (n_i + 1) K_ij)``.  The remaining mode equations
are solved by Newton's method in the variables ``log n_i`` with the residual
taken as the log-ratio of loss to gain.  Photon numbers then stay positive by
construction, and a unit residual means the same relative defect whether the
mode holds 1e-6 or 1e7 photons, which is what a pump sweep over many decades
needs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError, UnboundedSolutionError
from .model import CavityConfig

__all__ = ["SteadyState", "residual", "residual_norm", "solve_steady_state", "solve_pump_sweep"]

log = logging.getLogger(__name__)

_MAX_LOG_STEP = 8.0


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Mean photon number per mode and mean excitation number per site."""

    photons: np.ndarray
    excitations: np.ndarray
    residual_norm: float = 0.0
    iterations: int = 0

    @property
    def primary_mode(self) -> int:
        """Index of the most occupied mode (lowest index on ties)."""
        return int(np.argmax(self.photons))


def residual(config: CavityConfig, state: SteadyState) -> np.ndarray:
    """Defects of the stationary equations, photon equations first.

    Photon entries are ``g_i n_i - (n_i + 1) sum_j K_ij N_j``; medium entries
    are ``P_j - a_j N_j - sum_i (n_i + 1) K_ij N_j``.
    """
    n = np.asarray(state.photons, dtype=float)
    N = np.asarray(state.excitations, dtype=float)
    if n.shape != (config.n_modes,) or N.shape != (config.n_sites,):
        raise InvalidArgumentError(
            f"state has shapes {n.shape}, {N.shape}; cavity needs ({config.n_modes},), ({config.n_sites},)"
        )
    K = config.coupling
    photon = config.loss * n - (n + 1) * (K @ N)
    medium = config.pump - config.decay * N - ((n + 1) @ K) * N
    return np.concatenate([photon, medium])


def residual_norm(config: CavityConfig, state: SteadyState) -> float:
    """Max-norm of the defects, each relative to the larger side of its balance."""
    n = np.asarray(state.photons, dtype=float)
    N = np.asarray(state.excitations, dtype=float)
    r = residual(config, state)
    K = config.coupling
    photon_scale = np.maximum(config.loss * n, (n + 1) * (K @ N))
    medium_scale = np.maximum(config.pump, config.decay * N + ((n + 1) @ K) * N)
    scale = np.concatenate([photon_scale, medium_scale])
    rel = np.divide(np.abs(r), scale, out=np.zeros_like(r), where=scale > 0)
    # an equation whose every term vanishes can only carry an exactly zero defect
    rel[(scale == 0) & (r != 0)] = np.inf
    return float(rel.max())


class _Reduced:
    """Mode equations with the medium eliminated, restricted to modes that see gain."""

    def __init__(self, config: CavityConfig):
        self.g = config.loss
        self.a = config.decay
        self.P = config.pump
        self.K = config.coupling
        pumped = self.P > 0
        self.active = (self.K[:, pumped].sum(axis=1) > 0) if pumped.any() else np.zeros(config.n_modes, bool)
        if np.any(self.active & (self.g == 0)):
            bad = np.flatnonzero(self.active & (self.g == 0)).tolist()
            raise UnboundedSolutionError(f"modes {bad} have zero loss but receive gain; no stationary state")
        reach = self.a + self.K.sum(axis=0)
        if np.any(pumped & (reach == 0)):
            bad = np.flatnonzero(pumped & (reach == 0)).tolist()
            raise UnboundedSolutionError(f"sites {bad} are pumped but have no way to relax")
        self.Ka = self.K[self.active]
        self.ga = self.g[self.active]

    def medium(self, n_active: np.ndarray):
        denom = self.a + (n_active + 1) @ self.Ka
        if self.Ka.shape[0] < self.K.shape[0]:
            denom = denom + self.K[~self.active].sum(axis=0)
        N = np.divide(self.P, denom, out=np.zeros_like(self.P), where=self.P > 0)
        return N, denom

    def equations(self, u: np.ndarray):
        n = np.exp(u)
        N, denom = self.medium(n)
        gain = self.Ka @ N
        h = np.log(self.ga * n) - np.log1p(n) - np.log(gain)
        return h, n, N, denom, gain

    def jacobian(self, n, N, denom, gain):
        w = np.divide(N, denom, out=np.zeros_like(N), where=denom > 0)
        M = (self.Ka * w) @ self.Ka.T
        J = M * n[None, :] / gain[:, None]
        J[np.diag_indices_from(J)] += 1.0 / (1.0 + n)
        return J

    def full_state(self, n_active: np.ndarray, **kw) -> SteadyState:
        n = np.zeros(self.K.shape[0])
        n[self.active] = n_active
        N, _ = self.medium(n_active)
        return SteadyState(n, N, **kw)


def _initial_guess(red: _Reduced, config: CavityConfig) -> np.ndarray:
    N = np.divide(red.P, red.a + red.K.sum(axis=0), out=np.zeros_like(red.P), where=red.P > 0)
    gain = red.Ka @ N
    upper = 10 * red.P.sum() / red.ga
    below = gain < red.ga
    n = np.where(below, gain / np.where(below, red.ga - gain, 1.0), upper)
    n = np.clip(n, 0.0, upper)
    return np.maximum(n, 1e-3 * gain / red.ga)


def _newton(red: _Reduced, config: CavityConfig, n0: np.ndarray, rel_tol: float, max_iter: int):
    u = np.log(n0)
    h, n, N, denom, gain = red.equations(u)
    merit = 0.5 * h @ h
    best = (np.inf, n)
    for it in range(1, max_iter + 1):
        state = red.full_state(n)
        rnorm = residual_norm(config, state)
        if rnorm < best[0]:
            best = (rnorm, n)
        if rnorm <= rel_tol:
            return n, rnorm, it - 1
        J = red.jacobian(n, N, denom, gain)
        try:
            step = np.linalg.solve(J, -h)
        except np.linalg.LinAlgError:
            break
        big = np.abs(step).max()
        if big > _MAX_LOG_STEP:
            step *= _MAX_LOG_STEP / big
        lam = 1.0
        while True:
            u_new = u + lam * step
            h_new, n_new, N_new, denom_new, gain_new = red.equations(u_new)
            merit_new = 0.5 * h_new @ h_new
            if merit_new <= (1 - 1e-4 * lam) * merit or lam < 1e-10 or merit < 1e-30:
                break
            lam *= 0.5
        if merit_new > merit and merit >= 1e-30:
            break
        u, h, n, N, denom, gain, merit = u_new, h_new, n_new, N_new, denom_new, gain_new, merit_new
    state = red.full_state(n)
    rnorm = residual_norm(config, state)
    if rnorm <= rel_tol:
        return n, rnorm, max_iter
    if rnorm < best[0]:
        best = (rnorm, n)
    return None, best, max_iter


def solve_steady_state(
    config: CavityConfig,
    init: SteadyState | None = None,
    rel_tol: float = 1e-12,
    max_iter: int = 200,
) -> SteadyState:
    """Solve the stationary rate equations for ``config``.

    Parameters
    ----------
    config : CavityConfig
        Cavity and pump.
    init : SteadyState, optional
        Starting point, typically the solution at a neighbouring pump.
    rel_tol : float
        Bound on the relative residual, see :func:`residual_norm`.
    max_iter : int
        Newton iterations per attempt.

    Raises
    ------
    ConvergenceError
        If neither the direct solve nor pump continuation reach ``rel_tol``.
    UnboundedSolutionError
        If a lossless mode receives gain.
    """
    if not rel_tol > 0:
        raise InvalidArgumentError("rel_tol must be positive")
    red = _Reduced(config)
    if not red.active.any():
        state = red.full_state(np.zeros(0))
        return SteadyState(state.photons, state.excitations, residual_norm(config, state), 0)

    starts = []
    if init is not None:
        n_init = np.asarray(init.photons, dtype=float)[red.active]
        if n_init.shape == red.ga.shape and np.all(np.isfinite(n_init)):
            starts.append(np.maximum(n_init, 1e-300))
    starts.append(_initial_guess(red, config))

    total_iter = 0
    best = (np.inf, None)
    for n0 in starts:
        n, info, it = _newton(red, config, n0, rel_tol, max_iter)
        total_iter += it
        if n is not None:
            return red.full_state(n, residual_norm=info, iterations=total_iter)
        if info[0] < best[0]:
            best = info

    # pump continuation from deep below threshold
    n_prev = None
    for scale in np.logspace(-12, 0, 25):
        sub = config.with_pump(config.pump * scale)
        sub_red = _Reduced(sub)
        n0 = _initial_guess(sub_red, sub) if n_prev is None else n_prev
        n, info, it = _newton(sub_red, sub, n0, rel_tol, max_iter)
        total_iter += it
        n_prev = info[1] if n is None else n
    if n is not None:
        return red.full_state(n, residual_norm=info, iterations=total_iter)
    if info[0] < best[0]:
        best = info

    best_state = red.full_state(best[1]) if best[1] is not None else None
    raise ConvergenceError(
        f"steady state did not reach rel_tol={rel_tol:g} (best residual {best[0]:.3g})",
        best=best_state,
        residual_norm=best[0],
    )


def solve_pump_sweep(config: CavityConfig, pump_totals, rel_tol: float = 1e-12, max_iter: int = 200):
    """Solve at each total pump in turn, reusing the previous solution as start.

    The pump is spread uniformly over sites.  Returns a list holding either a
    :class:`SteadyState` or the exception raised at that pump.
    """
    out = []
    prev = None
    for total in pump_totals:
        cfg = config.with_total_pump(float(total))
        try:
            state = solve_steady_state(cfg, init=prev, rel_tol=rel_tol, max_iter=max_iter)
        except (ConvergenceError, UnboundedSolutionError) as exc:
            log.warning("steady state failed at pump %g: %s", total, exc)
            out.append(exc)
            continue
        out.append(state)
        prev = state
    return out
