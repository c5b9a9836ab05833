"""Exact jump-process simulation of the laser, used to validate the linearization.

Photon numbers and excited-atom numbers are integers.  Four kinds of Poisson
events change them:

========  ==========================  =========================
event     rate                        effect
========  ==========================  =========================
escape    ``g_i n_i``                 ``n_i -= 1``, one photon detected
pump      ``P_j``                     ``N_j += 1``
decay     ``a_j N_j``                 ``N_j -= 1``
emission  ``(n_i + 1) K_ij N_j``      ``n_i += 1``, ``N_j -= 1``
========  ==========================  =========================

Events are drawn with the direct Gillespie method.  The event loop is
compiled with numba; the oracle is meant for a handful of modes and sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InfeasibleScaleError, InsufficientDataError, InvalidArgumentError
from .fluctuations import build_linearized_system
from .model import CavityConfig
from .steady_state import solve_steady_state

__all__ = [
    "JumpState",
    "PhotocurrentRecord",
    "SimulationResult",
    "default_window",
    "estimate_fano",
    "simulate",
]

MAX_PREDICTED_PHOTONS = 1e6
MIN_WINDOWS = 30


@dataclass(frozen=True)
class JumpState:
    photons: np.ndarray
    excitations: np.ndarray
    time: float = 0.0


@dataclass(frozen=True, eq=False)
class PhotocurrentRecord:
    """Detected photons per counting window, shape ``(n_windows, n_modes)``."""

    window_length: float
    counts_per_window: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.counts_per_window.shape[0]


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Photocurrent record plus time-averaged moments over the measurement.

    ``photon_window_means`` and ``excitation_window_means`` hold the time
    average of each variable within every window; they give batch-means
    standard errors for the overall averages.
    """

    record: PhotocurrentRecord
    final_state: JumpState
    mean_photons: np.ndarray
    var_photons: np.ndarray
    mean_excitations: np.ndarray
    var_excitations: np.ndarray
    cov_photon_excitation: np.ndarray
    photon_window_means: np.ndarray
    excitation_window_means: np.ndarray
    photon_window_sq_means: np.ndarray
    excitation_window_sq_means: np.ndarray
    n_events: int

    @property
    def sem_photons(self) -> np.ndarray:
        w = self.photon_window_means
        return w.std(axis=0, ddof=1) / math.sqrt(w.shape[0])

    @property
    def sem_excitations(self) -> np.ndarray:
        w = self.excitation_window_means
        return w.std(axis=0, ddof=1) / math.sqrt(w.shape[0])

    def number_fano_photons(self):
        """``<dn^2> / <n>`` per mode with jackknife errors over windows."""
        return _number_fano(self.photon_window_means, self.photon_window_sq_means)

    def number_fano_excitations(self):
        """``<dN^2> / <N>`` per site with jackknife errors over windows."""
        return _number_fano(self.excitation_window_means, self.excitation_window_sq_means)


def _number_fano(m1, m2):
    m = m1.shape[0]
    if m < 2:
        raise InsufficientDataError("need at least two windows for an error estimate")
    s1, s2 = m1.sum(axis=0), m2.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = (s2 / m - (s1 / m) ** 2) / (s1 / m)
        a1, a2 = (s1 - m1) / (m - 1), (s2 - m2) / (m - 1)
        fk = (a2 - a1**2) / a1
        se = np.sqrt((m - 1) / m * np.sum((fk - fk.mean(axis=0)) ** 2, axis=0))
    return f, se


@numba.njit(cache=True)
def _run(g, a, P, K, n, N, t_burn, window, n_windows, seed, max_events):
    np.random.seed(seed)
    p = g.size
    s = a.size
    counts = np.zeros((n_windows, p), dtype=np.int64)
    n_int = np.zeros((n_windows, p))
    N_int = np.zeros((n_windows, s))
    n2 = np.zeros((n_windows, p))
    N2 = np.zeros((n_windows, s))
    nN = np.zeros((p, s))
    rates = np.zeros(p + 2 * s + p * s)
    t = 0.0
    t_end = t_burn + window * n_windows
    events = 0
    while True:
        # rates: escape[p], pump[s], decay[s], emission[p*s]
        total = 0.0
        for i in range(p):
            rates[i] = g[i] * n[i]
            total += rates[i]
        for j in range(s):
            rates[p + j] = P[j]
            rates[p + s + j] = a[j] * N[j]
            total += P[j] + a[j] * N[j]
        for i in range(p):
            for j in range(s):
                r = (n[i] + 1) * K[i, j] * N[j]
                rates[p + 2 * s + i * s + j] = r
                total += r
        dt = np.inf if total <= 0.0 else np.random.exponential(1.0 / total)
        t_next = min(t + dt, t_end)
        # time averages over [max(t, t_burn), t_next], split at window edges
        lo = max(t, t_burn)
        while lo < t_next:
            w = int((lo - t_burn) / window)
            edge = t_burn + (w + 1) * window
            if edge <= lo:  # rounding put lo on the previous window's edge
                w += 1
                edge = t_burn + (w + 1) * window
            if w >= n_windows:
                break
            hi = min(t_next, edge)
            span = hi - lo
            for i in range(p):
                n_int[w, i] += n[i] * span
                n2[w, i] += n[i] * n[i] * span
                for j in range(s):
                    nN[i, j] += n[i] * N[j] * span
            for j in range(s):
                N_int[w, j] += N[j] * span
                N2[w, j] += N[j] * N[j] * span
            lo = hi
        if t + dt >= t_end:
            break
        t += dt
        events += 1
        if events > max_events:
            return counts, n_int, N_int, n2, N2, nN, -1
        u = np.random.random() * total
        k = 0
        acc = rates[0]
        while acc < u and k < rates.size - 1:
            k += 1
            acc += rates[k]
        while rates[k] == 0.0:
            k -= 1
        if k < p:
            n[k] -= 1
            if t >= t_burn:
                w = int((t - t_burn) / window)
                if w < n_windows:
                    counts[w, k] += 1
        elif k < p + s:
            N[k - p] += 1
        elif k < p + 2 * s:
            N[k - p - s] -= 1
        else:
            ij = k - p - 2 * s
            n[ij // s] += 1
            N[ij % s] -= 1
    return counts, n_int, N_int, n2, N2, nN, events


def default_window(config: CavityConfig, factor: float = 50.0) -> float:
    """Counting window ``factor / slowest relaxation rate``.

    The slowest rate comes from the linearized spectrum when the cavity has a
    stationary state, else from the smallest nonzero loss rate.
    """
    try:
        state = solve_steady_state(config)
        spectrum = np.linalg.eigvals(build_linearized_system(config, state).drift)
        slowest = float(np.min(np.abs(spectrum.real)))
    except Exception:
        slowest = 0.0
    if not slowest > 0:
        slowest = float(config.loss[config.loss > 0].min())
    return factor / slowest


def simulate(
    config: CavityConfig,
    t_burn: float,
    t_measure: float,
    rng: np.random.Generator,
    window_length: float | None = None,
    initial: JumpState | None = None,
    max_events: int = 2_000_000_000,
) -> SimulationResult:
    """Run the jump process and record the emitted photocurrent.

    Parameters
    ----------
    config : CavityConfig
    t_burn : float
        Discarded transient before recording starts.
    t_measure : float
        Recorded duration; it is cut into ``t_measure // window_length``
        windows.
    rng : numpy.random.Generator
        Source of the seed for the compiled event loop.
    window_length : float, optional
        Defaults to :func:`default_window`.
    initial : JumpState, optional
        Starting counts, default rounded stationary means.
    """
    if t_burn < 0 or not t_measure > 0:
        raise InvalidArgumentError("t_burn must be >= 0 and t_measure > 0")
    state = None
    try:
        state = solve_steady_state(config)
    except Exception:
        pass
    if state is not None and state.photons.max() > MAX_PREDICTED_PHOTONS:
        raise InfeasibleScaleError(
            f"predicted photon number {state.photons.max():.3g} is too large for event simulation"
        )
    window = default_window(config) if window_length is None else float(window_length)
    # tolerate t_measure being a product of the window length and an integer
    n_windows = int(math.floor(t_measure / window * (1 + 1e-12)))
    if n_windows < 1:
        raise InvalidArgumentError("t_measure shorter than one window")

    if initial is None:
        if state is None:
            raise InvalidArgumentError("no stationary state to start from; pass initial")
        n0 = np.rint(state.photons).astype(np.int64)
        N0 = np.rint(state.excitations).astype(np.int64)
    else:
        n0 = np.asarray(initial.photons, dtype=np.int64).copy()
        N0 = np.asarray(initial.excitations, dtype=np.int64).copy()
        if n0.shape != (config.n_modes,) or N0.shape != (config.n_sites,) or n0.min() < 0 or N0.min() < 0:
            raise InvalidArgumentError("initial state has wrong shape or negative counts")

    seed = int(rng.integers(0, 2**31 - 1))
    counts, n_int, N_int, n2, N2, nN, events = _run(
        config.loss, config.decay, config.pump, config.coupling,
        n0, N0, float(t_burn), window, n_windows, seed, max_events,
    )
    if events < 0:
        raise InfeasibleScaleError(f"event budget of {max_events} exhausted")
    T = window * n_windows
    mean_n = n_int.sum(axis=0) / T
    mean_N = N_int.sum(axis=0) / T
    return SimulationResult(
        record=PhotocurrentRecord(window, counts),
        final_state=JumpState(n0, N0, t_burn + T),
        mean_photons=mean_n,
        var_photons=n2.sum(axis=0) / T - mean_n**2,
        mean_excitations=mean_N,
        var_excitations=N2.sum(axis=0) / T - mean_N**2,
        cov_photon_excitation=nN / T - np.outer(mean_n, mean_N),
        photon_window_means=n_int / window,
        excitation_window_means=N_int / window,
        photon_window_sq_means=n2 / window,
        excitation_window_sq_means=N2 / window,
        n_events=int(events),
    )


def estimate_fano(record: PhotocurrentRecord, mode: int | str = "all"):
    """Variance-to-mean ratio of the window counts with a jackknife error.

    ``mode="all"`` sums the counts of all modes in each window before taking
    the ratio, i.e. all modes are detected together.
    """
    counts = np.asarray(record.counts_per_window, dtype=float)
    if counts.ndim == 1:
        counts = counts[:, None]
    if mode == "all":
        c = counts.sum(axis=1)
    else:
        if not 0 <= int(mode) < counts.shape[1]:
            raise IndexError(f"mode {mode} out of range")
        c = counts[:, int(mode)]
    m = c.size
    if m < MIN_WINDOWS:
        raise InsufficientDataError(f"need at least {MIN_WINDOWS} windows, got {m}")
    s1, s2 = c.sum(), (c * c).sum()
    mean = s1 / m
    if not mean > 0:
        raise InsufficientDataError("no photons detected")
    fano = (s2 - s1 * s1 / m) / (m - 1) / mean
    # leave-one-out estimates in closed form
    s1k, s2k = s1 - c, s2 - c * c
    mk = m - 1
    fk = (s2k - s1k * s1k / mk) / (mk - 1) / (s1k / mk)
    se = math.sqrt((m - 1) / m * np.sum((fk - fk.mean()) ** 2))
    return float(fano), se
