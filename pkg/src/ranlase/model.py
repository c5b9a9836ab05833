"""Cavity and gain-medium description, test cavities and chaotic-cavity samplers.

All rates are dimensionless, measured in units of the mean level spacing of
the cavity.  In these units the loss rate ``g_i`` of a mode coincides with the
transmission probability of the opening for that mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "CavityConfig",
    "EnsembleSpec",
    "Case",
    "bethe_mean_loss",
    "make_test_cavity",
    "sample_cavity",
    "sample_loss_rates",
    "sample_mode_profiles",
    "sample_rng",
]


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, ndmin=ndim)
    if arr.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise InvalidArgumentError(f"{name} contains negative entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CavityConfig:
    """One realization of a cavity filled with a four-level gain medium.

    Parameters
    ----------
    loss : (n_modes,) array
        Photon escape rate ``g_i`` of every mode.
    decay : (n_sites,) array
        Nonradiative relaxation rate ``a_j`` of the medium at every site.
    pump : (n_sites,) array
        Excitation creation rate ``P_j`` at every site.
    coupling : (n_modes, n_sites) array
        Mode-medium coupling ``K_ij``.
    """

    loss: np.ndarray
    decay: np.ndarray
    pump: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "loss", _frozen(self.loss, 1, "loss"))
        object.__setattr__(self, "decay", _frozen(self.decay, 1, "decay"))
        object.__setattr__(self, "pump", _frozen(self.pump, 1, "pump"))
        object.__setattr__(self, "coupling", _frozen(self.coupling, 2, "coupling"))
        n_modes, n_sites = self.coupling.shape
        if n_modes == 0 or n_sites == 0:
            raise InvalidArgumentError("need at least one mode and one site")
        if self.loss.shape != (n_modes,):
            raise InvalidArgumentError(f"loss has shape {self.loss.shape}, expected ({n_modes},)")
        if self.decay.shape != (n_sites,) or self.pump.shape != (n_sites,):
            raise InvalidArgumentError(f"decay and pump must have shape ({n_sites},)")
        if not np.any(self.loss > 0):
            raise InvalidArgumentError("at least one mode must have a positive loss rate")

    @property
    def n_modes(self) -> int:
        return self.coupling.shape[0]

    @property
    def n_sites(self) -> int:
        return self.coupling.shape[1]

    @property
    def pump_total(self) -> float:
        return float(self.pump.sum())

    def with_pump(self, pump) -> "CavityConfig":
        """Copy of this cavity with a new pump profile (scalar = uniform per site)."""
        pump = np.broadcast_to(np.asarray(pump, dtype=float), (self.n_sites,))
        return CavityConfig(self.loss, self.decay, pump, self.coupling)

    def with_total_pump(self, total: float) -> "CavityConfig":
        return self.with_pump(total / self.n_sites)

    def scaled(self, c: float) -> "CavityConfig":
        """All rates multiplied by ``c``; stationary photon numbers are unchanged."""
        return CavityConfig(c * self.loss, c * self.decay, c * self.pump, c * self.coupling)

    def permuted(self, order) -> "CavityConfig":
        """Relabel modes so that new mode ``k`` is old mode ``order[k]``."""
        order = np.asarray(order)
        return CavityConfig(self.loss[order], self.decay, self.pump, self.coupling[order])

    def to_dict(self) -> dict:
        return {
            "loss": self.loss.tolist(),
            "decay": self.decay.tolist(),
            "pump": self.pump.tolist(),
            "coupling": self.coupling.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CavityConfig":
        try:
            return cls(data["loss"], data["decay"], data["pump"], data["coupling"])
        except KeyError as exc:
            raise InvalidArgumentError(f"cavity config is missing key {exc}") from None


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of a Monte Carlo run over chaotic cavities."""

    mean_loss: float
    n_modes: int
    n_sites: int
    n_samples: int
    master_seed: int = 0
    pump_over_g: float = 1e7
    decay: float = 1.0
    profile_kind: str = "orthogonal"

    def __post_init__(self):
        if not 0 < self.mean_loss <= 1:
            raise InvalidArgumentError("mean_loss must lie in (0, 1]")
        if self.n_modes < 1 or self.n_sites < 1 or self.n_samples < 1:
            raise InvalidArgumentError("n_modes, n_sites and n_samples must be positive")
        if self.n_modes > self.n_sites:
            raise InvalidArgumentError("n_modes cannot exceed n_sites")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidArgumentError("master_seed must be a 64-bit unsigned integer")
        if self.pump_over_g <= 0 or self.decay < 0:
            raise InvalidArgumentError("pump_over_g must be positive and decay non-negative")
        if self.profile_kind not in ("orthogonal", "unitary"):
            raise InvalidArgumentError("profile_kind must be 'orthogonal' or 'unitary'")

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown ensemble keys: {sorted(unknown)}")
        return cls(**data)


def sample_rng(master_seed: int, sample_index: int) -> np.random.Generator:
    """Random stream for one ensemble member, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(sample_index,)))


def sample_loss_rates(mean_loss: float, n_modes: int, rng: np.random.Generator) -> np.ndarray:
    """Porter-Thomas distributed loss rates ``g = mean_loss * z**2``, ``z ~ N(0, 1)``.

    The rates are independent and have population mean ``mean_loss``.
    """
    if not mean_loss > 0:
        raise InvalidArgumentError("mean_loss must be positive")
    z = rng.standard_normal(n_modes)
    return mean_loss * z * z


def sample_mode_profiles(
    n_modes: int,
    n_sites: int,
    gain_weights,
    rng: np.random.Generator,
    kind: str = "orthogonal",
) -> np.ndarray:
    """Coupling matrix from ``n_modes`` Haar-random orthonormal columns.

    ``K[i, j] = gain_weights[i] * |U[j, i]|**2`` so every row sums to its gain
    weight.  ``kind="orthogonal"`` draws real columns (modes of a cavity with
    time-reversal symmetry, the same symmetry class that produces the
    Porter-Thomas loss rates); ``kind="unitary"`` draws complex ones.  The
    columns come from a QR decomposition of a Gaussian matrix with the phases
    of ``R`` divided out, which makes them Haar distributed.
    """
    if n_modes > n_sites:
        raise InvalidArgumentError("cannot draw more orthonormal profiles than sites")
    weights = np.broadcast_to(np.asarray(gain_weights, dtype=float), (n_modes,))
    if np.any(weights <= 0):
        raise InvalidArgumentError("gain weights must be positive")
    if kind == "orthogonal":
        z = rng.standard_normal((n_sites, n_modes))
    elif kind == "unitary":
        z = rng.standard_normal((n_sites, n_modes)) + 1j * rng.standard_normal((n_sites, n_modes))
    else:
        raise InvalidArgumentError(f"unknown profile kind {kind!r}")
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    prob = np.abs(q.T) ** 2
    # renormalize away the O(eps) drift of the QR columns
    prob /= prob.sum(axis=1, keepdims=True)
    return weights[:, None] * prob


def sample_cavity(
    mean_loss: float,
    n_modes: int,
    n_sites: int,
    rng: np.random.Generator,
    decay: float = 1.0,
    pump_total: float = 0.0,
    gain_weights=1.0,
    profile_kind: str = "orthogonal",
) -> CavityConfig:
    """Draw one chaotic cavity.

    The loss rates are drawn before the mode profiles, so two calls with equal
    streams but different ``mean_loss`` share ``K`` and ``g / mean_loss``.
    """
    loss = sample_loss_rates(mean_loss, n_modes, rng)
    coupling = sample_mode_profiles(n_modes, n_sites, gain_weights, rng, profile_kind)
    return CavityConfig(loss, np.full(n_sites, float(decay)), np.full(n_sites, pump_total / n_sites), coupling)


def bethe_mean_loss(hole_diameter: float, frequency: float, volume: float, light_speed: float):
    """Mean loss rate of a cavity leaking through a small hole.

    Returns ``(mean_loss, mean_transmission, level_spacing)`` where
    ``mean_loss = mean_transmission * level_spacing``.
    """
    d, w, v, c = hole_diameter, frequency, volume, light_speed
    if min(d, w, v, c) <= 0:
        raise InvalidArgumentError("all arguments must be positive")
    transmission = 16 * math.pi**2 * d**6 * w**6 / c**6
    spacing = math.pi**2 * c**3 / (w**2 * v**2)
    return transmission * spacing, transmission, spacing


class Case(enum.Enum):
    SINGLE_MODE = "single-mode"
    BETA_LASER = "beta-laser"
    IDENTICAL_MODES = "identical-modes"


_TEST_LOSSES = {
    Case.SINGLE_MODE: [1e-2],
    Case.BETA_LASER: [1e-2] + [1e-1] * 9,
    Case.IDENTICAL_MODES: [1e-2] * 10,
}


def make_test_cavity(case: Case | str, pump_level: float = 0.0, coupling: float | None = None) -> CavityConfig:
    """Deterministic comparison cavities with ``n_sites == n_modes`` and ``a = 1``.

    ``pump_level`` is the pump rate per site.  The coupling is uniform; its
    default ``1 / n_sites`` equals the ensemble average of sampled profiles.
    """
    case = Case(case)
    if pump_level < 0:
        raise InvalidArgumentError("pump_level must be non-negative")
    loss = np.array(_TEST_LOSSES[case])
    n = loss.size
    k = 1.0 / n if coupling is None else coupling
    return CavityConfig(loss, np.ones(n), np.full(n, float(pump_level)), np.full((n, n), float(k)))
