"""Photon statistics of random lasers from linearized rate equations.

The package solves the stationary multimode rate equations of a chaotic
cavity filled with a gain medium, linearizes the fluctuations around that
state, and derives the Fano factor of the emitted light.  A jump-process
simulator cross-checks the linearization on small systems.
"""

from .errors import (
    ConvergenceError,
    DefectiveSpectrumError,
    InfeasibleScaleError,
    InsufficientDataError,
    InvalidArgumentError,
    RanlaseError,
    SingularityError,
    StabilityError,
    UndefinedFanoError,
    UnboundedSolutionError,
)
from .experiments import analyze, evaluate_far_above_threshold, run_ensemble, run_sweep
from .fluctuations import CovarianceMethod, build_linearized_system, solve_covariance
from .model import Case, CavityConfig, EnsembleSpec, make_test_cavity, sample_cavity
from .statistics import emission_report, fano_mode, fano_total
from .steady_state import SteadyState, solve_steady_state

__version__ = "0.1.0"

__all__ = [
    "Case",
    "CavityConfig",
    "ConvergenceError",
    "CovarianceMethod",
    "DefectiveSpectrumError",
    "EnsembleSpec",
    "InfeasibleScaleError",
    "InsufficientDataError",
    "InvalidArgumentError",
    "RanlaseError",
    "SingularityError",
    "StabilityError",
    "SteadyState",
    "UndefinedFanoError",
    "UnboundedSolutionError",
    "analyze",
    "build_linearized_system",
    "emission_report",
    "evaluate_far_above_threshold",
    "fano_mode",
    "fano_total",
    "make_test_cavity",
    "run_ensemble",
    "run_sweep",
    "sample_cavity",
    "solve_covariance",
    "solve_steady_state",
]
