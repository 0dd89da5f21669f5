"""Travelling fronts of periodic integrodifference competition models."""
from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND
from .dynamics import Dynamics, FrontTrace, Trajectory, WaveProfile, extract_profile, track_front
from .eigen import EigenResult, assemble, eigenvalue, principal_eigen
from .habitat import Grid, Habitat, PeriodicField, Problem, load_config
from .kernel import Gaussian, Kernel, Laplace, Table
from .steady import SteadyState, persistence_eigenvalue, scalar_steady_state, semi_trivial_states

__all__ = [
    "BACKEND", "Dynamics", "EigenResult", "FrontTrace", "Gaussian", "Grid", "Habitat", "Kernel",
    "Laplace", "PeriodicField", "Problem", "SteadyState", "Table", "Trajectory", "WaveProfile",
    "__version__", "assemble", "eigenvalue", "extract_profile", "load_config",
    "persistence_eigenvalue", "principal_eigen", "scalar_steady_state", "semi_trivial_states",
    "track_front",
]
