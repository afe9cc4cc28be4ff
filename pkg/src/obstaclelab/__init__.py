"""Numerical lab for the two-phase parabolic obstacle problem: a penalized
backward-Euler solver and grid-level checks of the regularity estimates."""

from .config import ExperimentConfig, parse_config, parse_config_text
from .data import DATA, make_datum
from .errors import (
    ConfigurationError,
    DomainError,
    GeometryError,
    MollificationError,
    NumericError,
    ObstacleLabError,
    PreconditionError,
    SolverError,
)
from .grid import GridIndex, GridSpec, SpaceTimeField, build_grid
from .kernels import CutoffProfile, HeatKernel, ProbePoint, monotonicity_scan
from .penalty import PenaltyFamily, mollify_initial
from .solver import SolveConfig, epsilon_limit, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "CutoffProfile", "DATA", "DomainError", "ExperimentConfig", "GeometryError", "GridIndex",
    "GridSpec", "HeatKernel", "MollificationError", "NumericError", "ObstacleLabError", "PenaltyFamily",
    "PreconditionError", "ProbePoint", "SolveConfig", "SolverError", "SpaceTimeField", "build_grid",
    "epsilon_limit", "make_datum", "mollify_initial", "monotonicity_scan", "parse_config", "parse_config_text",
    "solve",
]
