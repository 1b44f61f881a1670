"""Transmission diffusions across a coefficient jump: exact 1D kernels, path
simulation, finite-volume references and Monte Carlo verification."""
from .coeffs import CoefficientField
from .exceptions import (
    AssemblyError,
    CoefficientError,
    ConfigError,
    ContractViolation,
    DomainError,
    GeometryError,
    SimulationError,
    TransdiffError,
    UnsupportedCaseError,
)
from .geometry import Hyperplane, LevelSetInterface, Region, Sphere, ellipse
from .sde_engine import SimConfig, simulate_ensemble, simulate_path
from .skew1d import Skew1DModel

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "CoefficientError",
    "CoefficientField",
    "ConfigError",
    "ContractViolation",
    "DomainError",
    "GeometryError",
    "Hyperplane",
    "LevelSetInterface",
    "Region",
    "SimConfig",
    "SimulationError",
    "Skew1DModel",
    "Sphere",
    "TransdiffError",
    "UnsupportedCaseError",
    "ellipse",
    "simulate_ensemble",
    "simulate_path",
]
