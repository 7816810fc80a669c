"""Finite-dimensional lab for rate-independent stochastic evolution.

Vanishing-viscosity time stepping, arc-length reparametrization, and checks
of the resulting energy identities and inclusions against reference solvers.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConfigError,
    DimensionError,
    DomainError,
    EnsembleTooSmall,
    JumpDetected,
    NonMonotoneError,
    RatindError,
)
from .geometry import SpaceGeometry, h_inner, h_norm, v_norm  # noqa: E402
from .energy import PotentialSpec  # noqa: E402
from .noise import NoiseSpec, WienerPath, sample_wiener  # noqa: E402
from .model import Forcing, ProblemSpec  # noqa: E402
from .viscous import ViscousPath, run_ensemble, simulate_ensemble, simulate_path  # noqa: E402
from .reparam import ParametrizedPath, check_parametrized, invert_parametrization, rescale_path  # noqa: E402

__all__ = [
    "__version__",
    "BlowUpError",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "EnsembleTooSmall",
    "JumpDetected",
    "NonMonotoneError",
    "RatindError",
    "SpaceGeometry",
    "h_inner",
    "h_norm",
    "v_norm",
    "PotentialSpec",
    "NoiseSpec",
    "WienerPath",
    "sample_wiener",
    "Forcing",
    "ProblemSpec",
    "ViscousPath",
    "simulate_path",
    "simulate_ensemble",
    "run_ensemble",
    "ParametrizedPath",
    "rescale_path",
    "check_parametrized",
    "invert_parametrization",
]
