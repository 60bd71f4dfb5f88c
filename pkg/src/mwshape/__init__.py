"""Matter-wave pulse shaping: propagate, score and optimize wave packets under
time-dependent potentials."""

from .core import (
    CONSTANTS,
    UNITS,
    ContractError,
    DomainError,
    Grid1D,
    NumericalError,
    Observables,
    WaveFunction,
    gaussian_packet,
    observables,
)
from .propagator import PropagationConfig, Trajectory, propagate

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS",
    "UNITS",
    "ContractError",
    "DomainError",
    "Grid1D",
    "NumericalError",
    "Observables",
    "WaveFunction",
    "gaussian_packet",
    "observables",
    "PropagationConfig",
    "Trajectory",
    "propagate",
    "__version__",
]
