"""Time-fractional diffusion with an impedance boundary condition: direct
solver, eigenfunction machinery and recovery of the time factor of the
source from energy measurements."""

from .direct import ProblemSpec, solve_direct, energy
from .fracops import SampledFunction, TimeGrid
from .inverse import InverseInput, solve_inverse, validate_assumptions
from .mlf import mittag_leffler
from .spectral import BoundaryConstants, compute_modes

__all__ = [
    "BoundaryConstants",
    "InverseInput",
    "ProblemSpec",
    "SampledFunction",
    "TimeGrid",
    "compute_modes",
    "energy",
    "mittag_leffler",
    "solve_direct",
    "solve_inverse",
    "validate_assumptions",
]

__version__ = "0.1.0"
