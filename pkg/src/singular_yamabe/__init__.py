"""Numerics for constant scalar curvature metrics with isolated singularities.

Fowler (Delaunay-type) orbits, their deformations, Floquet data of the
linearisation, Pohozaev invariants, balancing conditions, and recovery of the
asymptotic parameters from sampled data.
"""

from .errors import NoFowlerMatch, NumericalError, ParameterError
from .fowler import FowlerOrbit, compute_orbit, energy_level, necksize_from_energy
from .geometry import build_quadrature, setup

__version__ = "0.1.0"

__all__ = [
    "FowlerOrbit",
    "NoFowlerMatch",
    "NumericalError",
    "ParameterError",
    "build_quadrature",
    "compute_orbit",
    "energy_level",
    "necksize_from_energy",
    "setup",
    "__version__",
]
