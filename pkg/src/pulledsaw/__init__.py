"""Adsorbing, force-pulled self-avoiding walks in a lattice half-space.

Exact enumeration, flatPERM estimates, free energies, Legendre analysis
and phase diagrams.
"""
__version__ = "0.1.0"

from pulledsaw.enumeration import CountTable, WalkClass, enumerate_walks, verify_oracle  # noqa: E402
from pulledsaw.kernels import IMPLEMENTATION  # noqa: E402
from pulledsaw.thermo import FreeEnergyLimits, Kind, WeightPoint  # noqa: E402
from pulledsaw.walks import Walk, classify  # noqa: E402

__all__ = [
    "CountTable", "WalkClass", "enumerate_walks", "verify_oracle", "IMPLEMENTATION",
    "FreeEnergyLimits", "Kind", "WeightPoint", "Walk", "classify", "__version__",
]
