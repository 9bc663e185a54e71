"""Lattice Schrodinger operators under coupled mesh and semiclassical scaling.

The package assembles the operator family ``H_N = (N^2/2) Delta +
N^(2(1-gamma)) V(./N)`` on finite boxes, computes guaranteed low-lying
spectra, and runs the quasimode, interval-decomposition, localization, and
regime-sweep experiments that check the advertised eigenvalue asymptotics
at desk scale.
"""

from . import eigensolve, errors, hermite, lattice, potentials, semiclassics
from .eigensolve import SpectrumResult, eigs_tridiag
from .lattice import LatticeBox, SymmetricLatticeOperator
from .potentials import Potential, ScalingParams, Well

__all__ = [
    "eigensolve",
    "errors",
    "hermite",
    "lattice",
    "potentials",
    "semiclassics",
    "SpectrumResult",
    "eigs_tridiag",
    "LatticeBox",
    "SymmetricLatticeOperator",
    "Potential",
    "ScalingParams",
    "Well",
]

__version__ = "0.1.0"
