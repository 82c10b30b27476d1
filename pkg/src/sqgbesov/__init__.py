"""Spectral tools for the surface quasi-geostrophic equation on the unit square.

Dirichlet sine-series fields, Littlewood-Paley and resolvent-based Besov
norms, the regularised SQG nonlinearity with Picard and RK4 solvers, and a
harness that measures the constants of the supporting inequalities.
"""

from .dyadic import BesovIndex, besov_norm, besov_norm_equiv, chemin_lerner_norm
from .evolution import SolverConfig, Trajectory, picard_solve, rk4_solve, solve
from .nonlinear import Dealias, NonlinearityConfig, advection, regularized
from .spectral import DomainSpec, Quadrature, SpectralField

__version__ = "0.1.0"

__all__ = [
    "BesovIndex", "besov_norm", "besov_norm_equiv", "chemin_lerner_norm",
    "SolverConfig", "Trajectory", "picard_solve", "rk4_solve", "solve",
    "Dealias", "NonlinearityConfig", "advection", "regularized",
    "DomainSpec", "Quadrature", "SpectralField",
]
