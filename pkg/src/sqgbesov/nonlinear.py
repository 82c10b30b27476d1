"""
SQG transport term and its resolvent-regularised version.

The advection N0(theta, g) = (grad^perp Lambda_D^{-1} theta . grad) g is
formed pointwise on the collocation grid and projected back onto the sine
basis.  The product is a pure double sine series of frequency <= 2N, so on a
grid of at least 3N/2 points per axis the projection is the exact Galerkin
projection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spectral import (
    DomainSpec,
    SpectralField,
    VectorGridField,
    analyse,
    lambda_pow,
    perp_gradient,
    synth,
)


class Dealias(str, enum.Enum):
    THREE_HALVES = "three_halves_rule"
    NONE = "none"


@dataclass(frozen=True)
class NonlinearityConfig:
    mu: float = 0.0
    dealias: Dealias = Dealias.THREE_HALVES

    def __post_init__(self):
        object.__setattr__(self, "dealias", Dealias(self.dealias))
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")

    def product_grid(self, domain: DomainSpec) -> DomainSpec:
        if self.dealias is Dealias.THREE_HALVES:
            return domain.dealiased()
        return domain


def advect_coeffs(a: np.ndarray, b: np.ndarray, domain: DomainSpec, grid: DomainSpec) -> np.ndarray:
    """Galerkin coefficients of (grad^perp Lambda^{-1} a . grad) b.

    ``a`` and ``b`` are coefficient arrays with matching (broadcastable)
    leading batch axes.  ``grid`` fixes where the product is formed.
    """
    psi = a / np.sqrt(domain.eigenvalues)
    prod = -synth(psi, grid, dy=1) * synth(b, grid, dx=1) + synth(psi, grid, dx=1) * synth(b, grid, dy=1)
    return analyse(prod, grid)


def velocity(theta: SpectralField, domain: DomainSpec | None = None) -> VectorGridField:
    """u = grad^perp Lambda_D^{-1} theta sampled on the grid."""
    return perp_gradient(lambda_pow(theta, -1.0), domain)


def divergence(theta: SpectralField, domain: DomainSpec | None = None) -> np.ndarray:
    """Grid samples of d_x u_1 + d_y u_2 by termwise differentiation."""
    dom = theta.domain if domain is None else domain
    psi = lambda_pow(theta, -1.0).coeff
    # d_x(-d_y psi) + d_y(d_x psi), each evaluated from its own cosine-cosine series
    return -synth(psi, dom, dx=1, dy=1) + synth(psi, dom, dx=1, dy=1)


def advection(theta: SpectralField, other: SpectralField,
              dealias: Dealias | str = Dealias.THREE_HALVES) -> SpectralField:
    """N0(theta, other)."""
    if theta.domain.N != other.domain.N:
        raise ValueError(f"domain mismatch: N={theta.domain.N} vs N={other.domain.N}")
    cfg = NonlinearityConfig(0.0, dealias)
    grid = cfg.product_grid(theta.domain)
    return SpectralField(theta.domain, advect_coeffs(theta.coeff, other.coeff, theta.domain, grid))


def regularized(theta: SpectralField, other: SpectralField, mu: float,
                dealias: Dealias | str = Dealias.THREE_HALVES) -> SpectralField:
    """N_mu(theta, other) = R_mu ((grad^perp Lambda^{-1} theta . grad) R_mu other), R_mu = (1 + mu A_D)^{-1}."""
    if not mu > 0:
        raise ValueError(f"regularized nonlinearity needs mu > 0, got {mu}; use advection for mu = 0")
    if theta.domain.N != other.domain.N:
        raise ValueError(f"domain mismatch: N={theta.domain.N} vs N={other.domain.N}")
    dom = theta.domain
    res = 1.0 / (1.0 + mu * dom.eigenvalues)
    grid = NonlinearityConfig(mu, dealias).product_grid(dom)
    return SpectralField(dom, res * advect_coeffs(theta.coeff, res * other.coeff, dom, grid))


def nonlinear_coeffs(a: np.ndarray, b: np.ndarray, domain: DomainSpec, cfg: NonlinearityConfig) -> np.ndarray:
    """Array-level N_mu (or N0 when mu = 0), batched over leading axes."""
    grid = cfg.product_grid(domain)
    if cfg.mu == 0:
        return advect_coeffs(a, b, domain, grid)
    res = 1.0 / (1.0 + cfg.mu * domain.eigenvalues)
    return res * advect_coeffs(a, res * b, domain, grid)


def nonlinearity(theta: SpectralField, other: SpectralField, cfg: NonlinearityConfig) -> SpectralField:
    """N_mu for mu > 0 and N0 for mu = 0."""
    if cfg.mu == 0:
        return advection(theta, other, cfg.dealias)
    return regularized(theta, other, cfg.mu, cfg.dealias)
