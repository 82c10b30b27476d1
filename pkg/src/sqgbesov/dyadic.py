"""
Littlewood-Paley blocks, resolvent localisation and Besov norms for A_D.

All dyadic multipliers take the frequency Lambda_D = sqrt(eigenvalue) as
argument, so phi_j acts on the mode (m, n) through phi0(pi sqrt(m^2+n^2) / 2^j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .spectral import DomainSpec, SpectralField, lp_norm_values, synth

if TYPE_CHECKING:
    from .evolution import Trajectory


def _rho(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def transition(lam):
    """Smooth step: 1 for lam <= 1, 0 for lam >= 2, monotone in between."""
    lam = np.asarray(lam, dtype=float)
    a = _rho(2.0 - lam)
    b = _rho(lam - 1.0)
    out = np.where(lam <= 1.0, 1.0, 0.0)
    mid = (lam > 1.0) & (lam < 2.0)
    out[mid] = a[mid] / (a[mid] + b[mid])
    return out


def phi0(lam):
    """Dyadic profile supported in [1/2, 2]."""
    lam = np.asarray(lam, dtype=float)
    return transition(lam) - transition(2.0 * lam)


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    q: float = 1.0

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v >= 1:
                raise ValueError(f"{name} must be >= 1 or inf, got {v}")


@dataclass(frozen=True)
class DyadicProfile:
    """Active block range of the dyadic partition on a truncated spectrum."""

    j_min: int
    j_max: int

    @classmethod
    def for_domain(cls, domain: DomainSpec) -> "DyadicProfile":
        lo = math.sqrt(2.0) * math.pi
        hi = math.sqrt(2.0) * math.pi * domain.N
        return cls(math.floor(math.log2(lo)) - 2, math.ceil(math.log2(hi)) + 2)

    @property
    def blocks(self) -> range:
        return range(self.j_min, self.j_max + 1)


def phi_multiplier(domain: DomainSpec, j: int) -> np.ndarray:
    return phi0(np.sqrt(domain.eigenvalues) / 2.0**j)


def low_pass_multiplier(domain: DomainSpec, j: int) -> np.ndarray:
    # sum_{k<=j} phi_k telescopes to the transition function at scale 2^j
    return transition(np.sqrt(domain.eigenvalues) / 2.0**j)


def psi_multiplier(domain: DomainSpec, j: int) -> np.ndarray:
    return psi_values(domain.eigenvalues, j)


def psi_values(a, j: int):
    """(1 + 2^{-2j-2} a)^{-1} - (1 + 2^{-2j} a)^{-1}, in factored form."""
    a = np.asarray(a, dtype=float)
    t = a * 4.0**-j
    # factored form avoids cancellation for small t
    return 0.75 * t / ((1.0 + 0.25 * t) * (1.0 + t))


def phi_block(f: SpectralField, j: int) -> SpectralField:
    return SpectralField(f.domain, phi_multiplier(f.domain, j) * f.coeff)


def low_pass(f: SpectralField, j: int) -> SpectralField:
    """S_j f = sum over k <= j of phi_k f."""
    return SpectralField(f.domain, low_pass_multiplier(f.domain, j) * f.coeff)


def high_pass(f: SpectralField, j: int) -> SpectralField:
    """(1 - S_j) f, formed as f - S_j f."""
    return SpectralField(f.domain, f.coeff - low_pass_multiplier(f.domain, j) * f.coeff)


def psi_block(f: SpectralField, j: int) -> SpectralField:
    return SpectralField(f.domain, psi_multiplier(f.domain, j) * f.coeff)


def psi_sqrt_block(f: SpectralField, j: int) -> SpectralField:
    return SpectralField(f.domain, np.sqrt(psi_multiplier(f.domain, j)) * f.coeff)


def lq_sum(terms: np.ndarray, q: float) -> float:
    terms = np.asarray(terms, dtype=float)
    if terms.size == 0:
        return 0.0
    if math.isinf(q):
        return float(terms.max())
    if q == 1:
        return float(terms.sum())
    return float(np.sum(terms**q) ** (1.0 / q))


def block_norms(coeff: np.ndarray, domain: DomainSpec, p: float, js: Sequence[int] | None = None,
                kind: str = "phi") -> np.ndarray:
    """L^p norms of dyadic blocks of a coefficient array.

    ``coeff`` may carry leading batch axes; the block axis is inserted just
    before the mode axes.
    """
    if js is None:
        js = DyadicProfile.for_domain(domain).blocks
    mult = {"phi": phi_multiplier, "psi_sqrt": lambda d, j: np.sqrt(psi_multiplier(d, j))}[kind]
    masks = np.stack([mult(domain, j) for j in js])
    blocks = coeff[..., None, :, :] * masks
    if p == 2:
        # discrete orthogonality makes grid quadrature equal to Parseval
        return np.sqrt(np.sum(blocks * blocks, axis=(-2, -1)))
    return lp_norm_values(synth(blocks, domain), domain, p)


def besov_norm(f: SpectralField, idx: BesovIndex) -> float:
    """l^q over j of 2^{sj} ||phi_j f||_{L^p}."""
    js = np.array(DyadicProfile.for_domain(f.domain).blocks)
    norms = block_norms(f.coeff, f.domain, idx.p, js)
    return lq_sum(2.0 ** (idx.s * js) * norms, idx.q)


def psi_range(domain: DomainSpec, s: float, tol: float = 1e-17) -> range:
    """Block range for resolvent sums with weight 2^{(s-2)j}.

    The psi_j^{1/2} weights decay like 2^{-|j|} away from the spectrum, so
    the tail beyond the returned range is below ``tol`` relative.
    """
    rate = 1.0 - abs(s - 2.0)
    pad = math.ceil(-math.log2(tol) / rate) + 2
    prof = DyadicProfile.for_domain(domain)
    return range(prof.j_min - pad, prof.j_max + pad + 1)


def besov_norm_equiv(f: SpectralField, idx: BesovIndex) -> float:
    """l^q over j of 2^{(s-2)j} ||psi_j^{1/2} Delta f||_{L^p}, valid for |s - 2| < 1."""
    if not abs(idx.s - 2.0) < 1.0:
        raise ValueError(f"norm equivalence requires |s - 2| < 1, got s={idx.s}")
    js = np.array(psi_range(f.domain, idx.s))
    lap = -f.domain.eigenvalues * f.coeff
    norms = block_norms(lap, f.domain, idx.p, js, kind="psi_sqrt")
    return lq_sum(2.0 ** ((idx.s - 2.0) * js) * norms, idx.q)


def chemin_lerner_norm(traj: "Trajectory", s: float = 2.0) -> float:
    """sum_j 2^{sj} max_t ||phi_j theta(t)||_{L^2} over the stored samples."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    domain = traj.domain
    js = np.array(DyadicProfile.for_domain(domain).blocks)
    norms = block_norms(traj.coeff_array(), domain, 2.0, js)
    return float(np.sum(2.0 ** (s * js) * norms.max(axis=0)))
