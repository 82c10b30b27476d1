"""
Dirichlet Laplacian functional calculus on the unit square.

Fields are stored as coefficients on the orthonormal eigenbasis

    e_mn(x, y) = 2 sin(m pi x) sin(n pi y),   1 <= m, n <= N,

with eigenvalue pi^2 (m^2 + n^2).  Grid values live on G x G interior
collocation nodes.  Two node layouts are supported:

* ``trapezoid`` (default): x_i = i / (G + 1), i = 1..G.  The field extended
  by zero to the boundary is integrated with the composite trapezoid rule.
* ``midpoint``: x_i = (i + 1/2) / G, i = 0..G-1, integrated with the
  midpoint rule.

Both layouts make the sampled sines discretely orthogonal for mode indices
below the grid size, so the collocation transforms are exact inverses and
products whose frequencies stay below the alias limit are projected exactly.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np


class Quadrature(str, enum.Enum):
    TRAPEZOID = "trapezoid"
    MIDPOINT = "midpoint"


def eigenvalue(m: int, n: int) -> float:
    """Eigenvalue of the Dirichlet Laplacian for mode (m, n)."""
    if m < 1 or n < 1:
        raise ValueError(f"mode indices must be >= 1, got ({m}, {n})")
    return math.pi**2 * (m * m + n * n)


def dealias_size(N: int, quadrature: Quadrature | str = Quadrature.TRAPEZOID) -> int:
    """Smallest grid size on which quadratic products project exactly onto N modes."""
    quadrature = Quadrature(quadrature)
    # a product frequency k aliases onto 2L - k, L = G + 1 (trapezoid) or G (midpoint)
    if quadrature is Quadrature.TRAPEZOID:
        return (3 * N) // 2
    return (3 * N) // 2 + 1


@dataclass(frozen=True)
class DomainSpec:
    """Truncation and collocation parameters for the unit square."""

    N: int
    G: int
    quadrature: Quadrature = Quadrature.TRAPEZOID

    def __post_init__(self):
        object.__setattr__(self, "quadrature", Quadrature(self.quadrature))
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if int(self.G) != self.G or self.G < self.N:
            raise ValueError(f"G must be an integer >= N (N={self.N}), got {self.G}")
        if self.quadrature is Quadrature.MIDPOINT and self.G == self.N:
            # the top sampled sine is not orthogonal on midpoint nodes
            raise ValueError("midpoint quadrature requires G > N")

    @property
    def h(self) -> float:
        return 1.0 / (self.G + 1) if self.quadrature is Quadrature.TRAPEZOID else 1.0 / self.G

    @property
    def nodes(self) -> np.ndarray:
        return _tables(self.N, self.G, self.quadrature).nodes

    @property
    def eigenvalues(self) -> np.ndarray:
        """(N, N) array of pi^2 (m^2 + n^2)."""
        return _eigenvalues(self.N)

    @property
    def can_dealias(self) -> bool:
        return self.G >= dealias_size(self.N, self.quadrature)

    def dealiased(self) -> "DomainSpec":
        """Same truncation on a grid fine enough for exact quadratic products."""
        return DomainSpec(self.N, max(self.G, dealias_size(self.N, self.quadrature)), self.quadrature)

    def with_grid(self, G: int) -> "DomainSpec":
        return DomainSpec(self.N, G, self.quadrature)


@dataclass(frozen=True)
class _Tables:
    nodes: np.ndarray
    sin: np.ndarray  # (G, N): sqrt(2) sin(m pi x_i)
    cos: np.ndarray  # (G, N): sqrt(2) m pi cos(m pi x_i)
    wavenumber: np.ndarray  # (N,): m pi


@functools.lru_cache(maxsize=64)
def _tables(N: int, G: int, quadrature: Quadrature) -> _Tables:
    if quadrature is Quadrature.TRAPEZOID:
        x = np.arange(1, G + 1) / (G + 1)
    else:
        x = (np.arange(G) + 0.5) / G
    k = np.pi * np.arange(1, N + 1)
    s = np.sqrt(2.0) * np.sin(np.outer(x, k))
    c = np.sqrt(2.0) * np.cos(np.outer(x, k)) * k
    for a in (x, s, c, k):
        a.setflags(write=False)
    return _Tables(x, s, c, k)


@functools.lru_cache(maxsize=64)
def _eigenvalues(N: int) -> np.ndarray:
    k2 = (np.pi * np.arange(1, N + 1)) ** 2
    lam = k2[:, None] + k2[None, :]
    lam.setflags(write=False)
    return lam


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar field given by its (N, N) eigenbasis coefficients."""

    domain: DomainSpec
    coeff: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=np.float64)
        if c.shape != (self.domain.N, self.domain.N):
            raise ValueError(
                f"coefficient shape {c.shape} does not match N={self.domain.N}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeff", _frozen(c))

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "SpectralField":
        return cls(domain, np.zeros((domain.N, domain.N)))

    @classmethod
    def mode(cls, domain: DomainSpec, m: int, n: int, amplitude: float = 1.0) -> "SpectralField":
        """The eigenfunction e_mn scaled by ``amplitude``."""
        if not (1 <= m <= domain.N and 1 <= n <= domain.N):
            raise ValueError(f"mode ({m}, {n}) outside the truncation N={domain.N}")
        c = np.zeros((domain.N, domain.N))
        c[m - 1, n - 1] = amplitude
        return cls(domain, c)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeff))

    def inner(self, other: "SpectralField") -> float:
        _check_same(self, other)
        return float(np.sum(self.coeff * other.coeff))

    def truncate(self, domain: DomainSpec) -> "SpectralField":
        """Restrict or zero-pad the coefficients onto another truncation."""
        c = np.zeros((domain.N, domain.N))
        n = min(domain.N, self.domain.N)
        c[:n, :n] = self.coeff[:n, :n]
        return SpectralField(domain, c)

    def __add__(self, other):
        _check_same(self, other)
        return SpectralField(self.domain, self.coeff + other.coeff)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralField(self.domain, self.coeff - other.coeff)

    def __neg__(self):
        return SpectralField(self.domain, -self.coeff)

    def __mul__(self, c: float):
        return SpectralField(self.domain, float(c) * self.coeff)

    __rmul__ = __mul__


def _check_same(a: SpectralField, b: SpectralField) -> None:
    if a.domain.N != b.domain.N:
        raise ValueError(f"domain mismatch: N={a.domain.N} vs N={b.domain.N}")


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a field at the G x G interior collocation nodes."""

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.domain.G, self.domain.G):
            raise ValueError(f"grid shape {v.shape} does not match G={self.domain.G}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", _frozen(v))


@dataclass(frozen=True, eq=False)
class VectorGridField:
    x: GridField
    y: GridField

    def __post_init__(self):
        if self.x.domain != self.y.domain:
            raise ValueError("vector components live on different grids")

    @property
    def domain(self) -> DomainSpec:
        return self.x.domain

    def magnitude(self) -> GridField:
        return GridField(self.domain, np.hypot(self.x.values, self.y.values))

    def dot(self, other: "VectorGridField") -> GridField:
        return GridField(self.domain, self.x.values * other.x.values + self.y.values * other.y.values)


# -- array-level transforms; leading batch dimensions are allowed ----------


def synth(coeff: np.ndarray, dom: DomainSpec, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Evaluate d^dx/dx d^dy/dy of the sine series on the grid of ``dom``.

    ``dx`` and ``dy`` are 0 or 1; second derivatives of sines are folded
    into the coefficients by callers.
    """
    t = _tables(dom.N, dom.G, dom.quadrature)
    bx = t.cos if dx else t.sin
    by = t.cos if dy else t.sin
    return bx @ coeff @ by.T


def analyse(values: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """Discrete L2 projection of grid samples onto the N x N sine basis."""
    t = _tables(dom.N, dom.G, dom.quadrature)
    h2 = dom.h * dom.h
    return h2 * (t.sin.T @ values @ t.sin)


def to_grid(f: SpectralField, domain: DomainSpec | None = None) -> GridField:
    dom = f.domain if domain is None else domain
    if dom.N != f.domain.N:
        raise ValueError(f"domain mismatch: N={f.domain.N} vs grid for N={dom.N}")
    return GridField(dom, synth(f.coeff, dom))


def from_grid(g: GridField, domain: DomainSpec | None = None) -> SpectralField:
    """Project grid samples onto the truncated basis; result uses ``domain`` if given."""
    out = g.domain if domain is None else domain
    if out.N != g.domain.N:
        raise ValueError(f"domain mismatch: grid for N={g.domain.N} vs N={out.N}")
    return SpectralField(out, analyse(g.values, g.domain))


def evaluate(f: SpectralField, x, y) -> np.ndarray:
    """Evaluate the sine series at arbitrary points (broadcast over x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = np.pi * np.arange(1, f.domain.N + 1)
    sx = np.sqrt(2.0) * np.sin(x[..., None] * k)
    sy = np.sqrt(2.0) * np.sin(y[..., None] * k)
    return np.einsum("...m,mn,...n->...", sx, f.coeff, sy)


# -- multipliers ------------------------------------------------------------


def multiplier_values(domain: DomainSpec, m) -> np.ndarray:
    """Evaluate a scalar multiplier of the eigenvalue on the mode box."""
    vals = np.asarray(m(domain.eigenvalues), dtype=float)
    if vals.shape != (domain.N, domain.N):
        vals = np.broadcast_to(vals, (domain.N, domain.N))
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite at every eigenvalue")
    return vals


def apply_multiplier(f: SpectralField, m) -> SpectralField:
    """Apply m(A_D): each coefficient is scaled by m evaluated at its eigenvalue."""
    return SpectralField(f.domain, multiplier_values(f.domain, m) * f.coeff)


def lambda_pow(f: SpectralField, s: float) -> SpectralField:
    """Apply Lambda_D^s = A_D^(s/2)."""
    if s == 0:
        return f
    return SpectralField(f.domain, f.domain.eigenvalues ** (0.5 * s) * f.coeff)


def laplacian(f: SpectralField) -> SpectralField:
    """Delta f = -A_D f."""
    return SpectralField(f.domain, -f.domain.eigenvalues * f.coeff)


def resolvent(f: SpectralField, mu: float) -> SpectralField:
    """(1 + mu A_D)^{-1} f."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    if mu == 0:
        return f
    return SpectralField(f.domain, f.coeff / (1.0 + mu * f.domain.eigenvalues))


# -- derivatives on the grid -------------------------------------------------


def gradient(f: SpectralField, domain: DomainSpec | None = None) -> VectorGridField:
    dom = f.domain if domain is None else domain
    return VectorGridField(
        GridField(dom, synth(f.coeff, dom, dx=1)),
        GridField(dom, synth(f.coeff, dom, dy=1)),
    )


def perp_gradient(f: SpectralField, domain: DomainSpec | None = None) -> VectorGridField:
    """(-d_y f, d_x f)."""
    dom = f.domain if domain is None else domain
    return VectorGridField(
        GridField(dom, -synth(f.coeff, dom, dy=1)),
        GridField(dom, synth(f.coeff, dom, dx=1)),
    )


def hessian_norm(f: SpectralField, domain: DomainSpec | None = None) -> GridField:
    """Pointwise Frobenius norm of the Hessian."""
    dom = f.domain if domain is None else domain
    k = _tables(dom.N, dom.G, dom.quadrature).wavenumber
    fxx = synth(-(k**2)[:, None] * f.coeff, dom)
    fyy = synth(-(k**2)[None, :] * f.coeff, dom)
    fxy = synth(f.coeff, dom, dx=1, dy=1)
    return GridField(dom, np.sqrt(fxx**2 + 2 * fxy**2 + fyy**2))


def derivative_norm(f: SpectralField, order: int, domain: DomainSpec | None = None) -> GridField:
    """Pointwise |nabla^order f| for order in {0, 1, 2}."""
    if order == 0:
        return to_grid(f, domain)
    if order == 1:
        return gradient(f, domain).magnitude()
    if order == 2:
        return hessian_norm(f, domain)
    raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")


# -- quadrature --------------------------------------------------------------


def lp_norm_values(values: np.ndarray, dom: DomainSpec, p: float) -> np.ndarray:
    """L^p norms over the last two axes of grid sample arrays."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=(-2, -1))
    h2 = dom.h * dom.h
    if p == 2:
        return np.sqrt(h2 * np.sum(a * a, axis=(-2, -1)))
    if p == 1:
        return h2 * np.sum(a, axis=(-2, -1))
    return (h2 * np.sum(a**p, axis=(-2, -1))) ** (1.0 / p)


def lp_norm(g: GridField, p: float) -> float:
    return float(lp_norm_values(g.values, g.domain, p))


# -- exact L2 projection of derivative products -----------------------------


def _sine_cosine_overlap(N: int, L: int) -> np.ndarray:
    """(L+1, N) matrix of int_0^1 cos(k pi x) sqrt(2) sin(m pi x) dx."""
    k = np.arange(L + 1)[:, None]
    m = np.arange(1, N + 1)[None, :]
    odd = (k + m) % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(odd, 2.0 * m / (np.pi * (m * m - k * k)), 0.0)
    return np.sqrt(2.0) * val


@functools.lru_cache(maxsize=32)
def _product_tables(N: int, L: int):
    x = np.arange(L + 1) / L
    k = np.pi * np.arange(1, N + 1)
    sin_t = np.sin(np.outer(x, k))
    cos_t = np.cos(np.outer(x, k))
    # samples -> cosine coefficients (DCT-I on the closed grid)
    kk = np.arange(L + 1)
    w = np.full(L + 1, 2.0 / L)
    w[[0, L]] /= 2.0
    dct = (np.cos(np.pi * np.outer(kk, kk) / L) * w[None, :])
    dct[[0, L], :] /= 2.0
    cos_proj = _sine_cosine_overlap(N, L).T @ dct  # (N, L+1)
    sin_proj = np.zeros((N, L + 1))
    sin_proj[:, 1:L] = np.sqrt(2.0) / L * np.sin(np.pi * np.outer(np.arange(1, N + 1), np.arange(1, L)) / L)
    return sin_t, cos_t, k, sin_proj, cos_proj


def _axis_factor(N: int, L: int, order: int):
    """Evaluation matrix of d^order of sqrt(2) sin(k pi x) on the closed grid, and its parity."""
    sin_t, cos_t, k, _, _ = _product_tables(N, L)
    if order % 2 == 0:
        return np.sqrt(2.0) * (-1) ** (order // 2) * sin_t * k**order, "sin"
    return np.sqrt(2.0) * (-1) ** ((order - 1) // 2) * cos_t * k**order, "cos"


def project_product(f: SpectralField, g: SpectralField, f_orders=(0, 0), g_orders=(0, 0)) -> SpectralField:
    """Exact L2 projection of (d^a f)(d^b g) onto the truncated sine basis.

    ``f_orders`` and ``g_orders`` give the (x, y) derivative orders.  The
    product is a trigonometric polynomial of degree <= 2N per axis whose
    parity (sine or cosine type) is known, so sampling on a closed grid with
    more than 2N intervals recovers it exactly; cosine-type directions are then
    projected with the closed-form cosine/sine overlap integrals.
    """
    _check_same(f, g)
    N = f.domain.N
    L = 2 * N + 2
    proj = []
    evals = []
    for axis in range(2):
        ef, pf = _axis_factor(N, L, f_orders[axis])
        eg, pg = _axis_factor(N, L, g_orders[axis])
        evals.append((ef, eg))
        _, _, _, sin_proj, cos_proj = _product_tables(N, L)
        proj.append(sin_proj if pf != pg else cos_proj)
    vf = evals[0][0] @ f.coeff @ evals[1][0].T
    vg = evals[0][1] @ g.coeff @ evals[1][1].T
    return SpectralField(f.domain, proj[0] @ (vf * vg) @ proj[1].T)
