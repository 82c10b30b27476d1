"""
Measured constants for the functional inequalities behind the SQG theory.

Every check returns a :class:`VerificationReport` holding one ratio
LHS / RHS per (resolution, mu, sample, block).  A report passes when all
ratios are finite, the worst ratio does not grow by more than
``growth_slack`` from the coarsest to the finest resolution, and (for the
mu-dependent checks) the worst ratio varies by at most ``mu_slack`` across
the mu values.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    BesovIndex,
    DyadicProfile,
    besov_norm,
    besov_norm_equiv,
    low_pass_multiplier,
    phi_multiplier,
    psi_range,
    psi_values,
)
from .nonlinear import NonlinearityConfig, nonlinear_coeffs
from .spectral import (
    DomainSpec,
    Quadrature,
    SpectralField,
    dealias_size,
    derivative_norm,
    lp_norm_values,
    project_product,
)

GUARD = 1e-14


class Profile(str, enum.Enum):
    FLAT = "flat"
    DECAY = "decay"


@dataclass(frozen=True)
class EnsembleSpec:
    count: int = 100
    profile: Profile = Profile.DECAY
    r: float = 4.0
    seed: int = 0
    resolutions: tuple[int, ...] = (32, 48, 64)

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(self.profile))
        object.__setattr__(self, "resolutions", tuple(int(n) for n in self.resolutions))
        if self.count < 1:
            raise ValueError("ensemble count must be >= 1")
        if not self.resolutions:
            raise ValueError("at least one resolution is required")


def ensemble_domain(N: int) -> DomainSpec:
    # midpoint nodes integrate products of derivative cosines exactly
    return DomainSpec(N, dealias_size(N, Quadrature.MIDPOINT), Quadrature.MIDPOINT)


def sample(spec: EnsembleSpec, k: int, N: int, stream: int = 0) -> SpectralField:
    """Sample ``k`` of the seeded ensemble, truncated to N modes.

    Draws are made at the largest configured resolution, so the fields at
    coarser N are the low-mode parts of the same random functions.
    """
    n_gen = max(max(spec.resolutions), N)
    rng = np.random.default_rng([spec.seed, stream, k])
    z = rng.standard_normal((n_gen, n_gen))
    if spec.profile is Profile.DECAY:
        m = np.arange(1, n_gen + 1)
        z = z * (m[:, None] ** 2 + m[None, :] ** 2) ** (-spec.r / 2)
    return SpectralField(ensemble_domain(N), z[:N, :N])


def ensemble(spec: EnsembleSpec, N: int, stream: int = 0) -> list[SpectralField]:
    return [sample(spec, k, N, stream) for k in range(spec.count)]


def normalized(f: SpectralField, s: float = 2.0) -> SpectralField:
    """Scale f to unit B^s_{2,1} norm."""
    return f * (1.0 / besov_norm(f, BesovIndex(s, 2.0, 1.0)))


@dataclass
class VerificationReport:
    inequality_id: str
    N: list[int] = field(default_factory=list)
    mu: list[float] = field(default_factory=list)
    sample: list[int] = field(default_factory=list)
    j: list[int] = field(default_factory=list)
    ratio: list[float] = field(default_factory=list)
    skipped: int = 0
    growth_slack: float = 1.5
    mu_slack: float | None = None
    bound: float | None = None
    spread_slack: float | None = None
    fit_ok: bool = True

    def add(self, N: int, mu: float, sample: int, js, ratios) -> None:
        js = np.atleast_1d(js)
        ratios = np.atleast_1d(ratios)
        self.N.extend([int(N)] * len(js))
        self.mu.extend([float(mu)] * len(js))
        self.sample.extend([int(sample)] * len(js))
        self.j.extend(int(j) for j in js)
        self.ratio.extend(float(r) for r in ratios)

    def summary(self) -> dict[tuple[int, float], float]:
        """Worst ratio per (N, mu), in stable order."""
        out: dict[tuple[int, float], float] = {}
        for n, m, r in zip(self.N, self.mu, self.ratio):
            key = (n, m)
            out[key] = max(out.get(key, 0.0), r)
        return dict(sorted(out.items(), key=lambda kv: (kv[0][0], -_mu_key(kv[0][1]))))

    def resolution_growth(self) -> dict[float, float]:
        """max ratio at the finest N over max ratio at the coarsest N, per mu."""
        summ = self.summary()
        out = {}
        for m in sorted({k[1] for k in summ}, key=lambda v: -_mu_key(v)):
            by_n = sorted((n, v) for (n, mm), v in summ.items() if _same(mm, m))
            lo, hi = by_n[0][1], by_n[-1][1]
            out[m] = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
        return out

    def mu_spread(self) -> dict[int, float]:
        """max over mu / min over mu of the worst ratio, per N."""
        summ = self.summary()
        out = {}
        for n in sorted({k[0] for k in summ}):
            vals = [v for (nn, _), v in summ.items() if nn == n]
            lo, hi = min(vals), max(vals)
            out[n] = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
        return out

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratio))) and all(r >= 0 for r in self.ratio)

    @property
    def passed(self) -> bool:
        if not self.finite or not self.fit_ok:
            return False
        if self.bound is not None and self.ratio and max(self.ratio) > self.bound:
            return False
        if any(g > self.growth_slack for g in self.resolution_growth().values()):
            return False
        if self.mu_slack is not None and any(s > self.mu_slack for s in self.mu_spread().values()):
            return False
        if self.spread_slack is not None and self.spread() > self.spread_slack:
            return False
        return True

    def spread(self) -> float:
        """max / min over every recorded ratio."""
        if not self.ratio:
            return 1.0
        lo, hi = min(self.ratio), max(self.ratio)
        return hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)

    def rows(self) -> list[tuple[str, int, float, float]]:
        return [(self.inequality_id, n, m, v) for (n, m), v in self.summary().items()]


def _mu_key(m: float) -> float:
    return -math.inf if math.isnan(m) else m


def _same(a: float, b: float) -> bool:
    return (math.isnan(a) and math.isnan(b)) or a == b


def _map(fn, items, jobs: int | None):
    if jobs is None or jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- norm equivalence -------------------------------------------------------


def check_norm_equivalence(spec: EnsembleSpec, idx: BesovIndex = BesovIndex(2.0, 2.0, 1.0),
                           spread_slack: float = 50.0, jobs: int | None = None) -> VerificationReport:
    """Ratio of the resolvent-based norm to the dyadic norm on every sample."""
    rep = VerificationReport(f"norm_equivalence[s={_fmt(idx.s)},p={_fmt(idx.p)},q={_fmt(idx.q)}]",
                             spread_slack=spread_slack)
    for N in spec.resolutions:
        def one(k):
            f = sample(spec, k, N)
            den = besov_norm(f, idx)
            return None if den == 0 else besov_norm_equiv(f, idx) / den

        for k, val in enumerate(_map(one, range(spec.count), jobs)):
            if val is None:
                rep.skipped += 1
            else:
                rep.add(N, math.nan, k, -1, val)
    return rep


# -- Bernstein inequalities ----------------------------------------------


def bernstein_ratios(f: SpectralField, p: float, r: float, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block ratio ||grad^alpha phi_j f||_p / (2^{alpha j + 2(1/r - 1/p) j} ||phi_j f||_r).

    Blocks with negligible content are dropped; returns (js, ratios).
    """
    if r > p:
        raise ValueError(f"Bernstein bounds need r <= p, got r={r}, p={p}")
    dom = f.domain
    js = np.array(DyadicProfile.for_domain(dom).blocks)
    total = f.l2_norm()
    keep, out = [], []
    for j in js:
        block = SpectralField(dom, phi_multiplier(dom, j) * f.coeff)
        if total == 0 or block.l2_norm() < GUARD * total:
            continue
        num = lp_norm_values(derivative_norm(block, alpha).values, dom, p)
        den = 2.0 ** ((alpha + 2.0 * (1.0 / r - 1.0 / p)) * j) * lp_norm_values(
            derivative_norm(block, 0).values, dom, r)
        keep.append(j)
        out.append(num / den)
    return np.array(keep, dtype=int), np.array(out)


def check_bernstein(spec: EnsembleSpec, p: float, r: float, alpha: int, jobs: int | None = None) -> VerificationReport:
    if r > p:
        raise ValueError(f"Bernstein bounds need r <= p, got r={r}, p={p}")
    if alpha not in (0, 1, 2):
        raise ValueError(f"alpha must be 0, 1 or 2, got {alpha}")
    rep = VerificationReport(f"bernstein[alpha={alpha},r={_fmt(r)},p={_fmt(p)}]")
    for N in spec.resolutions:
        results = _map(lambda k: bernstein_ratios(sample(spec, k, N), p, r, alpha), range(spec.count), jobs)
        for k, (js, ratios) in enumerate(results):
            n_blocks = len(DyadicProfile.for_domain(ensemble_domain(N)).blocks)
            rep.skipped += n_blocks - len(js)
            rep.add(N, math.nan, k, js, ratios)
    return rep


# -- resolvent localisation bounds ----------------------------------------


def _psi_bound_terms(a: np.ndarray, j: int) -> dict[str, float]:
    """Implied constants of the four resolvent bounds for one block over eigenvalues ``a``."""
    psi = psi_values(a, j)
    root = np.sqrt(psi)
    sq = np.sqrt(a)
    scale = 2.0**j
    top = root.max()
    if top == 0:
        return dict.fromkeys(PSI_BOUNDS, 0.0)
    return {
        "psi_le_sqrt": psi.max() / top,
        "grad_psi": (sq * psi).max() / (scale * top),
        "sqrt_psi_grad": (sq * root).max() / scale,
        "grad_resolvent": (sq / (1.0 + a / scale**2)).max() / (scale * top),
    }


PSI_BOUNDS = ("psi_le_sqrt", "grad_psi", "sqrt_psi_grad", "grad_resolvent")


def psi_uniform_constants() -> dict[str, float]:
    """j-independent constants for the four resolvent bounds.

    In t = a / 4^j each numerator factors as (pointwise ratio) * psi^{1/2}, so
    sup(numerator) <= sup(ratio) * sup(psi^{1/2}) on any eigenvalue set.  The
    pointwise suprema are found by a dense logarithmic scan.
    """
    t = np.logspace(-16, 16, 320001)
    psi = psi_values(t, 0)
    root = np.sqrt(psi)
    return {
        "psi_le_sqrt": float(root.max()),
        "grad_psi": float(np.sqrt(t * psi).max()),
        "sqrt_psi_grad": float(np.sqrt(t * psi).max()),
        "grad_resolvent": float((np.sqrt(t) / (1.0 + t) / root).max()),
    }


def check_psi_bounds(domains: list[DomainSpec] | None = None, j_range: range | None = None) -> list[VerificationReport]:
    if domains is None:
        domains = [ensemble_domain(n) for n in (32, 64)]
    limits = psi_uniform_constants()
    reports = {name: VerificationReport(f"psi_bound[{name}]", bound=limits[name] * (1 + 1e-9)) for name in limits}
    for dom in domains:
        a = dom.eigenvalues.ravel()
        js = j_range if j_range is not None else DyadicProfile.for_domain(dom).blocks
        for j in js:
            for name, val in _psi_bound_terms(a, j).items():
                reports[name].add(dom.N, math.nan, 0, j, val)
    return list(reports.values())


# -- bilinear estimate ----------------------------------------------------


def _orders(alpha: int, axis: int) -> tuple[int, int]:
    return (alpha, 0) if axis == 0 else (0, alpha)


def bilinear_ratio(f: SpectralField, g: SpectralField, alpha: int, beta: int, gamma: float,
                   ps: tuple[float, float, float, float]) -> float:
    """||(d_x^alpha f)(d_y^beta g)||_{B^gamma_{2,1}} over the two-term right-hand side."""
    p1, p2, p3, p4 = ps
    if f.l2_norm() == 0 or g.l2_norm() == 0:
        return 0.0
    prod = project_product(f, g, _orders(alpha, 0), _orders(beta, 1))
    lhs = besov_norm(prod, BesovIndex(gamma, 2.0, 1.0))
    rhs = (besov_norm(f, BesovIndex(alpha + gamma, p1, 1.0)) * besov_norm(g, BesovIndex(beta, p2, 1.0))
           + besov_norm(f, BesovIndex(alpha, p3, 1.0)) * besov_norm(g, BesovIndex(beta + gamma, p4, 1.0)))
    return lhs / rhs


def check_bilinear(spec: EnsembleSpec, alpha: int, beta: int, gamma: float,
                   ps: tuple[float, float, float, float] = (2.0, math.inf, math.inf, 2.0),
                   jobs: int | None = None) -> VerificationReport:
    if not 0 < gamma < 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
    p1, p2, p3, p4 = ps
    inv = lambda p: 0.0 if math.isinf(p) else 1.0 / p  # noqa: E731
    if not (math.isclose(inv(p1) + inv(p2), 0.5) and math.isclose(inv(p3) + inv(p4), 0.5)):
        raise ValueError(f"exponents must satisfy 1/2 = 1/p1 + 1/p2 = 1/p3 + 1/p4, got {ps}")
    rep = VerificationReport(f"bilinear[alpha={alpha},beta={beta},gamma={_fmt(gamma)}]")
    for N in spec.resolutions:
        def one(k):
            return bilinear_ratio(sample(spec, k, N, 0), sample(spec, k, N, 1), alpha, beta, gamma, ps)

        for k, val in enumerate(_map(one, range(spec.count), jobs)):
            rep.add(N, math.nan, k, -1, val)
    return rep


# -- nonlinear block sums -------------------------------------------------


def nonlinear_sums(theta: SpectralField, mu: float) -> tuple[float, float] | None:
    """The low- and high-frequency block sums for N_mu, divided by ||theta||^2_{B^2_{2,1}}.

    Returns None for the zero field.
    """
    dom = theta.domain
    nrm = besov_norm(theta, BesovIndex(2.0, 2.0, 1.0))
    if nrm == 0:
        return None
    prof = DyadicProfile.for_domain(dom)
    js = np.array(psi_range(dom, 2.0))
    lam = dom.eigenvalues
    lap = -lam * theta.coeff
    nl = NonlinearityConfig(mu)

    active = [j for j in js if prof.j_min - 1 <= j <= prof.j_max + 1]
    low = np.stack([low_pass_multiplier(dom, j) * theta.coeff for j in active])
    n_low = nonlinear_coeffs(low, theta.coeff[None], dom, nl)
    n_full = nonlinear_coeffs(theta.coeff, theta.coeff, dom, nl)
    n_high = n_full[None] - n_low  # bilinear in the first slot

    lap_norm = np.linalg.norm(lap)
    s_low = s_high = 0.0
    for j in js:
        psi = psi_values(lam, j)
        den = np.linalg.norm(np.sqrt(psi) * lap)
        if den < GUARD * lap_norm:
            continue
        weight = psi * lap
        if j < active[0]:
            nl_low, nl_high = np.zeros_like(n_full), n_full
        elif j > active[-1]:
            nl_low, nl_high = n_full, np.zeros_like(n_full)
        else:
            i = active.index(j)
            nl_low, nl_high = n_low[i], n_high[i]
        # <Delta N, psi_j Delta theta> in coefficient space
        s_low += abs(np.sum(-lam * nl_low * weight)) / den
        s_high += abs(np.sum(-lam * nl_high * weight)) / den
    return s_low / nrm**2, s_high / nrm**2


def check_nonlinear_sums(spec: EnsembleSpec, mus=(1e-1, 1e-2, 1e-3, 1e-4),
                         jobs: int | None = None) -> list[VerificationReport]:
    low = VerificationReport("nonlinear_sum[low]", mu_slack=2.0)
    high = VerificationReport("nonlinear_sum[high]", mu_slack=2.0)
    for N in spec.resolutions:
        for mu in mus:
            res = _map(lambda k: nonlinear_sums(sample(spec, k, N), mu), range(spec.count), jobs)
            for k, val in enumerate(res):
                if val is None:
                    low.skipped += 1
                    high.skipped += 1
                    continue
                low.add(N, mu, k, -1, val[0])
                high.add(N, mu, k, -1, val[1])
    return [low, high]


# -- mu-scaling of the regularised nonlinearity -----------------------------


@dataclass
class ScalingFit:
    mus: np.ndarray
    norms: np.ndarray
    exponent: float | None
    residual: float | None
    gamma: float
    slack: float = 0.1

    @property
    def bound_exponent(self) -> float:
        return -1.0 + self.gamma / 2.0

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.mus)
        return bool(np.all(np.diff(self.norms[order]) <= 1e-12 * self.norms.max()))

    @property
    def passed(self) -> bool:
        if self.exponent is None:
            return True
        return self.exponent >= self.bound_exponent - self.slack and self.monotone


def check_regularized_scaling(theta: SpectralField, gamma: float = 0.25,
                              mus=(1e-1, 1e-2, 1e-3, 1e-4)) -> ScalingFit:
    """Fit the exponent of ||N_mu(theta, theta)||_{B^2_{2,1}} against mu."""
    mus = np.asarray(mus, dtype=float)
    if len(mus) < 3:
        raise ValueError("at least three values of mu are needed for a fit")
    idx = BesovIndex(2.0, 2.0, 1.0)
    norms = np.array([
        besov_norm(SpectralField(theta.domain, nonlinear_coeffs(theta.coeff, theta.coeff, theta.domain,
                                                                NonlinearityConfig(m))), idx)
        for m in mus
    ])
    if np.all(norms <= GUARD * max(1.0, besov_norm(theta, idx) ** 2)):
        return ScalingFit(mus, norms, None, None, gamma)
    coef, res, *_ = np.polyfit(np.log(mus), np.log(norms), 1, full=True)
    resid = float(np.sqrt(res[0] / len(mus))) if len(res) else 0.0
    return ScalingFit(mus, norms, float(coef[0]), resid, gamma)


def scaling_report(fit: ScalingFit, N: int) -> VerificationReport:
    rep = VerificationReport(f"regularized_scaling[gamma={_fmt(fit.gamma)}]", fit_ok=fit.passed)
    # ratio against the bound mu^{-1 + gamma/2}, normalised at the largest mu
    if fit.norms.max() > 0:
        ref = fit.norms[0] / fit.mus[0] ** fit.bound_exponent
        for i, (m, v) in enumerate(zip(fit.mus, fit.norms)):
            rep.add(N, m, 0, -1, v / (ref * m**fit.bound_exponent))
    return rep


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:g}"
