"""Experiment drivers shared by the command line and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import BesovIndex, besov_norm
from .estimates import (
    EnsembleSpec,
    VerificationReport,
    check_bernstein,
    check_bilinear,
    check_nonlinear_sums,
    check_norm_equivalence,
    check_psi_bounds,
    check_regularized_scaling,
    ensemble_domain,
    sample,
    scaling_report,
)
from .evolution import GrowthReport, SolverConfig, gronwall_check, picard_solve, rk4_solve
from .persist import RunConfig, read_checkpoint
from .spectral import DomainSpec, SpectralField

B221 = BesovIndex(2.0, 2.0, 1.0)
BERNSTEIN_CASES = ((2.0, 2.0), (2.0, math.inf), (1.0, 2.0))  # (r, p)
BILINEAR_ORDERS = ((0, 1), (1, 1))


def random_field(domain: DomainSpec, seed: int, r: float = 4.0, profile: str = "decay",
                 besov: float | None = 1.0, stream: int = 0, n_gen: int = 64) -> SpectralField:
    """Seeded random field on ``domain``; nested in N for a fixed ``n_gen``."""
    spec = EnsembleSpec(1, profile, r, seed, (max(n_gen, domain.N),))
    f = SpectralField(domain, sample(spec, 0, domain.N, stream).coeff)
    if besov is not None:
        f = f * (besov / besov_norm(f, B221))
    return f


def initial_field(cfg: RunConfig, domain: DomainSpec | None = None, stream: int = 0) -> SpectralField:
    dom = cfg.domain if domain is None else domain
    ic = cfg.initial
    if ic.kind == "mode":
        return SpectralField.mode(dom, ic.m, ic.n, ic.amplitude)
    if ic.kind == "file":
        fdom, _, _, coeff = read_checkpoint(ic.path)
        f = SpectralField(fdom, coeff)
        f = f.truncate(dom) if fdom != dom else f
    else:
        n_gen = max([dom.N, cfg.domain.N, *cfg.gronwall.resolutions])
        return random_field(dom, cfg.seed, ic.r, ic.profile.value, ic.besov_norm, stream, n_gen)
    if ic.besov_norm is not None and f.l2_norm() > 0:
        f = f * (ic.besov_norm / besov_norm(f, B221))
    return f


# -- verification suite ------------------------------------------------------


def verify_suite(cfg: RunConfig, jobs: int | None = None) -> list[VerificationReport]:
    """Every inequality check on the configured ensemble, in a fixed order."""
    spec = cfg.ensemble
    v = cfg.verify
    reports = [check_norm_equivalence(spec, jobs=jobs)]
    for r, p in BERNSTEIN_CASES:
        for alpha in (0, 1, 2):
            reports.append(check_bernstein(spec, p, r, alpha, jobs=jobs))
    reports.extend(check_psi_bounds([ensemble_domain(n) for n in spec.resolutions]))
    for alpha, beta in BILINEAR_ORDERS:
        for g in v.gammas:
            reports.append(check_bilinear(spec, alpha, beta, g, jobs=jobs))
    reports.extend(check_nonlinear_sums(spec, v.mus, jobs=jobs))
    for rep in reports:
        rep.growth_slack = v.growth_slack
        if rep.mu_slack is not None:
            rep.mu_slack = v.mu_slack
    theta = sample(spec, 0, max(spec.resolutions))
    fit = check_regularized_scaling(theta, 0.25, v.mus)
    fit.slack = v.scaling_slack
    reports.append(scaling_report(fit, theta.domain.N))
    return reports


# -- integrator cross-validation ---------------------------------------------


@dataclass
class CrossCheck:
    mu: float
    dt: float
    difference: float
    picard_error: float
    rk4_error: float
    rk4_order: float

    @property
    def agreement_ok(self) -> bool:
        return self.difference <= 10.0 * max(self.picard_error, self.rk4_error)

    @property
    def order_ok(self) -> bool:
        return self.rk4_order >= 3.5

    @property
    def passed(self) -> bool:
        return self.agreement_ok and self.order_ok


def integrator_crosscheck(theta0: SpectralField, mu: float, cfg: SolverConfig) -> CrossCheck:
    """Terminal Picard vs RK4 difference against step-doubling error estimates.

    The Picard scheme is second order, RK4 fourth, so the Richardson
    estimates divide the half-step change by 3 and by 15.
    """
    finals = {}
    for k in range(3):
        c = cfg.replace(dt=cfg.dt / 2**k, window=min(cfg.window, cfg.T))
        finals[("rk4", k)] = rk4_solve(theta0, mu, c).final.coeff
        if k < 2:
            finals[("picard", k)] = picard_solve(theta0, mu, c).final.coeff
    nrm = np.linalg.norm
    d_p = nrm(finals[("picard", 0)] - finals[("picard", 1)])
    d_r0 = nrm(finals[("rk4", 0)] - finals[("rk4", 1)])
    d_r1 = nrm(finals[("rk4", 1)] - finals[("rk4", 2)])
    order = math.log2(d_r0 / d_r1) if d_r0 > 0 and d_r1 > 0 else math.inf
    return CrossCheck(mu, cfg.dt, float(nrm(finals[("picard", 0)] - finals[("rk4", 0)])),
                      d_p / 3.0, d_r0 / 15.0, order)


# -- Gronwall study ----------------------------------------------------------


@dataclass
class GronwallStudy:
    resolutions: tuple[int, ...]
    reports: list[GrowthReport]
    max_constant: float = 10.0
    stability: float = 1.5

    @property
    def constants(self) -> list[float]:
        return [r.constant for r in self.reports]

    @property
    def constant_ratio(self) -> float:
        c = self.constants
        lo, hi = min(c), max(c)
        if hi == 0:
            return 1.0
        return hi / lo if lo > 0 else math.inf

    @property
    def passed(self) -> bool:
        return (all(r.holds for r in self.reports) and max(self.constants) <= self.max_constant
                and self.constant_ratio <= self.stability)


def gronwall_study(cfg: RunConfig) -> GronwallStudy:
    """Perturbation growth at each configured resolution with nested data."""
    reports = []
    for N in cfg.gronwall.resolutions:
        dom = DomainSpec(N, max(cfg.domain.G * N // cfg.domain.N, N), cfg.domain.quadrature)
        theta0 = initial_field(cfg, dom)
        pert = initial_field(cfg, dom, stream=1)
        if pert.l2_norm() > 0:
            pert = pert * (cfg.gronwall.perturbation * theta0.l2_norm() / pert.l2_norm())
        reports.append(gronwall_check(theta0, pert, cfg.mu, cfg.solver, cfg.dealias))
    return GronwallStudy(tuple(cfg.gronwall.resolutions), reports)


__all__ = [
    "random_field", "initial_field", "verify_suite", "CrossCheck", "integrator_crosscheck",
    "GronwallStudy", "gronwall_study",
]
