"""
Time integration of d/dt theta + N_mu(theta, theta) = 0.

``picard_solve`` iterates the integral form on short windows with trapezoid
time quadrature; ``rk4_solve`` is the classical explicit four-stage method used
for cross-validation and for the unregularised equation.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import BesovIndex, DyadicProfile, block_norms, chemin_lerner_norm
from .nonlinear import Dealias, NonlinearityConfig, nonlinear_coeffs
from .spectral import DomainSpec, SpectralField, lp_norm_values, synth

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class PicardNonConvergence(SolverError):
    pass


class BlowUpError(SolverError):
    pass


class Stepper(str, enum.Enum):
    PICARD = "picard"
    RK4 = "explicit_rk4"


@dataclass(frozen=True)
class SolverConfig:
    T: float
    dt: float
    window: float | None = None
    picard_tol: float = 1e-12
    picard_max_iter: int = 200
    stepper: Stepper = Stepper.PICARD
    grad_ceiling: float = 1e6

    def __post_init__(self):
        object.__setattr__(self, "stepper", Stepper(self.stepper))
        if self.window is None:
            object.__setattr__(self, "window", self.T)
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.dt <= self.window:
            raise ValueError(f"dt ({self.dt}) must not exceed window ({self.window})")
        if not self.window <= self.T:
            raise ValueError(f"window ({self.window}) must not exceed T ({self.T})")
        if not self.picard_tol > 0:
            raise ValueError(f"picard_tol must be positive, got {self.picard_tol}")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"T ({self.T}) must be an integer multiple of dt ({self.dt})")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def replace(self, **kw) -> "SolverConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "T" in kw and "window" not in kw and self.window > kw["T"]:
            d["window"] = kw["T"]
        d.update(kw)
        return SolverConfig(**d)


def diagnostics(coeffs: np.ndarray, domain: DomainSpec) -> dict[str, np.ndarray]:
    """L2 norm, B^2_{2,1} norm and sup |grad theta| for a stack of states."""
    coeffs = np.asarray(coeffs)
    js = np.array(DyadicProfile.for_domain(domain).blocks)
    besov = block_norms(coeffs, domain, 2.0, js) @ (4.0**js)
    grad = np.sqrt(synth(coeffs, domain, dx=1) ** 2 + synth(coeffs, domain, dy=1) ** 2)
    return {
        "l2_norm": np.sqrt(np.sum(coeffs**2, axis=(-2, -1))),
        "besov_2_2_1": besov,
        "grad_linf": lp_norm_values(grad, domain, math.inf),
    }


@dataclass(eq=False)
class Trajectory:
    domain: DomainSpec
    times: np.ndarray
    coeffs: np.ndarray  # (n_times, N, N)
    mu: float = 0.0
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    picard_iterations: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (self.domain.N, self.domain.N):
            raise ValueError(f"state array shape {self.coeffs.shape} does not match N={self.domain.N}")
        if len(self.times) != len(self.coeffs):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if not self.diagnostics and len(self.times):
            self.diagnostics = diagnostics(self.coeffs, self.domain)

    @classmethod
    def from_states(cls, times, states: list[SpectralField], mu: float = 0.0) -> "Trajectory":
        if not states:
            raise ValueError("empty trajectory")
        return cls(states[0].domain, times, np.stack([s.coeff for s in states]), mu)

    def __len__(self) -> int:
        return len(self.times)

    def coeff_array(self) -> np.ndarray:
        return self.coeffs

    def state(self, i: int) -> SpectralField:
        return SpectralField(self.domain, self.coeffs[i])

    @property
    def final(self) -> SpectralField:
        return self.state(-1)

    def max_l2_difference(self, other: "Trajectory") -> float:
        """sup over common stored times of ||self - other||_{L2}."""
        if len(self) != len(other) or not np.allclose(self.times, other.times, rtol=0, atol=1e-12):
            raise ValueError("trajectories are stored on different time grids")
        return float(np.max(np.linalg.norm(self.coeffs - other.coeffs, axis=(-2, -1))))


def _check_state(c: np.ndarray, domain: DomainSpec, cfg: SolverConfig, t: float) -> None:
    if not np.all(np.isfinite(c)):
        raise BlowUpError(f"non-finite state at t={t:.6g}")
    g = np.sqrt(synth(c, domain, dx=1) ** 2 + synth(c, domain, dy=1) ** 2).max()
    if g > cfg.grad_ceiling:
        raise BlowUpError(f"|grad theta| = {g:.3g} exceeds ceiling {cfg.grad_ceiling:.3g} at t={t:.6g}")


def _picard_window(start: np.ndarray, m: int, dt: float, domain: DomainSpec,
                   nl: NonlinearityConfig, cfg: SolverConfig) -> tuple[np.ndarray, int]:
    x = np.repeat(start[None], m + 1, axis=0)
    for it in range(1, cfg.picard_max_iter + 1):
        f = nonlinear_coeffs(x, x, domain, nl)
        integral = np.zeros_like(x)
        integral[1:] = np.cumsum(0.5 * dt * (f[:-1] + f[1:]), axis=0)
        new = start - integral
        if not np.all(np.isfinite(new)):
            raise BlowUpError("non-finite Picard iterate")
        scale = np.linalg.norm(new, axis=(-2, -1)).max()
        change = np.linalg.norm(new - x, axis=(-2, -1)).max()
        x = new
        if change <= cfg.picard_tol * scale or scale == 0:
            return x, it
    raise PicardNonConvergence(
        f"Picard iteration did not reach tol {cfg.picard_tol:g} in {cfg.picard_max_iter} iterations "
        f"on a window of {m} steps"
    )


def picard_solve(theta0: SpectralField, mu: float, cfg: SolverConfig,
                 dealias: Dealias | str = Dealias.THREE_HALVES) -> Trajectory:
    """Solve theta(t) = theta0 - int_0^t N_mu(theta, theta) by windowed Picard iteration.

    The window is halved on non-convergence, down to a single step.
    """
    nl = NonlinearityConfig(mu, dealias)
    domain = theta0.domain
    dt = cfg.dt
    total = cfg.steps
    per_window = max(1, int(round(cfg.window / dt)))
    states = [theta0.coeff]
    iterations = []
    k = 0
    while k < total:
        m = min(per_window, total - k)
        try:
            block, its = _picard_window(states[-1], m, dt, domain, nl, cfg)
        except PicardNonConvergence:
            if m == 1:
                raise
            per_window = max(1, m // 2)
            log.info("Picard window shrunk to %d steps at t=%.6g", per_window, k * dt)
            continue
        for n in range(1, m + 1):
            _check_state(block[n], domain, cfg, (k + n) * dt)
        states.extend(block[1:])
        iterations.append(its)
        k += m
    times = dt * np.arange(total + 1)
    traj = Trajectory(domain, times, np.stack(states), mu)
    traj.picard_iterations = iterations
    return traj


def rk4_solve(theta0: SpectralField, mu: float, cfg: SolverConfig,
              dealias: Dealias | str = Dealias.THREE_HALVES) -> Trajectory:
    nl = NonlinearityConfig(mu, dealias)
    domain = theta0.domain
    dt = cfg.dt

    def rhs(c):
        return -nonlinear_coeffs(c, c, domain, nl)

    states = [theta0.coeff]
    c = theta0.coeff
    for n in range(1, cfg.steps + 1):
        k1 = rhs(c)
        k2 = rhs(c + 0.5 * dt * k1)
        k3 = rhs(c + 0.5 * dt * k2)
        k4 = rhs(c + dt * k3)
        c = c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_state(c, domain, cfg, n * dt)
        states.append(c)
    return Trajectory(domain, dt * np.arange(cfg.steps + 1), np.stack(states), mu)


def solve(theta0: SpectralField, mu: float, cfg: SolverConfig,
          dealias: Dealias | str = Dealias.THREE_HALVES) -> Trajectory:
    """Dispatch on the configured stepper; mu = 0 always uses RK4."""
    if mu == 0 or cfg.stepper is Stepper.RK4:
        return rk4_solve(theta0, mu, cfg, dealias)
    return picard_solve(theta0, mu, cfg, dealias)


def existence_window(theta0: SpectralField, c_T: float = 0.1) -> float:
    """c_T / ||theta0||_{B^2_{2,1}}; infinite for zero data."""
    from .dyadic import besov_norm

    nrm = besov_norm(theta0, BesovIndex(2.0, 2.0, 1.0))
    if nrm == 0:
        return math.inf
    return c_T / nrm


@dataclass
class SweepReport:
    mus: list[float]
    cl_norms: list[float]
    differences: list[float]
    mu0_difference: float | None = None
    rate: float | None = None
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    @property
    def uniform_bound_ok(self) -> bool:
        """CL norms within a factor 2 and not monotonically increasing as mu decreases."""
        v = np.asarray(self.cl_norms)
        if len(v) < 2:
            return True
        spread = v.max() <= 2.0 * v.min() if v.min() > 0 else v.max() == 0
        increasing = bool(np.all(np.diff(v) > 0))
        return bool(spread and not increasing)

    @property
    def cauchy_ok(self) -> bool:
        d = np.asarray(self.differences)
        if len(d) == 0:
            return True
        if np.all(d == 0):
            ok = True
        else:
            ok = bool(np.all(np.diff(d) < 0))
        if self.mu0_difference is not None and len(d):
            ok = ok and (self.mu0_difference < d[0] or d[0] == self.mu0_difference == 0)
        return ok

    @property
    def passed(self) -> bool:
        return self.uniform_bound_ok and self.cauchy_ok


def mu_sweep(theta0: SpectralField, mus, cfg: SolverConfig, with_mu0: bool = True,
             dealias: Dealias | str = Dealias.THREE_HALVES, keep: bool = False) -> SweepReport:
    """Run the regularised problem for each mu on a common horizon and compare."""
    mus = [float(m) for m in mus]
    if not mus:
        raise ValueError("empty mu list")
    if any(m <= 0 for m in mus):
        raise ValueError("sweep values of mu must be positive")
    if any(b >= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu list must be strictly decreasing")
    trajs = [solve(theta0, mu, cfg, dealias) for mu in mus]
    cl = [chemin_lerner_norm(t, 2.0) for t in trajs]
    diffs = [a.max_l2_difference(b) for a, b in zip(trajs, trajs[1:])]
    mu0 = None
    if with_mu0:
        ref = rk4_solve(theta0, 0.0, cfg, dealias)
        mu0 = trajs[-1].max_l2_difference(ref)
        if keep:
            trajs.append(ref)
    rate = None
    if len(diffs) >= 2 and all(d > 0 for d in diffs):
        x = np.log(np.asarray(mus[:-1]))
        rate = float(np.polyfit(x, np.log(diffs), 1)[0])
    return SweepReport(mus, cl, diffs, mu0, rate, trajs if keep else [])


@dataclass
class GrowthReport:
    times: np.ndarray
    ratio: np.ndarray
    grad_integral: np.ndarray
    constant: float

    @property
    def envelope(self) -> np.ndarray:
        return np.exp(self.constant * self.grad_integral)

    @property
    def holds(self) -> bool:
        return bool(np.all(self.ratio <= self.envelope * (1 + 1e-12)))


def gronwall_check(theta0: SpectralField, perturbation: SpectralField, mu: float,
                   cfg: SolverConfig, dealias: Dealias | str = Dealias.THREE_HALVES) -> GrowthReport:
    """Perturbation growth against exp(C int_0^t ||grad theta||_inf) with C fitted on the run."""
    base = solve(theta0, mu, cfg, dealias)
    times = base.times
    gint = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (base.diagnostics["grad_linf"][1:]
                                                                    + base.diagnostics["grad_linf"][:-1]))])
    if perturbation.l2_norm() == 0:
        return GrowthReport(times, np.ones_like(times), gint, 0.0)
    pert = solve(theta0 + perturbation, mu, cfg, dealias)
    w = np.linalg.norm(pert.coeffs - base.coeffs, axis=(-2, -1))
    # normalise by the difference actually represented after rounding theta0 + perturbation
    ratio = w / w[0]
    mask = gint > 0
    c = 0.0
    if np.any(mask):
        c = max(0.0, float(np.max(np.log(ratio[mask]) / gint[mask])))
    return GrowthReport(times, ratio, gint, c)
