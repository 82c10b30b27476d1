import math

import numpy as np
import pytest

from sqgbesov.dyadic import BesovIndex, besov_norm
from sqgbesov.evolution import (
    BlowUpError,
    PicardNonConvergence,
    SolverConfig,
    Trajectory,
    diagnostics,
    existence_window,
    gronwall_check,
    mu_sweep,
    picard_solve,
    rk4_solve,
    solve,
)
from sqgbesov.experiments import random_field
from sqgbesov.spectral import DomainSpec, SpectralField, evaluate, to_grid

MODES = [(1, 1), (1, 2), (2, 1), (2, 3), (3, 3), (4, 1), (1, 5), (5, 4), (6, 6), (8, 3)]


@pytest.fixture(scope="module")
def dom():
    return DomainSpec(8, 12)


@pytest.fixture(scope="module")
def smooth():
    return random_field(DomainSpec(16, 24), seed=3, besov=20.0)


# -- configuration -------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(T=0.0, dt=0.1), dict(T=0.1, dt=-1e-3), dict(T=0.1, dt=0.02, window=0.01),
                                dict(T=0.1, dt=0.01, window=0.2), dict(T=0.1, dt=0.03),
                                dict(T=0.1, dt=0.01, picard_tol=0), dict(T=0.1, dt=0.01, picard_max_iter=0)])
def test_solver_config_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_solver_config_defaults_and_replace():
    cfg = SolverConfig(0.1, 1e-3)
    assert cfg.window == 0.1 and cfg.steps == 100
    short = cfg.replace(T=0.05)
    assert short.window == 0.05 and short.steps == 50
    with pytest.raises(ValueError):
        SolverConfig(0.1, 1e-3, stepper="euler")


def test_trajectory_validation(dom):
    with pytest.raises(ValueError):
        Trajectory(dom, [0.0, 0.0], np.zeros((2, 8, 8)))
    with pytest.raises(ValueError):
        Trajectory(dom, [0.0], np.zeros((1, 4, 4)))
    with pytest.raises(ValueError):
        Trajectory.from_states([], [])


# -- exact solutions ---------------------------------------------------------------


@pytest.mark.parametrize("m,n", MODES)
@pytest.mark.parametrize("mu", [0.0, 1e-2])
def test_single_mode_steady(m, n, mu):
    dom = DomainSpec(8, 12)
    e = SpectralField.mode(dom, m, n, 0.8)
    traj = solve(e, mu, SolverConfig(0.1, 0.01))
    assert np.abs(traj.coeffs - e.coeff).max() <= 1e-12


def test_single_mode_one_picard_iteration(dom):
    e = SpectralField.mode(dom, 2, 3)
    traj = picard_solve(e, 1e-2, SolverConfig(0.1, 0.01, window=0.05))
    assert traj.picard_iterations == [1, 1]


def test_zero_data(dom):
    z = SpectralField.zeros(dom)
    for mu in (0.0, 0.1):
        traj = solve(z, mu, SolverConfig(0.05, 0.01))
        assert not traj.coeffs.any()
        assert not traj.diagnostics["besov_2_2_1"].any()


# -- invariants ----------------------------------------------------------------------


def test_l2_conservation_rk4(smooth):
    traj = rk4_solve(smooth, 0.0, SolverConfig(0.05, 1e-3))
    l2 = traj.diagnostics["l2_norm"]
    assert np.abs(l2 / l2[0] - 1).max() <= 1e-8
    assert np.abs(traj.coeffs[-1] - traj.coeffs[0]).max() > 1e-6  # the flow is not trivial


def test_l2_conservation_picard(smooth):
    traj = picard_solve(smooth, 1e-2, SolverConfig(0.05, 1e-3, window=0.01))
    l2 = traj.diagnostics["l2_norm"]
    assert np.abs(l2 / l2[0] - 1).max() <= 1e-8


def test_boundary_values_vanish(smooth):
    traj = rk4_solve(smooth, 0.0, SolverConfig(0.02, 1e-3))
    dom = DomainSpec(16, 24)
    x = np.array([0.0, 1.0])
    y = np.linspace(0, 1, 7)
    vals = evaluate(traj.final, np.repeat(x, 7), np.tile(y, 2))
    assert np.abs(vals).max() <= 1e-12 * np.abs(to_grid(traj.final).values).max()
    assert traj.domain == dom


def test_time_continuity(smooth):
    # largest B^2_{2,1} jump between adjacent stored states shrinks in proportion to dt
    jumps = []
    for dt in (4e-3, 2e-3, 1e-3):
        traj = rk4_solve(smooth, 0.0, SolverConfig(0.02, dt))
        jumps.append(diagnostics(np.diff(traj.coeffs, axis=0), traj.domain)["besov_2_2_1"].max())
    assert jumps[0] > jumps[1] > jumps[2]
    assert jumps[0] / jumps[1] == pytest.approx(2, rel=0.05)


def test_rk4_self_convergence(smooth):
    big = smooth * 10.0
    finals = [rk4_solve(big, 0.0, SolverConfig(0.04, dt)).final.coeff for dt in (4e-3, 2e-3, 1e-3)]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert ratio == pytest.approx(16, rel=0.1)


def test_picard_second_order(smooth):
    big = smooth * 10.0
    finals = [picard_solve(big, 1e-2, SolverConfig(0.04, dt)).final.coeff for dt in (4e-3, 2e-3, 1e-3)]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert ratio == pytest.approx(4, rel=0.1)


# -- failure handling ------------------------------------------------------------------


def test_window_halving_recovers(smooth):
    big = smooth * 50.0
    cfg = SolverConfig(0.02, 1e-3, picard_max_iter=6)
    traj = picard_solve(big, 1e-2, cfg)
    # one 20-step window does not converge in 6 iterations; halving gives 10 windows of 2 steps
    assert len(traj.picard_iterations) == 10
    ref = rk4_solve(big, 1e-2, SolverConfig(0.02, 1e-3))
    assert np.linalg.norm(traj.final.coeff - ref.final.coeff) <= 1e-4 * ref.final.l2_norm()


def test_picard_nonconvergence_raises(smooth):
    with pytest.raises(PicardNonConvergence):
        picard_solve(smooth * 1e4, 1e-2, SolverConfig(0.01, 1e-2, picard_max_iter=2))


def test_blow_up_detected(smooth):
    with pytest.raises(BlowUpError):
        rk4_solve(smooth, 0.0, SolverConfig(0.01, 1e-3, grad_ceiling=1e-3))


# -- existence window ---------------------------------------------------------------------


def test_existence_window(dom):
    assert existence_window(SpectralField.zeros(dom)) == math.inf
    e = SpectralField.mode(dom, 1, 1)
    lam2 = 2 * math.pi**2
    nrm = besov_norm(e, BesovIndex(2, 2, 1))
    assert nrm == pytest.approx(lam2, rel=0.5)
    assert existence_window(e, 0.2) == pytest.approx(0.2 / nrm, rel=1e-14)
    assert existence_window(e * 3.0) == pytest.approx(existence_window(e) / 3, rel=1e-14)


# -- mu sweep --------------------------------------------------------------------------------


def test_mu_sweep_single_mode(dom):
    e = SpectralField.mode(dom, 2, 1)
    rep = mu_sweep(e, [1e-1, 1e-2, 1e-3], SolverConfig(0.05, 0.01))
    assert max(rep.differences) <= 1e-15 and rep.mu0_difference <= 1e-15
    assert rep.cl_norms[0] == pytest.approx(rep.cl_norms[-1], rel=1e-14)
    assert rep.uniform_bound_ok


def test_mu_sweep_single_value(dom):
    rep = mu_sweep(SpectralField.mode(dom, 1, 1), [0.1], SolverConfig(0.02, 0.01))
    assert rep.differences == [] and rep.rate is None
    assert rep.uniform_bound_ok and rep.cauchy_ok


@pytest.mark.parametrize("mus", [[], [0.1, 0.1], [1e-2, 1e-1], [0.1, 0.0]])
def test_mu_sweep_rejects(dom, mus):
    with pytest.raises(ValueError):
        mu_sweep(SpectralField.mode(dom, 1, 1), mus, SolverConfig(0.02, 0.01))


def test_mu_sweep_keeps_trajectories(smooth):
    rep = mu_sweep(smooth, [1e-1, 1e-2], SolverConfig(0.02, 1e-3), keep=True)
    assert len(rep.trajectories) == 3
    assert rep.trajectories[-1].mu == 0.0


# -- Gronwall -------------------------------------------------------------------------------


def test_gronwall_zero_perturbation(smooth):
    rep = gronwall_check(smooth, SpectralField.zeros(smooth.domain), 0.0, SolverConfig(0.02, 1e-3))
    assert np.all(rep.ratio == 1) and rep.constant == 0 and rep.holds


def test_gronwall_same_mode_perturbation(dom):
    e = SpectralField.mode(dom, 2, 2)
    rep = gronwall_check(e, e * 1e-3, 0.0, SolverConfig(0.05, 0.01))
    # both runs are steady, so the difference stays put
    assert np.abs(rep.ratio - 1).max() <= 1e-10
    assert rep.holds


def test_gronwall_envelope_on_random_data(smooth):
    pert = random_field(smooth.domain, seed=3, stream=1, besov=1e-6)
    rep = gronwall_check(smooth * 10.0, pert, 0.0, SolverConfig(0.05, 1e-3))
    assert rep.ratio[0] == 1.0
    assert rep.holds and 0 <= rep.constant < 10
    assert np.all(np.diff(rep.grad_integral) > 0)
