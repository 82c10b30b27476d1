import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqgbesov.nonlinear import (
    Dealias,
    NonlinearityConfig,
    advection,
    divergence,
    nonlinear_coeffs,
    nonlinearity,
    regularized,
    velocity,
)
from sqgbesov.spectral import DomainSpec, SpectralField, apply_multiplier, lambda_pow, project_product, resolvent

PI = math.pi


def rand(dom, seed, r=3.0):
    rng = np.random.default_rng(seed)
    m = np.arange(1, dom.N + 1)
    c = rng.standard_normal((dom.N, dom.N)) * (m[:, None] ** 2 + m[None, :] ** 2) ** (-r / 2)
    return SpectralField(dom, c)


def test_config_validation():
    with pytest.raises(ValueError):
        NonlinearityConfig(-1.0)
    assert NonlinearityConfig(0.1, "none").dealias is Dealias.NONE
    dom = DomainSpec(16, 16)
    assert NonlinearityConfig().product_grid(dom).G == 24
    assert NonlinearityConfig(0, Dealias.NONE).product_grid(dom) is dom


def test_velocity_single_mode():
    dom = DomainSpec(4, 10)
    x = dom.nodes
    u = velocity(SpectralField.mode(dom, 1, 1))
    amp = (2 * PI**2) ** -0.5
    np.testing.assert_allclose(u.x.values, -amp * 2 * PI * np.outer(np.sin(PI * x), np.cos(PI * x)), atol=1e-14)
    np.testing.assert_allclose(u.y.values, amp * 2 * PI * np.outer(np.cos(PI * x), np.sin(PI * x)), atol=1e-14)


def test_velocity_zero():
    u = velocity(SpectralField.zeros(DomainSpec(4, 6)))
    assert not u.x.values.any() and not u.y.values.any()


def test_divergence_free():
    dom = DomainSpec(32, 48)
    theta = rand(dom, 1)
    div = divergence(theta)
    u = velocity(theta)
    assert np.linalg.norm(div) <= 1e-10 * np.linalg.norm(u.magnitude().values)


@pytest.mark.parametrize("m,n", [(1, 1), (2, 3), (5, 1), (7, 7)])
def test_single_mode_is_steady(m, n):
    dom = DomainSpec(8, 12)
    e = SpectralField.mode(dom, m, n, 0.7)
    assert np.abs(advection(e, e).coeff).max() <= 1e-12
    assert np.abs(regularized(e, e, 1e-2).coeff).max() <= 1e-12


def test_zero_arguments():
    dom = DomainSpec(8, 12)
    f = rand(dom, 2)
    z = SpectralField.zeros(dom)
    assert not advection(z, f).coeff.any()
    assert not advection(f, z).coeff.any()


def test_domain_mismatch():
    with pytest.raises(ValueError):
        advection(SpectralField.zeros(DomainSpec(4, 6)), SpectralField.zeros(DomainSpec(5, 8)))


def test_regularized_rejects_nonpositive_mu():
    f = SpectralField.zeros(DomainSpec(4, 6))
    with pytest.raises(ValueError):
        regularized(f, f, 0.0)


def test_advection_equals_exact_projection():
    # independent oracle: exact L2 projection of -psi_y g_x + psi_x g_y
    dom = DomainSpec(12, 18)
    theta, g = rand(dom, 3), rand(dom, 4)
    psi = lambda_pow(theta, -1.0)
    exact = project_product(psi, g, (1, 0), (0, 1)).coeff - project_product(psi, g, (0, 1), (1, 0)).coeff
    np.testing.assert_allclose(advection(theta, g).coeff, exact, atol=1e-12 * np.abs(exact).max())


def test_aliasing_without_dealiasing():
    dom = DomainSpec(12, 12)
    theta = rand(dom, 5, r=1.0)
    full = advection(theta, theta)
    raw = advection(theta, theta, Dealias.NONE)
    assert np.linalg.norm(raw.coeff - full.coeff) > 1e-6 * np.linalg.norm(full.coeff)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), N=st.integers(2, 24))
def test_energy_identity(seed, N):
    dom = DomainSpec(N, N + N // 2)
    theta = rand(dom, seed)
    assert abs(advection(theta, theta).inner(theta)) <= 1e-10 * theta.l2_norm() ** 2


def test_skew_symmetry_general_transport():
    dom = DomainSpec(24, 36)
    theta, g = rand(dom, 6), rand(dom, 7)
    assert abs(advection(theta, g).inner(g)) <= 1e-10 * g.l2_norm() ** 2 * max(1.0, theta.l2_norm())


def test_bilinearity():
    dom = DomainSpec(16, 24)
    a, b, c = rand(dom, 8), rand(dom, 9), rand(dom, 10)
    for op in (advection, lambda x, y: regularized(x, y, 1e-2)):
        lhs = op(a * 2.0 + b * -0.5, c).coeff
        rhs = 2.0 * op(a, c).coeff - 0.5 * op(b, c).coeff
        assert np.linalg.norm(lhs - rhs) <= 1e-11 * np.linalg.norm(rhs)
        lhs = op(c, a * 2.0 + b * -0.5).coeff
        rhs = 2.0 * op(c, a).coeff - 0.5 * op(c, b).coeff
        assert np.linalg.norm(lhs - rhs) <= 1e-11 * np.linalg.norm(rhs)


def test_regularized_definition_and_contraction():
    dom = DomainSpec(16, 24)
    theta, g = rand(dom, 11), rand(dom, 12)
    mu = 1e-2
    inner = advection(theta, resolvent(g, mu))
    expected = resolvent(inner, mu).coeff
    np.testing.assert_allclose(regularized(theta, g, mu).coeff, expected, atol=1e-13 * np.abs(expected).max())
    assert regularized(theta, g, mu).l2_norm() <= inner.l2_norm()


def test_regularized_converges_monotonically():
    dom = DomainSpec(24, 36)
    theta = rand(dom, 13)
    n0 = advection(theta, theta)
    errs = [(regularized(theta, theta, mu) - n0).l2_norm() for mu in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_resolvent_commutes_with_multipliers():
    dom = DomainSpec(16, 24)
    f = rand(dom, 14)
    m = lambda a: np.exp(-a / 500)  # noqa: E731
    lhs = resolvent(apply_multiplier(f, m), 0.03).coeff
    rhs = apply_multiplier(resolvent(f, 0.03), m).coeff
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


def test_batched_coefficients_match_fieldwise():
    dom = DomainSpec(8, 12)
    a = np.stack([rand(dom, s).coeff for s in range(3)])
    b = rand(dom, 7).coeff
    batched = nonlinear_coeffs(a, b[None], dom, NonlinearityConfig(1e-2))
    for k in range(3):
        single = nonlinearity(SpectralField(dom, a[k]), SpectralField(dom, b), NonlinearityConfig(1e-2))
        np.testing.assert_allclose(batched[k], single.coeff, rtol=1e-13, atol=1e-15)
