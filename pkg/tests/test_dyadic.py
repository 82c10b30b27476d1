import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqgbesov.dyadic import (
    BesovIndex,
    DyadicProfile,
    besov_norm,
    besov_norm_equiv,
    chemin_lerner_norm,
    high_pass,
    low_pass,
    lq_sum,
    phi0,
    phi_block,
    psi_block,
    psi_range,
    psi_sqrt_block,
    psi_values,
    transition,
)
from sqgbesov.estimates import EnsembleSpec, sample
from sqgbesov.evolution import Trajectory
from sqgbesov.spectral import DomainSpec, SpectralField, laplacian, lp_norm, to_grid

PI = math.pi


def rand(dom, seed, r=4.0):
    rng = np.random.default_rng(seed)
    m = np.arange(1, dom.N + 1)
    c = rng.standard_normal((dom.N, dom.N)) * (m[:, None] ** 2 + m[None, :] ** 2) ** (-r / 2)
    return SpectralField(dom, c)


# -- profile -----------------------------------------------------------------------


def test_transition_shape():
    lam = np.linspace(0, 3, 3001)
    chi = transition(lam)
    assert np.all(chi[lam <= 1] == 1) and np.all(chi[lam >= 2] == 0)
    assert np.all(np.diff(chi) <= 0)


def test_phi0_support_and_sign():
    lam = np.linspace(0, 4, 40001)
    p = phi0(lam)
    assert np.all(p >= 0)
    assert np.all(p[(lam <= 0.5) | (lam >= 2)] == 0)
    assert p.max() == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e6))
def test_partition_of_unity_pointwise(lam):
    js = np.arange(-20, 30)
    assert abs(phi0(lam / 2.0**js).sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("N", [32, 64])
def test_partition_of_unity_on_spectrum(N):
    dom = DomainSpec(N, 3 * N // 2)
    prof = DyadicProfile.for_domain(dom)
    lam = np.sqrt(dom.eigenvalues)
    total = sum(phi0(lam / 2.0**j) for j in range(prof.j_min - 2, prof.j_max + 3))
    assert np.abs(total - 1).max() <= 1e-12


def test_active_range():
    prof = DyadicProfile.for_domain(DomainSpec(64, 96))
    assert prof.j_min == math.floor(math.log2(PI * math.sqrt(2))) - 2
    assert prof.j_max == math.ceil(math.log2(PI * math.sqrt(2) * 64)) + 2
    # blocks outside the active range vanish identically
    dom = DomainSpec(64, 96)
    f = rand(dom, 0)
    assert not phi_block(f, prof.j_min - 1).coeff.any()
    assert not phi_block(f, prof.j_max + 1).coeff.any()


# -- blocks --------------------------------------------------------------------------


def test_reconstruction():
    dom = DomainSpec(32, 48)
    f = rand(dom, 1)
    total = sum(phi_block(f, j).coeff for j in DyadicProfile.for_domain(dom).blocks)
    assert np.linalg.norm(total - f.coeff) <= 1e-12 * f.l2_norm()


def test_single_mode_blocks():
    dom = DomainSpec(8, 12)
    e = SpectralField.mode(dom, 1, 1)
    nz = [j for j in DyadicProfile.for_domain(dom).blocks if phi_block(e, j).coeff.any()]
    assert 1 <= len(nz) <= 2 and (len(nz) == 1 or nz[1] == nz[0] + 1)
    lam = PI * math.sqrt(2)
    assert all(2.0 ** (j - 1) <= lam <= 2.0 ** (j + 1) for j in nz)


def test_zero_block():
    dom = DomainSpec(8, 12)
    assert not phi_block(SpectralField.zeros(dom), 2).coeff.any()


def test_almost_orthogonality():
    dom = DomainSpec(32, 48)
    f = rand(dom, 2)
    blocks = DyadicProfile.for_domain(dom).blocks
    for j in blocks:
        for k in blocks:
            if abs(j - k) >= 2:
                assert np.abs(phi_block(phi_block(f, j), k).coeff).max() <= 1e-14


def test_low_pass_limits_and_decomposition():
    dom = DomainSpec(32, 48)
    f = rand(dom, 3)
    prof = DyadicProfile.for_domain(dom)
    np.testing.assert_allclose(low_pass(f, prof.j_max + 2).coeff, f.coeff, atol=1e-12)
    assert not low_pass(f, prof.j_min - 2).coeff.any()
    j = 4
    np.testing.assert_allclose((low_pass(f, j) + high_pass(f, j)).coeff, f.coeff, rtol=0,
                               atol=1e-15 * np.abs(f.coeff).max())
    partial = sum(phi_block(f, k).coeff for k in range(prof.j_min - 2, j + 1))
    np.testing.assert_allclose(low_pass(f, j).coeff, partial, atol=1e-13)


def test_psi_values():
    for j in (-3, 0, 5):
        assert psi_values(4.0**j, j) == pytest.approx(0.3, rel=1e-14)
    a = np.logspace(-6, 8, 200)
    direct = 1 / (1 + 4.0**-3 * a) - 1 / (1 + 4.0**-2 * a)
    # the direct difference cancels for small a; compare absolutely
    np.testing.assert_allclose(psi_values(a, 2), direct, rtol=1e-9, atol=1e-15)
    assert np.all(psi_values(a, 2) >= 0) and np.all(psi_values(a, 2) < 1)


def test_psi_sqrt_squares_to_psi():
    dom = DomainSpec(16, 24)
    f = rand(dom, 4)
    for j in (0, 3, 6):
        np.testing.assert_allclose(psi_sqrt_block(psi_sqrt_block(f, j), j).coeff, psi_block(f, j).coeff,
                                   rtol=1e-13, atol=1e-300)


# -- Besov norms ----------------------------------------------------------------------


def test_single_mode_besov_scalar_oracle():
    dom = DomainSpec(8, 12)
    e = SpectralField.mode(dom, 1, 1)
    lam = PI * math.sqrt(2)
    js = np.arange(-5, 10)
    expected = float(np.sum(phi0(lam / 2.0**js)))
    assert besov_norm(e, BesovIndex(0, 2, 1)) == pytest.approx(expected, rel=1e-14)
    expected_s2 = float(np.sum(4.0**js * phi0(lam / 2.0**js)))
    assert besov_norm(e, BesovIndex(2, 2, 1)) == pytest.approx(expected_s2, rel=1e-14)


def test_besov_zero_and_homogeneity():
    dom = DomainSpec(16, 24)
    f = rand(dom, 5)
    for idx in (BesovIndex(2, 2, 1), BesovIndex(1, math.inf, 2), BesovIndex(0.5, 1, math.inf)):
        assert besov_norm(SpectralField.zeros(dom), idx) == 0
        assert besov_norm(f * 3.0, idx) == pytest.approx(3 * besov_norm(f, idx), rel=1e-12)


def test_besov_p2_matches_grid_quadrature():
    dom = DomainSpec(16, 24)
    f = rand(dom, 6)
    js = DyadicProfile.for_domain(dom).blocks
    direct = sum(4.0**j * lp_norm(to_grid(phi_block(f, j)), 2) for j in js)
    assert besov_norm(f, BesovIndex(2, 2, 1)) == pytest.approx(direct, rel=1e-12)


def test_lq_sum():
    t = np.array([3.0, 4.0])
    assert lq_sum(t, 1) == 7 and lq_sum(t, 2) == pytest.approx(5) and lq_sum(t, math.inf) == 4
    assert lq_sum(np.array([]), 2) == 0


def test_besov_index_validation():
    with pytest.raises(ValueError):
        BesovIndex(1, 0.5, 1)
    with pytest.raises(ValueError):
        BesovIndex(1, 2, 0)


def test_embedding_constant_stable():
    # Bdot^{s+s0}_{p,q0} embeds in Bdot^s_{p,q}; the spectrum is bounded below so s0 >= 0 works
    spec = EnsembleSpec(count=10, resolutions=(32, 64))
    worst = {}
    for N in spec.resolutions:
        worst[N] = max(besov_norm(f, BesovIndex(1, 2, 2)) / besov_norm(f, BesovIndex(1.5, 2, 1))
                       for f in (sample(spec, k, N) for k in range(spec.count)))
    assert worst[64] <= 1.5 * worst[32]
    assert max(worst.values()) < 1


# -- norm equivalence ----------------------------------------------------------------


def test_equiv_zero_and_single_mode_oracle():
    dom = DomainSpec(8, 12)
    idx = BesovIndex(2, 2, 1)
    assert besov_norm_equiv(SpectralField.zeros(dom), idx) == 0
    a = 2 * PI**2
    js = np.array(psi_range(dom, 2.0))
    expected = float(np.sum(np.sqrt(psi_values(a, js)) * a))
    assert besov_norm_equiv(SpectralField.mode(dom, 1, 1), idx) == pytest.approx(expected, rel=1e-13)


def test_equiv_refuses_far_regularity():
    with pytest.raises(ValueError):
        besov_norm_equiv(SpectralField.zeros(DomainSpec(4, 6)), BesovIndex(3.0, 2, 1))


def test_equiv_sum_uses_square_root_weights():
    dom = DomainSpec(16, 24)
    f = rand(dom, 7)
    idx = BesovIndex(2.5, 2, 1)
    lap = laplacian(f)
    direct = sum(2.0 ** (0.5 * j) * psi_sqrt_block(lap, j).l2_norm() for j in psi_range(dom, 2.5))
    assert besov_norm_equiv(f, idx) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("s", [1.5, 2.0, 2.5])
def test_equiv_ratio_resolution_independent(s):
    spec = EnsembleSpec(count=20, resolutions=(32, 48, 64))
    idx = BesovIndex(s, 2, 1)
    ratios = {N: [besov_norm_equiv(f, idx) / besov_norm(f, idx) for f in (sample(spec, k, N) for k in range(20))]
              for N in spec.resolutions}
    lo = min(min(r) for r in ratios.values())
    hi = max(max(r) for r in ratios.values())
    assert hi / lo < 50
    assert max(ratios[64]) <= 1.5 * max(ratios[32])
    assert min(ratios[64]) >= min(ratios[32]) / 1.5


# -- Chemin-Lerner norm ---------------------------------------------------------------


def test_chemin_lerner_cases():
    dom = DomainSpec(16, 24)
    f = rand(dom, 8)
    single = Trajectory(dom, [0.0], f.coeff[None])
    assert chemin_lerner_norm(single) == pytest.approx(besov_norm(f, BesovIndex(2, 2, 1)), rel=1e-14)
    const = Trajectory(dom, [0.0, 0.5, 1.0], np.stack([f.coeff] * 3))
    assert chemin_lerner_norm(const) == pytest.approx(besov_norm(f, BesovIndex(2, 2, 1)), rel=1e-14)
    vanishing = Trajectory(dom, [0.0, 1.0], np.stack([f.coeff, 0 * f.coeff]))
    assert chemin_lerner_norm(vanishing, 1.0) == pytest.approx(besov_norm(f, BesovIndex(1, 2, 1)), rel=1e-14)


def test_chemin_lerner_dominates_pointwise_norm():
    dom = DomainSpec(16, 24)
    f, g = rand(dom, 9), rand(dom, 10)
    traj = Trajectory(dom, [0.0, 1.0], np.stack([f.coeff, g.coeff]))
    idx = BesovIndex(2, 2, 1)
    assert chemin_lerner_norm(traj) >= max(besov_norm(f, idx), besov_norm(g, idx))


def test_chemin_lerner_rejects_empty():
    dom = DomainSpec(4, 6)
    with pytest.raises(ValueError):
        chemin_lerner_norm(Trajectory(dom, [], np.zeros((0, 4, 4))))
