import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import kn

from rvmstab.ansatz import (EquilibriumAnsatz, ExponentialProfile, PowerLawProfile, make_ansatz,
                            scale_ansatz, zero_ansatz)
from rvmstab.equilibrium import decay_integral, densities
from rvmstab.errors import ConfigError, ParameterError
from rvmstab.quadrature import VelocityQuadrature, composite_gauss_legendre, tail_speed


def test_gauss_legendre_exact_for_polynomials():
    x, w = composite_gauss_legendre(-1.0, 2.0, 5, panels=3)
    for k in range(10):
        assert np.sum(w * x ** k) == pytest.approx((2.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1),
                                                   rel=1e-13)


@pytest.mark.parametrize("rule", [VelocityQuadrature.cartesian(8, 3.0),
                                  VelocityQuadrature.spherical(6, 6, 4, 3.0)])
def test_rules_are_symmetric_and_fill_volume(rule):
    assert rule.symmetry_defect() == 0.0
    assert rule.volume() == pytest.approx(rule.exact_volume(), rel=1e-12)
    assert abs(np.sum(rule.weights * rule.nodes[:, 1])) < 1e-12


def test_collapse_preserves_integrals():
    q = VelocityQuadrature.spherical(6, 6, 4, 3.0)
    s, vp, w = q.collapse()
    f = lambda sp, v: np.exp(-sp) * (1 + v * v)
    full = np.sum(q.weights * f(q.speed, q.nodes[:, 1]))
    assert np.sum(w * f(s, vp)) == pytest.approx(full, rel=1e-11)
    assert len(w) < q.size


def test_juttner_normalisation():
    # int exp(-<v>/T) dv = 4 pi T K_2(1/T)
    T = 0.5
    a = make_ansatz("exponential", amplitude_plus=1.0, amplitude_minus=0.0, temperature=T)
    q = VelocityQuadrature.spherical(24, 4, 2, 40.0, panels=10)
    res = densities(a, [1.0], 0.0, 0.0, q)
    assert res.rho[0] == pytest.approx(4 * math.pi * T * kn(2, 1 / T), rel=1e-10)
    assert abs(res.j_phi[0]) < 1e-14


def test_constant_potential_shifts_density():
    T = 0.5
    a = make_ansatz("exponential", amplitude_plus=1.0, amplitude_minus=0.0, temperature=T)
    q = VelocityQuadrature.spherical(24, 4, 2, 40.0, panels=4)
    base = densities(a, [1.0], 0.0, 0.0, q).rho[0]
    shifted = densities(a, [1.0], 0.3, 0.0, q).rho[0]
    assert shifted / base == pytest.approx(math.exp(-0.3 / T), rel=1e-12)


def test_decay_integral_against_product_rule():
    V = 200.0
    q = VelocityQuadrature.spherical(40, 2, 2, V, panels=20)
    g = q.gamma_factor
    for gamma, zeta in ((5.0, 0.0), (4.5, -1.0), (6.0, 1.0)):
        # beyond V the integrand is 4 pi v^(2 + zeta - gamma) to relative O(V^-2)
        tail = 4 * math.pi * V ** (3 + zeta - gamma) / (gamma - 3 - zeta)
        ref = np.sum(q.weights * g ** zeta / (1 + g ** gamma)) + tail
        assert decay_integral(gamma, zeta) == pytest.approx(ref, rel=2e-6)


def test_tail_speed_meets_tolerance():
    V = tail_speed(2.0, 1e-8)
    x = 2.0 * V
    assert math.exp(-x) * (x * x + 2 * x + 2) / 2 == pytest.approx(1e-8, rel=1e-8)
    assert tail_speed(0.0, 1e-8) == math.inf
    assert tail_speed(1.0, 1e-6, power=9.0) == pytest.approx(10.0)


@given(st.floats(1.0, 30.0), st.floats(-20.0, 20.0))
def test_exponential_profile_derivatives(e, p):
    prof = ExponentialProfile(0.7, 0.8, 0.2, 0.4)
    h = 1e-6
    de = (prof.mu(e + h, p) - prof.mu(e - h, p)) / (2 * h)
    dp = (prof.mu(e, p + h) - prof.mu(e, p - h)) / (2 * h)
    scale = prof.mu(e, p) + 1e-300
    assert prof.mu_e(e, p) == pytest.approx(de, rel=1e-6, abs=1e-9 * scale)
    assert prof.mu_p(e, p) == pytest.approx(dp, rel=1e-6, abs=1e-9 * scale)


def test_power_law_profile_derivatives():
    prof = PowerLawProfile(1.0, 3.0, -0.5, 0.7)
    e, p, h = 2.0, 1.3, 1e-6
    assert prof.mu_e(e, p) == pytest.approx((prof.mu(e + h, p) - prof.mu(e - h, p)) / (2 * h),
                                            rel=1e-7)
    assert prof.mu_p(e, p) == pytest.approx((prof.mu(e, p + h) - prof.mu(e, p - h)) / (2 * h),
                                            rel=1e-7)


def test_power_law_with_negative_contrast_satisfies_stable_premise():
    a = make_ansatz("polynomial-cutoff", amplitude=0.1, power=3.0, contrast=-0.5, width=1.0)
    assert a.p_mu_p_max(2.0) <= 0.0


def test_decay_constant_bounds_samples():
    a = make_ansatz("exponential", amplitude=0.3, temperature=0.5, omega=0.2)
    C = a.decay_constant(2.0)
    E, P = a.sample_grid(2.0)
    lhs = np.abs(a.mu_e(1, E, P)) + np.abs(a.mu_p(1, E, P))
    assert np.all(lhs <= C / (1 + E ** a.gamma) * (1 + 1e-12))
    assert np.max(lhs * (1 + E ** a.gamma)) == pytest.approx(C)


def test_scaled_profile_identities():
    a = make_ansatz("exponential", amplitude=0.3, temperature=0.5, omega=0.2, skew=0.3)
    s = scale_ansatz(a, 4.0, 0.6)
    e, p = 2.0, 0.7
    assert s.mu(1, e, p) == pytest.approx(4.0 ** -0.6 * a.mu(1, e, 4 * p))
    assert s.mu_p(1, e, p) == pytest.approx(4.0 ** 0.4 * a.mu_p(1, e, 4 * p))
    assert s.scaled.K == 4.0
    with pytest.raises(ParameterError):
        scale_ansatz(a, 0.5, 0.6)


def test_ansatz_validation():
    with pytest.raises(ParameterError):
        EquilibriumAnsatz(ExponentialProfile(1.0), ExponentialProfile(1.0), gamma=3.0)
    with pytest.raises(ConfigError):
        make_ansatz("exponential", amplitude=1.0, bogus=2.0)
    with pytest.raises(ConfigError):
        make_ansatz("nonsense", amplitude=1.0)
    with pytest.raises(ParameterError):
        ExponentialProfile(1.0, skew=2.0)


def test_shared_profile_means_symmetric_species():
    assert make_ansatz("exponential", amplitude=0.2).symmetric_species
    assert not make_ansatz("exponential", amplitude_plus=0.2, amplitude_minus=0.1).symmetric_species
    assert zero_ansatz().is_zero()
