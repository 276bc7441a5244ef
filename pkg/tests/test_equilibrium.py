import numpy as np
import pytest

from rvmstab.ansatz import make_ansatz, zero_ansatz
from rvmstab.elliptic import MeridianGrid
from rvmstab.equilibrium import (densities, estimate_C0, fixed_point_equilibrium,
                                 potential_sup_check, shifted_decay_ratio, smallness_gate)
from rvmstab.errors import DivergenceError, MaxIterationsError, ParameterError
from rvmstab.fields import EquilibriumFields
from rvmstab.geometry import Domain
from rvmstab.quadrature import VelocityQuadrature


def test_symmetric_species_give_zero_fields(torus_grid):
    a = make_ansatz("exponential", amplitude=0.3, temperature=0.5)
    fp = fixed_point_equilibrium(a, torus_grid)
    assert fp.iterations == 1
    assert fp.fields.sup_norms() == (0.0, 0.0)


def test_zero_ansatz(torus_grid):
    fp = fixed_point_equilibrium(zero_ansatz(), torus_grid)
    assert fp.fields.is_zero


def test_fixed_point_solves_the_coupled_system(small_equilibrium, skewed_ansatz):
    fp = small_equilibrium
    grid = fp.fields.grid
    assert fp.contraction_estimate < 1
    assert fp.differences[-1] <= 1e-10
    # residual with an independent Cartesian velocity rule
    q = VelocityQuadrature.cartesian(32, 8.0, panels=2)
    phi, A = fp.fields.phi0, fp.fields.Aphi0
    dens = densities(skewed_ansatz, grid.r_interior, phi, A, q)
    res_phi = grid.operator("poisson") @ phi - dens.rho
    res_A = grid.operator("m1") @ A - dens.j_phi
    assert np.abs(res_phi).max() < 1e-6 * np.abs(dens.rho).max()
    assert np.abs(res_A).max() < 1e-6 * np.abs(dens.j_phi).max()
    phi_sup, A_sup = fp.fields.sup_norms()
    assert 0 < phi_sup < 0.5 and 0 < A_sup < 0.5


def test_contraction_ratio_tracks_coupling(torus_grid):
    weak = make_ansatz("exponential", amplitude_plus=0.2, amplitude_minus=0.1, temperature=0.5)
    strong = make_ansatz("exponential", amplitude_plus=0.8, amplitude_minus=0.4, temperature=0.5)
    r_weak = fixed_point_equilibrium(weak, torus_grid).contraction_estimate
    r_strong = fixed_point_equilibrium(strong, torus_grid).contraction_estimate
    assert 0 < r_weak < r_strong < 1


def test_relaxation_and_iteration_limit(torus_grid, skewed_ansatz):
    with pytest.raises(ParameterError):
        fixed_point_equilibrium(skewed_ansatz, torus_grid, relaxation=0.0)
    with pytest.raises(MaxIterationsError):
        fixed_point_equilibrium(skewed_ansatz, torus_grid, max_iter=2)


def test_divergence_detected():
    grid = MeridianGrid(Domain.torus(2.0, 0.5), 16)
    for amp in (4.0, 400.0):
        a = make_ansatz("exponential", amplitude_plus=amp, amplitude_minus=amp / 2,
                        temperature=0.5, omega=0.3, skew_plus=0.5, skew_minus=-0.2)
        with pytest.raises(DivergenceError):
            fixed_point_equilibrium(a, grid, max_iter=30)


def test_gate_and_C0(torus_grid):
    c0 = estimate_C0(torus_grid, 5.0)
    assert c0["C0"] > 0
    g = smallness_gate(0.01, 1.0, c0["C0"], 5.0, 2.5)
    assert g["limit"] == pytest.approx(min(1 / (2 * c0["C0"]), 5.0 / (16 * np.pi * 2.5)))
    assert g["passed"] == (0.01 <= g["limit"])
    assert shifted_decay_ratio(5.0) >= 1.0


def test_require_gate(torus_grid):
    a = make_ansatz("exponential", amplitude_plus=2.0, amplitude_minus=1.0, temperature=0.5)
    with pytest.raises(ParameterError):
        fixed_point_equilibrium(a, torus_grid, require_gate=True)


def test_sup_check(small_equilibrium):
    chk = potential_sup_check(small_equilibrium.fields, 1.0, 1.0, 0.5, 2.5)
    assert chk.ok and chk.slack > 1
    chk = potential_sup_check(small_equilibrium.fields, 1e-9, 1.0, 0.5, 2.5)
    assert not chk.ok


def test_fields_round_trip(tmp_path, small_equilibrium):
    f = small_equilibrium.fields
    f.save(tmp_path / "fields.csv")
    g = EquilibriumFields.load(tmp_path / "fields.csv")
    np.testing.assert_array_equal(g.phi0, f.phi0)
    np.testing.assert_array_equal(g.Aphi0, f.Aphi0)
    pts = np.array([[2.1, 0.1], [1.8, -0.3]])
    np.testing.assert_allclose(g.phi(pts[:, 0], pts[:, 1]), f.phi(pts[:, 0], pts[:, 1]),
                               rtol=1e-14)


def test_spline_interpolates_grid_values(small_equilibrium):
    f = small_equilibrium.fields
    g = f.grid
    np.testing.assert_allclose(f.phi(g.r_interior, g.z_interior), f.phi0, atol=1e-13)
    np.testing.assert_allclose(f.A(g.r_interior, g.z_interior), f.Aphi0, atol=1e-13)
