import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rvmstab import kernels
from rvmstab.elliptic import MeridianGrid
from rvmstab.errors import GeometryError, ZenoError
from rvmstab.fields import EquilibriumFields
from rvmstab.geometry import Domain
from rvmstab.trajectories import (ParticleState, collision_census, flow_jacobian_determinant,
                                  flow_map, integrate, invariants, sample_phase_space,
                                  to_cartesian, to_cylindrical)


@pytest.fixture(scope="module")
def vacuum_ball():
    return EquilibriumFields.zero(MeridianGrid(Domain.ball(1.0), 8))


@pytest.fixture(scope="module")
def vacuum_torus():
    return EquilibriumFields.zero(MeridianGrid(Domain.torus(2.0, 0.5), 8))


def ball_bounces(x, v, T):
    """Exact wall-hit times of a free particle in the unit ball."""
    x = np.array(x, dtype=float)
    u = np.array(v, dtype=float) / np.linalg.norm(v)
    speed = np.linalg.norm(v) / math.sqrt(1 + np.dot(v, v))
    t, out = 0.0, []
    while True:
        b = x @ u
        dist = -b + math.sqrt(b * b - x @ x + 1.0)
        if t + dist / speed > T:
            return out, x + u * (T - t) * speed
        t += dist / speed
        x = x + u * dist
        x /= np.linalg.norm(x)
        u = u - 2 * (u @ x) * x
        out.append(t)


def test_cylindrical_round_trip(rng):
    cyl = np.column_stack([rng.uniform(0.1, 3, 20), rng.normal(size=(20, 4)),
                           rng.uniform(-3, 3, 20)])
    np.testing.assert_allclose(to_cylindrical(to_cartesian(cyl)), cyl, atol=1e-13)


def test_ball_collision_times_match_ray_tracing(vacuum_ball):
    x0, v0 = (0.3, 0.0, 0.2), (0.7, 1.1, -0.4)
    T = 20.0
    exact, end = ball_bounces(x0, v0, T)
    cyl0 = to_cylindrical(np.array([*x0, *v0]))
    st_ = ParticleState(cyl0[0], cyl0[1], cyl0[2], cyl0[3], cyl0[4])
    res = integrate(st_, vacuum_ball, T, 0.01)
    got = [c.time for c in res.collisions]
    assert len(got) == len(exact) > 5
    np.testing.assert_allclose(got, exact, atol=1e-8)
    assert res.states[-1, 0] == pytest.approx(math.hypot(end[0], end[1]), abs=1e-8)
    assert res.states[-1, 1] == pytest.approx(end[2], abs=1e-8)
    # vacuum: <v> and r v_phi are conserved to rounding
    assert res.drift_e < 1e-12 and res.drift_p < 1e-12


def test_reflection_is_specular_at_each_event(vacuum_ball):
    res = integrate(ParticleState(0.2, 0.1, 0.5, 0.9, -0.3), vacuum_ball, 6.0, 0.01)
    for c in res.collisions:
        n = np.array([c.position[0], 0.0, c.position[1]])
        n /= np.linalg.norm(n)
        assert np.linalg.norm(c.post) == pytest.approx(np.linalg.norm(c.pre), rel=1e-13)
        assert c.post @ n == pytest.approx(-(c.pre @ n), abs=1e-12)
        assert c.pre @ n > 0


def test_time_reversal(small_equilibrium):
    f = small_equilibrium.fields
    s0 = ParticleState(2.1, 0.1, 0.6, -0.8, 0.9, species=-1)
    fwd = integrate(s0, f, 5.0, 0.005)
    end = fwd.states[-1]
    back = integrate(ParticleState(*end[:5], species=-1), f, 5.0, 0.005, backward=True)
    np.testing.assert_allclose(back.states[-1, :5], fwd.states[0, :5], atol=1e-8)
    assert len(back.collisions) == len(fwd.collisions)


def test_invariants_in_fields(small_equilibrium):
    f = small_equilibrium.fields
    drifts = []
    for dt in (0.02, 0.01):
        res = integrate(ParticleState(2.0, 0.0, 0.4, 1.0, -0.7), f, 20.0, dt)
        drifts.append(max(res.drift_e, res.drift_p))
    assert drifts[1] < 1e-8
    assert drifts[0] / drifts[1] > 8


def test_zeno_and_outside_start(vacuum_ball):
    with pytest.raises(ZenoError):
        integrate(ParticleState(0.0, 0.0, 0.0, 0.0, 3.0), vacuum_ball, 50.0, 0.01, max_collisions=3)
    with pytest.raises(GeometryError):
        integrate(ParticleState(2.0, 0.0, 0.0, 0.0, 1.0), vacuum_ball, 1.0, 0.01)


def test_grazing_start_is_flagged(vacuum_torus):
    # on the outer equator moving exactly along the azimuth
    res = integrate(ParticleState(2.5, 0.0, 0.0, 1.0, 0.0), vacuum_torus, 1.0, 0.01)
    assert res.exit_status == "grazing-detected"
    assert res.collisions == []


def test_backends_agree(small_equilibrium, rng):
    if "compiled" not in kernels.available_backends():
        pytest.skip("compiled kernel not built")
    f = small_equilibrium.fields
    cyl = sample_phase_space(f.domain, 64, rng, 2.5)
    y = to_cartesian(cyl)
    signs = np.where(np.arange(64) % 2, 1.0, -1.0)
    out = [kernels.trace(y, signs, f, 0.01, 800, 50, backend=b) for b in ("compiled", "python")]
    np.testing.assert_array_equal(out[0][1], out[1][1])
    np.testing.assert_array_equal(out[0][2], out[1][2])
    np.testing.assert_allclose(out[0][0], out[1][0], atol=1e-10)


def test_census_ball_vacuum(vacuum_ball, rng):
    cyl = sample_phase_space(vacuum_ball.domain, 300, rng, 2.0)
    census = collision_census(cyl, vacuum_ball, 4.0, 0.01)
    assert census.n_failed == 0
    assert sum(census.histogram.values()) + census.n_grazing == 300
    assert census.drift_e_max < 1e-12


def test_sampler_density_uniform_in_volume(rng):
    dom = Domain.torus(2.0, 0.5)
    cyl = sample_phase_space(dom, 20000, rng, 1.0)
    # fraction with r > 2 is the outer half volume of the torus
    frac = np.mean(cyl[:, 0] > 2.0)
    exact = 0.5 + 2 * 0.5 / (3 * math.pi * 2.0)
    assert frac == pytest.approx(exact, abs=4 * math.sqrt(exact * (1 - exact) / 20000))
    assert np.all(np.linalg.norm(cyl[:, 2:5], axis=1) <= 1.0)


def test_flow_jacobian_is_one(small_equilibrium):
    det = flow_jacobian_determinant(ParticleState(2.0, 0.05, 0.1, 0.3, -0.1),
                                    small_equilibrium.fields, 0.5, 0.005)
    assert det == pytest.approx(1.0, abs=1e-6)


@given(st.floats(1.7, 2.3), st.floats(-0.2, 0.2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2))
def test_vacuum_invariants_property(r, z, vr, vp, vz):
    f = EquilibriumFields.zero(MeridianGrid(Domain.torus(2.0, 0.5), 8))
    cyl = np.array([[r, z, vr, vp, vz, 0.0]])
    end, status = flow_map(cyl, f, 3.0, 0.01)
    if status[0] != kernels.COMPLETED:
        return
    e0, p0 = invariants(f, cyl, 1)
    e1, p1 = invariants(f, end, 1)
    assert e1[0] == pytest.approx(e0[0], rel=1e-12)
    assert p1[0] == pytest.approx(p0[0], abs=1e-11 * (1 + abs(p0[0])))
