import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rvmstab.errors import GeometryError
from rvmstab.geometry import (Containment, Domain, GeneratrixCurve, boundary_frame, contains,
                              contains_many, poincare_upper_bound, reflect_normal,
                              specular_reflect, winding_number)


def test_torus_frame_at_outer_equator(torus):
    # beta = 0 sits at the outer equator for the built-in torus
    r, z = torus.curve.evaluate(0.0)
    assert r == pytest.approx(2.5)
    assert z == pytest.approx(0.0, abs=1e-12)
    fr = boundary_frame(torus.curve, 0.0)
    np.testing.assert_allclose(fr.e_n, [1, 0, 0], atol=1e-9)
    np.testing.assert_allclose(fr.e_phi, [0, 1, 0])
    assert abs(fr.e_n @ fr.e_tg) < 1e-12


def test_frame_is_orthonormal_everywhere(torus, ball):
    for dom in (torus, ball):
        for beta in np.linspace(0.01, 0.99, 23):
            M = boundary_frame(dom.curve, beta).as_matrix()
            np.testing.assert_allclose(M @ M.T, np.eye(3), atol=1e-12)


def test_normal_points_outward(torus):
    for beta in np.linspace(0, 1, 17):
        r, z = (float(v) for v in torus.curve.evaluate(beta))
        n = boundary_frame(torus.curve, beta).e_n
        assert torus.levelset(r + 1e-4 * n[0], z + 1e-4 * n[2]) > 0
        assert torus.levelset(r - 1e-4 * n[0], z - 1e-4 * n[2]) < 0


def test_reflection_of_normal_and_tangent(torus):
    fr = boundary_frame(torus.curve, 0.3)
    np.testing.assert_allclose(specular_reflect(fr, fr.e_n), -fr.e_n, atol=1e-15)
    np.testing.assert_allclose(specular_reflect(fr, fr.e_tg), fr.e_tg, atol=1e-15)
    np.testing.assert_allclose(specular_reflect(fr, fr.e_phi), fr.e_phi, atol=1e-15)


def test_beta_out_of_range(torus):
    with pytest.raises(GeometryError):
        boundary_frame(torus.curve, 1.5)


@given(st.floats(0, 1), st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_reflection_is_isometric_involution(beta, v):
    dom = Domain.ellipse(2.0, 0.4, 0.9)
    fr = boundary_frame(dom.curve, beta)
    v = np.array(v)
    w = specular_reflect(fr, v)
    assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), rel=1e-13, abs=1e-13)
    np.testing.assert_allclose(specular_reflect(fr, w), v, atol=1e-12 * (1 + np.abs(v).max()))
    assert w @ fr.e_n == pytest.approx(-(v @ fr.e_n), abs=1e-12 * (1 + np.abs(v).max()))


def test_vectorised_reflection_matches_single(rng):
    n = rng.normal(size=(50, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    v = rng.normal(size=(50, 3))
    out = reflect_normal(v, n)
    for k in range(50):
        np.testing.assert_allclose(out[k], v[k] - 2 * (v[k] @ n[k]) * n[k], atol=1e-15)


def test_containment_classes(torus):
    assert contains(torus, (2.0, 0.0)) is Containment.INSIDE
    assert contains(torus, (2.5, 0.0)) is Containment.BOUNDARY
    assert contains(torus, (3.0, 0.0)) is Containment.OUTSIDE
    assert contains(torus, (1.0, 0.0)) is Containment.OUTSIDE
    with pytest.raises(GeometryError):
        contains(torus, (-1.0, 0.0))


def test_ball_containment_near_axis(ball):
    res = contains_many(ball, [(0.0, 0.0), (0.0, 1.0), (0.7, 0.8), (0.1, 0.5)])
    assert res == [Containment.INSIDE, Containment.BOUNDARY, Containment.OUTSIDE,
                   Containment.INSIDE]


def test_winding_number_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    wn = winding_number(np.array([[0.5, 0.5], [2.0, 0.5]]), sq)
    assert abs(wn[0]) == 1 and wn[1] == 0


def test_extents(torus, ball):
    assert (torus.b, torus.L1, torus.L2, torus.r_min) == pytest.approx((2.5, 1.0, 1.0, 1.5))
    assert (ball.b, ball.L1, ball.L2) == pytest.approx((1.0, 2.0, 1.0))
    assert ball.touches_axis and not torus.touches_axis


def test_curve_from_points_round_trip(tmp_path):
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    path = tmp_path / "ellipse.csv"
    with open(path, "w") as fh:
        fh.write("beta,r,z\n")
        for tt in t:
            fh.write("%r,%r,%r\n" % (float(tt / (2 * np.pi)), float(3.0 + 0.5 * np.cos(tt)),
                                       float(0.8 * np.sin(tt))))
    dom = Domain.from_csv(path)
    ref = Domain.ellipse(3.0, 0.5, 0.8)
    assert dom.b == pytest.approx(ref.b, abs=1e-6)
    pts = np.array([[3.0, 0.0], [3.4, 0.3], [2.6, -0.7], [3.6, 0.0]])
    for p in pts:
        assert contains(dom, p) == contains(ref, p)


def test_curve_rejects_axis_crossing():
    with pytest.raises(GeometryError):
        GeneratrixCurve.from_points([1.0, -0.5, 1.0, 2.0], [0.0, 0.5, 1.0, 0.5])


def test_printed_poincare_bound_fails_on_unit_ball():
    # the discrete first eigenvalue of the unit ball is pi^2, so c_P ~ 0.101
    bound = poincare_upper_bound(Domain.ball(1.0), "printed")
    assert bound.value < 1.0 / math.pi ** 2


def test_corrected_poincare_bound_branches():
    thin = poincare_upper_bound(Domain.rectangle(10.0, 10.5, 0.0, 5.0))
    assert thin.active == "planar"
    flat = poincare_upper_bound(Domain.ball(1.0))
    assert flat.active == "axial"
    assert flat.value == pytest.approx(4.0 / math.pi ** 2)
