"""Meridian-plane geometry of an axisymmetric domain.

A domain of revolution is described by its generatrix, a closed curve in the
(r, z) half plane. Curves either stay away from the symmetry axis (torus-like
domains) or start and end on it (ball-like domains). Every vector returned
here uses cylindrical components in the order (r, phi, z).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator, RectBivariateSpline
from scipy.spatial import cKDTree

from .errors import GeometryError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class Containment(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class BoundaryFrame:
    """Orthonormal frame at a boundary point, components (r, phi, z)."""

    e_n: np.ndarray
    e_tg: np.ndarray
    e_phi: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.vstack([self.e_n, self.e_tg, self.e_phi])


class GeneratrixCurve:
    """Closed C1 meridian curve parametrised by normalised arclength.

    ``evaluate(beta, nu)`` returns the ``nu``-th beta-derivative of (r, z).
    Build instances through :meth:`from_points` or :meth:`from_function`.
    """

    def __init__(self, evaluator: Callable, touches_axis: bool, length: float,
                 n_samples: int = 2000):
        self._evaluator = evaluator
        self.touches_axis = bool(touches_axis)
        self.closed = True
        self.length = float(length)
        beta = np.linspace(0.0, 1.0, n_samples + 1)
        r, z = self.evaluate(beta)
        if np.any(r < -1e-12):
            raise GeometryError("generatrix has negative radial coordinate")
        self.samples = np.column_stack([beta, np.maximum(r, 0.0), z])
        if self.signed_area() <= 0:
            raise GeometryError("generatrix must be counterclockwise")

    # construction -----------------------------------------------------
    @classmethod
    def from_function(cls, fn: Callable, touches_axis: bool, n_samples=2000):
        """Wrap an analytic arclength parametrisation ``fn(beta, nu)``."""
        beta = np.linspace(0.0, 1.0, 4097)
        dr, dz = fn(beta, 1)
        length = float(np.mean(np.hypot(dr, dz)[:-1]))
        return cls(fn, touches_axis, length, n_samples)

    @classmethod
    def from_points(cls, r, z, touches_axis: bool | None = None,
                    axis_slope_tol: float = 0.1, n_fit: int | None = None):
        """Fit a closed cubic spline through sampled points.

        Closed curves are given without repeating the first point. Curves
        touching the axis run from one pole to the other with r = 0 at both
        ends; they are mirrored across the axis before fitting so that the
        tangent at the poles is perpendicular to the axis by construction.
        """
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if r.shape != z.shape or r.ndim != 1 or r.size < 4:
            raise GeometryError("need at least four (r, z) samples")
        if np.any(r < -1e-12):
            raise GeometryError("generatrix has negative radial coordinate")
        if touches_axis is None:
            touches_axis = bool(abs(r[0]) < 1e-12 and abs(r[-1]) < 1e-12)
        if touches_axis:
            if abs(r[0]) > 1e-12 or abs(r[-1]) > 1e-12:
                raise GeometryError("axis-touching curve must start and end at r = 0")
            # ensure pole-to-pole counterclockwise: from the lower pole outward
            if z[0] > z[-1]:
                r, z = r[::-1], z[::-1]
            for rr, zz in ((r[:3], z[:3]), (r[::-1][:3], z[::-1][:3])):
                if np.any(np.diff(np.abs(rr)) <= 0):
                    raise GeometryError("samples near the axis must move away from it")
                # derivative dz/dr at the pole from a quadratic through three samples
                slope = np.polyfit(rr, zz, 2)[1]
                if abs(slope) > axis_slope_tol:
                    raise GeometryError(
                        "curve must meet the axis perpendicularly (dz/dr = %.3g)" % slope)
            loop_r = np.concatenate([r[:-1], -r[::-1][:-1]])
            loop_z = np.concatenate([z[:-1], z[::-1][:-1]])
        else:
            if np.min(r) <= 0:
                raise GeometryError("closed curve away from the axis needs r > 0")
            loop_r, loop_z = r, z
            area = 0.5 * np.sum(loop_r * np.roll(loop_z, -1) - np.roll(loop_r, -1) * loop_z)
            if area < 0:
                loop_r, loop_z = loop_r[::-1], loop_z[::-1]
        loop = _ArclengthLoop(loop_r, loop_z, n_fit)
        if touches_axis:
            def fn(beta, nu=0):
                u = 0.5 * np.asarray(beta, dtype=float)
                rr, zz = loop(u, nu)
                return rr * 0.5 ** nu, zz * 0.5 ** nu
            length = 0.5 * loop.length
        else:
            fn = loop
            length = loop.length
        return cls(fn, touches_axis, length)

    @classmethod
    def from_csv(cls, path: str | Path):
        """Read a curve from a CSV file with header ``beta,r,z``."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"beta", "r", "z"} - set(reader.fieldnames or ())
            if missing:
                raise GeometryError("curve CSV lacks columns: %s" % ", ".join(sorted(missing)))
            rows = [(float(row["beta"]), float(row["r"]), float(row["z"])) for row in reader]
        rows.sort()
        data = np.array(rows)
        r, z = data[:, 1], data[:, 2]
        touches = abs(r[0]) < 1e-12 and abs(r[-1]) < 1e-12
        if not touches and np.hypot(r[0] - r[-1], z[0] - z[-1]) < 1e-12:
            r, z = r[:-1], z[:-1]
        return cls.from_points(r, z, touches_axis=touches)

    # queries ----------------------------------------------------------
    def evaluate(self, beta, nu: int = 0):
        beta = np.asarray(beta, dtype=float)
        return self._evaluator(beta, nu)

    def tangent(self, beta):
        return self.evaluate(beta, 1)

    def signed_area(self) -> float:
        """Area enclosed by the curve (closed along the axis when needed)."""
        r, z = self.samples[:, 1], self.samples[:, 2]
        return 0.5 * float(np.sum(r[:-1] * z[1:] - r[1:] * z[:-1])
                           + r[-1] * z[0] - r[0] * z[-1])

    def polygon(self) -> np.ndarray:
        """Closed polygon (no repeated vertex) used for winding numbers.

        Axis-touching curves are mirrored so that the axis segment lies in
        the interior of the polygon rather than on its edge.
        """
        pts = self.samples[:-1, 1:]
        if self.touches_axis:
            mirror = self.samples[::-1][:-1, 1:].copy()
            mirror[:, 0] *= -1.0
            pts = np.vstack([self.samples[:, 1:], mirror[1:]])
            pts = pts[:-1] if np.allclose(pts[0], pts[-1]) else pts
        return pts

    def locate(self, r, z, newton_steps: int = 4) -> np.ndarray:
        """Parameter of the closest curve point to each (r, z)."""
        q = np.column_stack([np.atleast_1d(r), np.atleast_1d(z)]).astype(float)
        pts = self.samples[:, 1:]
        d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        beta = self.samples[np.argmin(d2, axis=1), 0]
        for _ in range(newton_steps):
            x = np.column_stack(self.evaluate(beta))
            dx = np.column_stack(self.evaluate(beta, 1))
            ddx = np.column_stack(self.evaluate(beta, 2))
            g = np.sum((x - q) * dx, axis=1)
            hess = np.sum(dx * dx, axis=1) + np.sum((x - q) * ddx, axis=1)
            step = np.where(hess > 0, g / np.where(hess > 0, hess, 1.0), 0.0)
            beta = np.clip(beta - step, 0.0, 1.0) if self.touches_axis else np.mod(beta - step, 1.0)
        return beta

    def boundary_segments(self) -> np.ndarray:
        """Segments (n, 2, 2) of the physical boundary only."""
        pts = self.samples[:, 1:]
        return np.stack([pts[:-1], pts[1:]], axis=1)


class _ArclengthLoop:
    """Periodic cubic spline through a closed point set, reparametrised so
    that the parameter in [0, 1) is proportional to arclength."""

    def __init__(self, r, z, n_fit=None):
        pts = np.column_stack([r, z])
        closed = np.vstack([pts, pts[:1]])
        chord = np.hypot(*np.diff(closed, axis=0).T)
        if np.any(chord < 1e-14):
            raise GeometryError("repeated consecutive curve samples")
        t = np.concatenate([[0.0], np.cumsum(chord)])
        first = CubicSpline(t, closed, bc_type="periodic")
        # cumulative arclength on each knot interval by Gauss-Legendre
        a, b = t[:-1], t[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        speed = np.hypot(*first(nodes, 1).transpose(2, 0, 1))
        seg = half * (speed @ _GL_WEIGHTS)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(s[-1])
        n_fit = n_fit or max(8 * len(r), 2048)
        # refine the s(t) table before inverting it
        tt = np.linspace(0.0, t[-1], 16 * n_fit + 1)
        sp = np.interp(tt, t, s)
        fine_speed = np.hypot(*first(tt, 1).T)
        dt = np.diff(tt)
        sp = np.concatenate([[0.0], np.cumsum(0.5 * (fine_speed[1:] + fine_speed[:-1]) * dt)])
        sp *= self.length / sp[-1]
        inverse = PchipInterpolator(sp / self.length, tt)
        u = np.linspace(0.0, 1.0, n_fit + 1)
        resampled = first(inverse(u))
        resampled[-1] = resampled[0]
        self._spline = CubicSpline(u, resampled, bc_type="periodic")

    def __call__(self, u, nu=0):
        u = np.mod(np.asarray(u, dtype=float), 1.0)
        val = self._spline(u, nu)
        return val[..., 0], val[..., 1]


def boundary_frame(curve: GeneratrixCurve, beta: float, tol: float = 1e-12) -> BoundaryFrame:
    """Outward normal, meridian tangent and azimuthal unit vector at beta."""
    if not 0.0 <= beta <= 1.0:
        raise GeometryError("beta must lie in [0, 1]")
    dr, dz = (float(v) for v in curve.tangent(beta))
    norm = math.hypot(dr, dz)
    if norm < tol:
        raise GeometryError("degenerate tangent at beta=%g" % beta)
    e_n = np.array([dz / norm, 0.0, -dr / norm])
    e_tg = np.array([-dr / norm, 0.0, -dz / norm])
    return BoundaryFrame(e_n, e_tg, np.array([0.0, 1.0, 0.0]))


def specular_reflect(frame: BoundaryFrame, v) -> np.ndarray:
    """Flip the normal momentum component, keep the tangential ones."""
    v = np.asarray(v, dtype=float)
    return v - 2.0 * (v @ frame.e_n)[..., None] * frame.e_n if v.ndim > 1 \
        else v - 2.0 * float(v @ frame.e_n) * frame.e_n


def reflect_normal(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Vectorised Householder reflection of rows of ``v`` across normals ``n``."""
    return v - 2.0 * np.sum(v * n, axis=-1, keepdims=True) * n


# ---------------------------------------------------------------------------
# domain

@dataclass(frozen=True)
class LevelSetSpec:
    """Compact description of the level set handed to compiled kernels.

    kind 0: scaled ellipse distance with params (R, zc, ar, az).
    kind 1: cubic spline table with knots ``tx``, ``ty`` and coefficients.
    kind 2: rectangle, params (r0, r1, z0, z1).
    """

    kind: int
    params: np.ndarray
    tx: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ty: np.ndarray = field(default_factory=lambda: np.zeros(0))
    coef: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class PoincareBound:
    value: float
    planar_branch: float
    axial_branch: float
    active: str
    variant: str


class Domain:
    """Axisymmetric domain: generatrix plus a smooth level-set function.

    The level set is negative inside, zero on the boundary and its gradient
    points outward. It drives grid masks and trajectory event detection.
    """

    def __init__(self, curve: GeneratrixCurve | None, name: str, levelset_spec: LevelSetSpec,
                 extents: tuple[float, float, float, float] | None = None,
                 touches_axis: bool | None = None, params: dict | None = None,
                 sdf_spline: RectBivariateSpline | None = None):
        self.curve = curve
        self.name = name
        self.params = dict(params or {})
        self.levelset_spec = levelset_spec
        if curve is not None:
            r, z = curve.samples[:, 1], curve.samples[:, 2]
            self.r_min, self.b = float(r.min()), float(r.max())
            self.z_min, self.z_max = float(z.min()), float(z.max())
            self.touches_axis = curve.touches_axis
        else:
            self.r_min, self.b, self.z_min, self.z_max = extents
            self.touches_axis = bool(touches_axis) if touches_axis is not None else self.r_min <= 0
        if self.touches_axis:
            self.r_min = 0.0
        self.L1 = self.z_max - self.z_min
        self.L2 = self.b - self.r_min
        if self.b <= 0 or self.L1 <= 0 or self.L2 <= 0:
            raise GeometryError("domain has degenerate extents")
        self._sdf = sdf_spline

    # level set --------------------------------------------------------
    def levelset(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        spec = self.levelset_spec
        if spec.kind == 0:
            R, zc, ar, az = spec.params
            q = np.sqrt(((r - R) / ar) ** 2 + ((z - zc) / az) ** 2)
            return (q - 1.0) * min(ar, az)
        if spec.kind == 2:
            r0, r1, z0, z1 = spec.params
            return np.maximum(np.maximum(r0 - r, r - r1), np.maximum(z0 - z, z - z1))
        return self._sdf.ev(r, z)

    def levelset_gradient(self, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        spec = self.levelset_spec
        if spec.kind == 0:
            R, zc, ar, az = spec.params
            x, y = (r - R) / ar, (z - zc) / az
            q = np.maximum(np.sqrt(x * x + y * y), 1e-300)
            s = min(ar, az)
            return s * x / (ar * q), s * y / (az * q)
        if spec.kind == 2:
            r0, r1, z0, z1 = spec.params
            cand = np.stack([r0 - r, r - r1, z0 - z, z - z1])
            k = np.argmax(cand, axis=0)
            gr = np.select([k == 0, k == 1], [-1.0, 1.0], 0.0)
            gz = np.select([k == 2, k == 3], [-1.0, 1.0], 0.0)
            return gr, gz
        return self._sdf.ev(r, z, dx=1), self._sdf.ev(r, z, dy=1)

    @property
    def diameter(self) -> float:
        return math.hypot(self.L1, self.L2)

    def bounding_box(self):
        return self.r_min, self.b, self.z_min, self.z_max

    # named shapes -----------------------------------------------------
    @classmethod
    def torus(cls, R: float, a: float) -> "Domain":
        """Circular cross-section of radius ``a`` centred at (R, 0)."""
        if not 0 < a < R:
            raise GeometryError("torus needs 0 < a < R")

        def fn(beta, nu=0):
            w = 2.0 * np.pi
            ang = w * beta
            if nu == 0:
                return R + a * np.cos(ang), a * np.sin(ang)
            k = w ** nu
            cs = [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin]
            sn = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)]
            return a * k * cs[nu % 4](ang), a * k * sn[nu % 4](ang)

        curve = GeneratrixCurve.from_function(fn, touches_axis=False)
        return cls(curve, "torus", LevelSetSpec(0, np.array([R, 0.0, a, a])),
                   params={"R": R, "a": a})

    @classmethod
    def ball(cls, a: float) -> "Domain":
        if a <= 0:
            raise GeometryError("ball radius must be positive")

        def fn(beta, nu=0):
            ang = np.pi * beta
            k = np.pi ** nu
            sn = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)]
            cs = [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin]
            return a * k * sn[nu % 4](ang), -a * k * cs[nu % 4](ang)

        curve = GeneratrixCurve.from_function(fn, touches_axis=True)
        return cls(curve, "ball", LevelSetSpec(0, np.array([0.0, 0.0, a, a])),
                   params={"a": a})

    @classmethod
    def ellipse(cls, R: float, ar: float, az: float) -> "Domain":
        """Elliptic cross-section with half-axes (ar, az) centred at (R, 0).

        ``R == 0`` gives a spheroid touching the axis.
        """
        if ar <= 0 or az <= 0 or R < 0:
            raise GeometryError("ellipse needs positive half-axes and R >= 0")
        if 0 < R <= ar:
            raise GeometryError("ellipse must either clear the axis or be centred on it")
        n = 4000
        if R == 0:
            t = np.linspace(0.0, np.pi, n + 1)
            curve = GeneratrixCurve.from_points(ar * np.sin(t), -az * np.cos(t), touches_axis=True)
        else:
            t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            curve = GeneratrixCurve.from_points(R + ar * np.cos(t), az * np.sin(t))
        return cls(curve, "ellipse", LevelSetSpec(0, np.array([R, 0.0, ar, az])),
                   params={"R": R, "ar": ar, "az": az})

    @classmethod
    def rectangle(cls, r0: float, r1: float, z0: float, z1: float) -> "Domain":
        """Rectangular cross-section; corners make it unsuitable for
        trajectories, but it has a separable Laplacian spectrum."""
        if not (0 <= r0 < r1 and z0 < z1):
            raise GeometryError("rectangle bounds are not ordered")
        return cls(None, "rectangle", LevelSetSpec(2, np.array([r0, r1, z0, z1])),
                   extents=(r0, r1, z0, z1), touches_axis=r0 == 0,
                   params={"r0": r0, "r1": r1, "z0": z0, "z1": z1})

    @classmethod
    def from_curve(cls, curve: GeneratrixCurve, name: str = "curve",
                   table_size: int = 256) -> "Domain":
        """Domain from an arbitrary curve; the level set is a tabulated
        signed distance smoothed by a cubic spline."""
        spec, spl = _signed_distance_table(curve, table_size)
        return cls(curve, name, spec, sdf_spline=spl)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Domain":
        return cls.from_curve(GeneratrixCurve.from_csv(path), name=Path(path).stem)


def _signed_distance_table(curve: GeneratrixCurve, n: int):
    seg = curve.boundary_segments()
    pts = curve.samples[:, 1:]
    r_lo, r_hi = pts[:, 0].min(), pts[:, 0].max()
    z_lo, z_hi = pts[:, 1].min(), pts[:, 1].max()
    pad = 0.15 * max(r_hi - r_lo, z_hi - z_lo)
    rr = np.linspace(r_lo - pad, r_hi + pad, n)
    zz = np.linspace(z_lo - pad, z_hi + pad, n)
    R, Z = np.meshgrid(rr, zz, indexing="ij")
    query = np.column_stack([R.ravel(), Z.ravel()])
    dist = _distance_to_segments(query, seg)
    inside = winding_number(query, curve.polygon()) != 0
    sdf = np.where(inside, -dist, dist).reshape(R.shape)
    spl = RectBivariateSpline(rr, zz, sdf, kx=3, ky=3)
    tx, ty, coef = spl.get_knots()[0], spl.get_knots()[1], spl.get_coeffs()
    spec = LevelSetSpec(1, np.array([rr[0], rr[-1], zz[0], zz[-1]]), tx, ty, coef)
    return spec, spl


def _distance_to_segments(query: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from points to a polyline."""
    mids = 0.5 * (seg[:, 0] + seg[:, 1])
    tree = cKDTree(mids)
    k = min(8, len(seg))
    _, idx = tree.query(query, k=k)
    idx = np.atleast_2d(idx)
    a = seg[idx, 0]
    d = seg[idx, 1] - a
    w = query[:, None, :] - a
    t = np.clip(np.sum(w * d, axis=-1) / np.maximum(np.sum(d * d, axis=-1), 1e-300), 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.min(np.linalg.norm(query[:, None, :] - proj, axis=-1), axis=1)


def winding_number(points, polygon) -> np.ndarray:
    """Winding number of a closed polygon around each query point."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    v0 = polygon
    v1 = np.roll(polygon, -1, axis=0)
    wn = np.zeros(len(p), dtype=int)
    for chunk in range(0, len(p), 4096):
        q = p[chunk:chunk + 4096]
        x, y = q[:, 0:1], q[:, 1:2]
        cross = (v1[:, 0] - v0[:, 0]) * (y - v0[:, 1]) - (x - v0[:, 0]) * (v1[:, 1] - v0[:, 1])
        up = (v0[:, 1] <= y) & (v1[:, 1] > y) & (cross > 0)
        down = (v0[:, 1] > y) & (v1[:, 1] <= y) & (cross < 0)
        wn[chunk:chunk + 4096] = up.sum(axis=1) - down.sum(axis=1)
    return wn


def contains(domain: Domain, point, band: float | None = None) -> Containment:
    """Classify a meridian point as inside, on the boundary or outside."""
    result = contains_many(domain, np.atleast_2d(np.asarray(point, dtype=float)), band)
    return result[0]


def contains_many(domain: Domain, points, band: float | None = None) -> list[Containment]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts[:, 0] < 0):
        raise GeometryError("query points need r >= 0")
    band = 1e-9 * domain.diameter if band is None else band
    if domain.curve is None:
        f = domain.levelset(pts[:, 0], pts[:, 1])
        return [Containment.BOUNDARY if abs(v) <= band else
                (Containment.INSIDE if v < 0 else Containment.OUTSIDE) for v in f]
    dist = _distance_to_segments(pts, domain.curve.boundary_segments())
    # the curve samples are a polygon; measure the band against the smooth curve
    dist = np.minimum(dist, np.abs(_smooth_distance(domain, pts, dist)))
    wn = winding_number(pts, domain.curve.polygon())
    out = []
    for d, w in zip(dist, wn):
        if d <= band:
            out.append(Containment.BOUNDARY)
        else:
            out.append(Containment.INSIDE if w != 0 else Containment.OUTSIDE)
    return out


def _smooth_distance(domain: Domain, pts: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """Refine point-to-curve distance by Newton projection near the curve."""
    curve = domain.curve
    beta = curve.samples[:, 0]
    out = coarse.copy()
    near = coarse < 1e-3 * domain.diameter
    for i in np.flatnonzero(near):
        p = pts[i]
        r, z = curve.samples[:, 1], curve.samples[:, 2]
        b = float(beta[np.argmin((r - p[0]) ** 2 + (z - p[1]) ** 2)])
        for _ in range(20):
            (x, y), (dx, dy), (ddx, ddy) = (np.array(curve.evaluate(b, k), dtype=float) for k in range(3))
            g = (x - p[0]) * dx + (y - p[1]) * dy
            h = dx * dx + dy * dy + (x - p[0]) * ddx + (y - p[1]) * ddy
            step = g / h if h != 0 else 0.0
            b = min(max(b - step, 0.0), 1.0)
            if abs(step) < 1e-15:
                break
        x, y = curve.evaluate(b)
        out[i] = math.hypot(float(x) - p[0], float(y) - p[1])
    return out


def domain_extents(domain: Domain) -> tuple[float, float, float]:
    """Return (b, L1, L2): max radius, axial extent and radial extent."""
    return domain.b, domain.L1, domain.L2


def poincare_upper_bound(domain: Domain, variant: str = "corrected") -> PoincareBound:
    """Upper bound on c_P, the square of the Poincare constant of the domain.

    ``variant="printed"`` evaluates min{b L1^2 L2^2 / (pi^2 (L1^2 + L2^2)), L1}.
    That expression is not a valid bound in general: the unit ball violates
    it. The default ``"corrected"`` variant uses the rectangle estimate with
    the weight ratio b / inf r (infinite when the domain touches the axis)
    and the one-dimensional axial estimate L1^2 / pi^2, which holds on every
    domain because the volume weight r is constant along vertical lines.
    """
    b, L1, L2 = domain_extents(domain)
    rect = L1 ** 2 * L2 ** 2 / (math.pi ** 2 * (L1 ** 2 + L2 ** 2))
    if variant == "printed":
        planar, axial = b * rect, L1
    elif variant == "corrected":
        planar = math.inf if domain.r_min <= 0 else (b / domain.r_min) * rect
        axial = L1 ** 2 / math.pi ** 2
    else:
        raise ValueError("unknown variant %r" % variant)
    active = "planar" if planar <= axial else "axial"
    return PoincareBound(min(planar, axial), planar, axial, active, variant)
