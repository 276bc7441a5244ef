"""Equilibrium potentials on the meridian grid and their smooth interpolants.

The electric potential phi0 and the azimuthal vector potential A_phi0 are
stored as interior grid values. For evaluation off the nodes both are
extended past the boundary by a discrete biharmonic continuation and
interpolated with tensor B-splines (quintic by default). The spline is then
the field: E0 and B0 are its exact derivatives, so the energy and angular
momentum built from it are exact invariants of the particle equations.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from .elliptic import MeridianGrid
from .errors import GeometryError
from .geometry import Domain, GeneratrixCurve

AXIS_EPS = 1e-10


@dataclass(frozen=True)
class SplineData:
    """Flat spline description consumed by the trajectory kernels."""

    tx: np.ndarray
    ty: np.ndarray
    coef_phi: np.ndarray
    coef_A: np.ndarray
    kx: int
    ky: int
    zero: bool
    r_range: tuple
    z_range: tuple


class EquilibriumFields:
    def __init__(self, grid: MeridianGrid, phi0=None, Aphi0=None, order: int = 5):
        self.grid = grid
        n = grid.n_interior
        self.phi0 = np.zeros(n) if phi0 is None else grid.to_interior(phi0).copy()
        self.Aphi0 = np.zeros(n) if Aphi0 is None else grid.to_interior(Aphi0).copy()
        if order not in (1, 3, 5):
            raise ValueError("interpolation order must be 1, 3 or 5")
        self.order = order
        self.meta: dict = {}
        self._build()

    @classmethod
    def zero(cls, grid: MeridianGrid, order: int = 5):
        return cls(grid, None, None, order)

    @property
    def domain(self) -> Domain:
        return self.grid.domain

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.phi0) or np.any(self.Aphi0))

    def sup_norms(self) -> tuple[float, float]:
        return float(np.max(np.abs(self.phi0), initial=0.0)), float(np.max(np.abs(self.Aphi0), initial=0.0))

    # construction ------------------------------------------------------
    def _build(self):
        g = self.grid
        r = g.r
        phi_full, A_full = g.to_full(self.phi0), g.to_full(self.Aphi0)
        mask = g.mask
        if g.on_axis:
            r = np.concatenate([-r[::-1], r])
            mask = np.vstack([mask[::-1], mask])
            phi_full = np.vstack([phi_full[::-1], phi_full])
            A_full = np.vstack([-A_full[::-1], A_full])
        if not self.is_zero:
            phi_full = _biharmonic_extension(phi_full, mask)
            A_full = _biharmonic_extension(A_full, mask)
        k = self.order
        self._phi = RectBivariateSpline(r, g.z, phi_full, kx=k, ky=k, s=0)
        self._A = RectBivariateSpline(r, g.z, A_full, kx=k, ky=k, s=0)
        tx, ty, cphi = self._phi.tck
        _, _, cA = self._A.tck
        self.spline = SplineData(np.ascontiguousarray(tx), np.ascontiguousarray(ty),
                                 np.ascontiguousarray(cphi), np.ascontiguousarray(cA),
                                 k, k, self.is_zero, (float(r[0]), float(r[-1])),
                                 (float(g.z[0]), float(g.z[-1])))

    # evaluation --------------------------------------------------------
    def phi(self, r, z, dr: int = 0, dz: int = 0):
        return self._phi.ev(r, z, dx=dr, dy=dz)

    def A(self, r, z, dr: int = 0, dz: int = 0):
        return self._A.ev(r, z, dx=dr, dy=dz)

    def B_z(self, r, z):
        """(1/r) d(r A)/dr, using 2 dA/dr on the axis."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        safe = np.where(np.abs(r) < AXIS_EPS, 1.0, r)
        dA = self.A(r, z, dr=1)
        return np.where(np.abs(r) < AXIS_EPS, 2.0 * dA, self.A(r, z) / safe + dA)

    def check_inside(self, r, z, band: float | None = None):
        band = 1e-9 * self.domain.diameter if band is None else band
        f = self.domain.levelset(np.asarray(r, dtype=float), np.asarray(z, dtype=float))
        if np.any(f > band):
            raise GeometryError("point outside the domain")

    def kernel_data(self) -> SplineData:
        return self.spline

    # persistence -------------------------------------------------------
    def save(self, path_csv: str | Path, extra_meta: dict | None = None):
        path_csv = Path(path_csv)
        g = self.grid
        with open(path_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "z", "phi0", "Aphi0"])
            for rr, zz, p, a in zip(g.r_interior, g.z_interior, self.phi0, self.Aphi0):
                w.writerow([repr(float(rr)), repr(float(zz)), repr(float(p)), repr(float(a))])
        meta = {"grid": g.describe(), "order": self.order,
                "domain": domain_record(g.domain), "domain_hash": domain_hash(g.domain)}
        meta.update(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        with open(path_csv.with_suffix(".json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def load(cls, path_csv: str | Path) -> "EquilibriumFields":
        path_csv = Path(path_csv)
        with open(path_csv.with_suffix(".json")) as fh:
            meta = json.load(fh)
        domain = domain_from_record(meta["domain"])
        gd = meta["grid"]
        grid = MeridianGrid(domain, gd["n"], gd["pad"])
        with open(path_csv, newline="") as fh:
            rows = [tuple(float(x) for x in row) for row in list(csv.reader(fh))[1:]]
        data = np.array(rows)
        if len(data) != grid.n_interior or not np.allclose(data[:, 0], grid.r_interior):
            raise GeometryError("stored grid does not match the reconstructed grid")
        out = cls(grid, data[:, 2], data[:, 3], meta.get("order", 5))
        out.meta = {k: v for k, v in meta.items() if k not in ("grid", "domain", "order")}
        return out


def eval_e_p(fields: EquilibriumFields, x, v, species: int):
    """Energy <v> +- phi0 and angular momentum r (v_phi +- A_phi0)."""
    r, z = float(x[0]), float(x[1])
    fields.check_inside(r, z)
    v = np.asarray(v, dtype=float)
    s = 1.0 if species > 0 else -1.0
    e = math.sqrt(1.0 + float(v @ v)) + s * float(fields.phi(r, z))
    p = r * (float(v[1]) + s * float(fields.A(r, z)))
    return e, p


def eval_E0_B0(fields: EquilibriumFields, x):
    """Equilibrium fields at a meridian point, components (r, phi, z)."""
    r, z = float(x[0]), float(x[1])
    if r < AXIS_EPS and not fields.domain.touches_axis:
        raise GeometryError("evaluation on the axis of a domain that avoids it")
    fields.check_inside(r, z)
    E = np.array([-float(fields.phi(r, z, dr=1)), 0.0, -float(fields.phi(r, z, dz=1))])
    B = np.array([-float(fields.A(r, z, dz=1)), 0.0, float(fields.B_z(r, z))])
    return E, B


def _biharmonic_extension(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Fill unknown nodes so that the discrete bilaplacian vanishes there."""
    nr, nz = values.shape
    n = nr * nz

    def lap1d(m):
        return sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1])

    lap = sp.kron(lap1d(nr), sp.identity(nz)) + sp.kron(sp.identity(nr), lap1d(nz))
    bih = (lap @ lap).tocsr()
    k = known.ravel()
    unknown = np.flatnonzero(~k)
    fixed = np.flatnonzero(k)
    if unknown.size == 0:
        return values
    rhs = -bih[unknown][:, fixed] @ values.ravel()[fixed]
    sol = spla.spsolve(bih[unknown][:, unknown].tocsc(), rhs)
    out = values.ravel().copy()
    out[unknown] = sol
    return out.reshape(nr, nz)


# domain records ---------------------------------------------------------

def domain_record(domain: Domain) -> dict:
    rec = {"name": domain.name, "params": domain.params}
    if domain.name not in ("torus", "ball", "ellipse", "rectangle"):
        rec["curve"] = domain.curve.samples[::4, 1:].tolist()
        rec["touches_axis"] = domain.touches_axis
    return rec


def domain_from_record(rec: dict) -> Domain:
    name, p = rec["name"], rec.get("params", {})
    if name == "torus":
        return Domain.torus(p["R"], p["a"])
    if name == "ball":
        return Domain.ball(p["a"])
    if name == "ellipse":
        return Domain.ellipse(p["R"], p["ar"], p["az"])
    if name == "rectangle":
        return Domain.rectangle(p["r0"], p["r1"], p["z0"], p["z1"])
    pts = np.array(rec["curve"])
    if rec.get("touches_axis"):
        curve = GeneratrixCurve.from_points(pts[:, 0], pts[:, 1], touches_axis=True)
    else:
        curve = GeneratrixCurve.from_points(pts[:-1, 0], pts[:-1, 1], touches_axis=False)
    return Domain.from_curve(curve, name=name)


def domain_hash(domain: Domain) -> str:
    text = json.dumps(domain_record(domain), sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError("not JSON serialisable: %r" % type(obj))
