"""Characteristics of the equilibrium: particle orbits with specular walls.

Orbits are integrated in Cartesian phase space (x, y, z, p) so the axis is
not a coordinate singularity; states are reported in cylindrical
components (r, z, v_r, v_phi, v_z) plus the azimuth. A particle of charge
sign s obeys

    dX/dt = V / <V>,   dV/dt = s (E + V / <V> x B)

and is reflected by v -> v - 2 (v.n) n on hitting the wall.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import GeometryError, IntegratorError, ZenoError
from .fields import EquilibriumFields, _json_default

EXIT_STATUS = {kernels.COMPLETED: "completed", kernels.GRAZING: "grazing-detected",
               kernels.STEP_FAILURE: "step-failure", kernels.ZENO: "zeno-suspect"}


@dataclass(frozen=True)
class ParticleState:
    r: float
    z: float
    v_r: float
    v_phi: float
    v_z: float
    species: int = 1

    def __post_init__(self):
        vals = (self.r, self.z, self.v_r, self.v_phi, self.v_z)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("particle state has non-finite components")
        if self.r < 0:
            raise ValueError("radial coordinate must be non-negative")
        if self.species not in (1, -1):
            raise ValueError("species must be +1 or -1")

    def cartesian(self) -> np.ndarray:
        """State at azimuth 0, where e_r = e_x and e_phi = e_y."""
        return np.array([self.r, 0.0, self.z, self.v_r, self.v_phi, self.v_z])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.v_r, self.v_phi, self.v_z])


def to_cylindrical(y: np.ndarray) -> np.ndarray:
    """Cartesian states (..., 6) -> (..., 6) as (r, z, v_r, v_phi, v_z, angle)."""
    y = np.asarray(y, dtype=float)
    x, yy, z = y[..., 0], y[..., 1], y[..., 2]
    px, py, pz = y[..., 3], y[..., 4], y[..., 5]
    r = np.hypot(x, yy)
    ang = np.arctan2(yy, x)
    c, s = np.cos(ang), np.sin(ang)
    return np.stack([r, z, c * px + s * py, c * py - s * px, pz, ang], axis=-1)


def to_cartesian(cyl: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_cylindrical`."""
    cyl = np.asarray(cyl, dtype=float)
    r, z, vr, vp, vz, ang = (cyl[..., k] for k in range(6))
    c, s = np.cos(ang), np.sin(ang)
    return np.stack([r * c, r * s, z, c * vr - s * vp, s * vr + c * vp, vz], axis=-1)


def invariants(fields: EquilibriumFields, cyl: np.ndarray, species) -> tuple[np.ndarray, np.ndarray]:
    """Energy <v> + s phi0 and angular momentum r (v_phi + s A0) for
    cylindrical states (..., >= 5)."""
    cyl = np.asarray(cyl, dtype=float)
    s = np.asarray(species, dtype=float)
    r, z = cyl[..., 0], cyl[..., 1]
    gam = np.sqrt(1.0 + cyl[..., 2] ** 2 + cyl[..., 3] ** 2 + cyl[..., 4] ** 2)
    if fields.is_zero:
        return gam, r * cyl[..., 3]
    shape = r.shape
    phi = fields.phi(r.ravel(), z.ravel()).reshape(shape)
    A = fields.A(r.ravel(), z.ravel()).reshape(shape)
    return gam + s * phi, r * (cyl[..., 3] + s * A)


# --------------------------------------------------------------------------
# single orbits

@dataclass
class Collision:
    time: float
    beta: float
    position: np.ndarray
    pre: np.ndarray
    post: np.ndarray


@dataclass
class TrajectoryResult:
    times: np.ndarray
    states: np.ndarray          # (n, 6): r, z, v_r, v_phi, v_z, angle
    species: int
    collisions: list = field(default_factory=list)
    exit_status: str = "completed"
    drift_e: float = 0.0
    drift_p: float = 0.0

    def invariants(self, fields: EquilibriumFields):
        return invariants(fields, self.states, self.species)

    def to_csv(self, path, fields: EquilibriumFields):
        e, p = self.invariants(fields)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r", "z", "vr", "vphi", "vz", "e", "p"])
            for t, s, ee, pp in zip(self.times, self.states, e, p):
                w.writerow([repr(float(v)) for v in (t, *s[:5], ee, pp)])


def _collision_beta(domain, pos):
    if domain.curve is None:
        return math.nan
    return float(domain.curve.locate(pos[0], pos[1])[0])


def integrate(state: ParticleState, fields: EquilibriumFields, T: float, dt: float,
              stride: int = 1, max_collisions: int = 10**6, backward: bool = False,
              backend: str | None = None) -> TrajectoryResult:
    """Integrate one particle over [0, T] (or [-T, 0] when ``backward``).

    Raises ZenoError after more than ``max_collisions`` reflections and
    IntegratorError when the state leaves the domain; a grazing impact ends
    the orbit with exit status ``grazing-detected``.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    f = fields.domain.levelset(state.r, state.z)
    if f > 1e-9 * fields.domain.diameter:
        raise GeometryError("initial position lies outside the domain")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a multiple of dt")
    step = -dt if backward else dt
    samples, status, ncoll, events = kernels.trace(
        state.cartesian()[None, :], [float(state.species)], fields, step, n_steps, stride,
        max_collisions, record=True, backend=backend)
    code = int(status[0])
    if code == kernels.ZENO:
        raise ZenoError("more than %d wall collisions" % max_collisions)
    if code == kernels.STEP_FAILURE:
        raise IntegratorError("orbit left the domain or produced non-finite values")
    cyl = to_cylindrical(samples[0])
    times = np.arange(samples.shape[1]) * stride * step
    collisions = []
    for _, t, pos, pre, post in events:
        c_pre = to_cylindrical(np.concatenate([pos, pre]))
        c_post = to_cylindrical(np.concatenate([pos, post]))
        collisions.append(Collision(t, _collision_beta(fields.domain, c_pre[:2]), c_pre[:2],
                                    c_pre[2:5], c_post[2:5]))
    res = TrajectoryResult(times, cyl, state.species, collisions, EXIT_STATUS[code])
    res.drift_e, res.drift_p = invariant_drift(res, fields)
    return res


def invariant_drift(result: TrajectoryResult, fields: EquilibriumFields) -> tuple[float, float]:
    """Largest relative change of e and p along the stored samples."""
    if len(result.times) < 2:
        raise ValueError("need at least two samples")
    e, p = result.invariants(fields)
    de = float(np.max(np.abs(e - e[0]))) / max(1.0, abs(float(e[0])))
    dp = float(np.max(np.abs(p - p[0]))) / max(1.0, abs(float(p[0])))
    return de, dp


def drift_batch(samples: np.ndarray, species, fields: EquilibriumFields) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle relative drift of e and p for kernel output (n, m, 6)."""
    cyl = to_cylindrical(samples)
    sp = np.asarray(species, dtype=float)[:, None] * np.ones(cyl.shape[:2])
    e, p = invariants(fields, cyl, sp)
    de = np.max(np.abs(e - e[:, :1]), axis=1) / np.maximum(1.0, np.abs(e[:, 0]))
    dp = np.max(np.abs(p - p[:, :1]), axis=1) / np.maximum(1.0, np.abs(p[:, 0]))
    return de, dp


# --------------------------------------------------------------------------
# ensembles

def sample_phase_space(domain, n: int, rng: np.random.Generator, v_max: float,
                       fields: EquilibriumFields | None = None, species: int = 1,
                       e_max: float | None = None, batch: int | None = None) -> np.ndarray:
    """Uniform samples (n, 6) in cylindrical form (angle 0) of the set
    {x in domain, |v| <= v_max} or, with ``e_max``, of {e <= e_max}.

    Positions are uniform in three-dimensional volume, i.e. with density
    proportional to r in the meridian plane.
    """
    r0, r1, z0, z1 = domain.bounding_box()
    out = np.empty((0, 6))
    batch = batch or max(1024, 2 * n)
    while len(out) < n:
        u = rng.random(batch)
        r = np.sqrt(r0 * r0 + u * (r1 * r1 - r0 * r0))
        z = z0 + (z1 - z0) * rng.random(batch)
        v = rng.normal(size=(batch, 3))
        v *= (v_max * rng.random(batch) ** (1.0 / 3.0) / np.linalg.norm(v, axis=1))[:, None]
        keep = domain.levelset(r, z) < 0
        cand = np.column_stack([r, z, v, np.zeros(batch)])[keep]
        if e_max is not None:
            e, _ = invariants(fields, cand, species)
            cand = cand[e <= e_max]
        out = np.vstack([out, cand])
    return out[:n]


@dataclass
class CensusResult:
    counts: np.ndarray
    histogram: dict
    grazing_fraction: float
    n_grazing: int
    n_failed: int
    drift_e_max: float
    drift_p_max: float

    def to_json(self, path, extra: dict | None = None):
        data = {"histogram": self.histogram, "grazing_fraction": self.grazing_fraction,
                "n_grazing": self.n_grazing, "n_failed": self.n_failed,
                "n_particles": int(len(self.counts)) + self.n_grazing + self.n_failed,
                "drift_e_max": self.drift_e_max, "drift_p_max": self.drift_p_max}
        data.update(extra or {})
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)


def collision_census(ensemble, fields: EquilibriumFields, T: float, dt: float,
                     species=1, max_collisions: int = 10**6, backend: str | None = None,
                     stride: int | None = None) -> CensusResult:
    """Wall-collision counts over [0, T] for cylindrical states (n, >= 5).

    Grazing orbits are reported separately and left out of the histogram,
    as are orbits that failed.
    """
    cyl = np.asarray(ensemble, dtype=float)
    if cyl.shape[1] == 5:
        cyl = np.column_stack([cyl, np.zeros(len(cyl))])
    n_steps = int(round(T / dt))
    stride = stride or max(1, n_steps // 100)
    signs = np.broadcast_to(np.asarray(species, dtype=float), (len(cyl),))
    samples, status, ncoll, _ = kernels.trace(to_cartesian(cyl), signs, fields, dt, n_steps,
                                              stride, max_collisions, backend=backend)
    ok = status == kernels.COMPLETED
    de, dp = drift_batch(samples[ok], signs[ok], fields) if ok.any() else (np.zeros(0), np.zeros(0))
    counts = ncoll[ok]
    values, freq = np.unique(counts, return_counts=True)
    n_graze = int(np.sum(status == kernels.GRAZING))
    return CensusResult(counts, {int(v): int(c) for v, c in zip(values, freq)},
                        n_graze / len(cyl) if len(cyl) else 0.0, n_graze,
                        int(np.sum((status == kernels.STEP_FAILURE) | (status == kernels.ZENO))),
                        float(de.max(initial=0.0)), float(dp.max(initial=0.0)))


def flow_map(cyl: np.ndarray, fields: EquilibriumFields, t: float, dt: float, species=1,
             backend: str | None = None):
    """Time-t images of cylindrical states (n, 6) and their exit codes."""
    n_steps = int(round(abs(t) / dt))
    signs = np.broadcast_to(np.asarray(species, dtype=float), (len(cyl),))
    samples, status, _, _ = kernels.trace(to_cartesian(cyl), signs, fields,
                                          math.copysign(dt, t), n_steps, n_steps, backend=backend)
    return to_cylindrical(samples[:, -1]), status


def flow_jacobian_determinant(state: ParticleState, fields: EquilibriumFields, t: float,
                              dt: float, delta: float = 1e-5, backend: str | None = None) -> float:
    """Determinant of the Cartesian phase-space Jacobian of the time-t map,
    by central differences with step ``delta``."""
    y0 = state.cartesian()
    pts = []
    for k in range(6):
        for sgn in (1.0, -1.0):
            y = y0.copy()
            y[k] += sgn * delta
            pts.append(y)
    n_steps = int(round(t / dt))
    samples, status, ncoll, _ = kernels.trace(np.array(pts), float(state.species), fields, dt,
                                              n_steps, n_steps, backend=backend)
    if np.any(status != kernels.COMPLETED) or np.any(ncoll != ncoll[0]):
        raise IntegratorError("difference stencil straddles a wall collision or failed")
    end = samples[:, -1]
    J = np.column_stack([(end[2 * k] - end[2 * k + 1]) / (2 * delta) for k in range(6)])
    return float(np.linalg.det(J))
