"""Galerkin matrices of the reduced stability operator.

For a growth rate lam > 0 the trajectory average

    Q_lam g (x, v) = int_{-inf}^0 lam e^{lam s} g(X(s), V(s)) ds

is computed by backward integration, and its lam -> 0 limit, the projection
P onto functions invariant along orbits, by the backward time average over
a window T_avg. With Pi = Q_lam (or P) and sums over both species, the
operators act on the Dirichlet eigenbases of -Delta (electric block) and of
-Delta + 1/r^2 (magnetic block):

    A1 h = Delta h + sum int mu_e (1 - Pi) h dv
    A2 h = (lam^2 - Delta + 1/r^2) h - sum int vhat_phi (mu_p r h + mu_e Pi(vhat_phi h)) dv
    B  h = - sum int vhat_phi mu_e (1 - Pi) h dv
    L    = A2 - B A1^{-1} B^T

Phase-space integrals use a subsampled set of interior grid nodes times a
velocity product rule. Each (node, velocity) pair is traced backward once
and its time-weighted path is deposited on the grid, where the basis
functions are read off by bilinear interpolation. One trajectory pass
serves every requested lam.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import __version__, kernels
from .ansatz import EquilibriumAnsatz
from .elliptic import BasisSet, MeridianGrid
from .errors import AssemblyError, InvariantViolation, SolverError
from .fields import EquilibriumFields, _json_default
from .quadrature import VelocityQuadrature
from .trajectories import to_cartesian, to_cylindrical

log = logging.getLogger(__name__)

BASIS_KINDS = {"laplacian-dirichlet": "poisson", "m1-dirichlet": "m1"}
# e^{-23} ~ 1e-10: horizon factor for the exponential weight
HORIZON_FACTOR = 23.0


# --------------------------------------------------------------------------
# bases

def build_basis(grid: MeridianGrid, N: int, kind: str) -> BasisSet:
    """Lowest N Dirichlet eigenfunctions of -Delta or -Delta + 1/r^2."""
    if kind not in BASIS_KINDS:
        raise ValueError("basis kind must be one of %s" % sorted(BASIS_KINDS))
    if N > grid.n_interior:
        raise SolverError("basis size %d exceeds %d interior nodes" % (N, grid.n_interior))
    vals, vecs = grid.eigenpairs(BASIS_KINDS[kind], N)
    basis = BasisSet(kind, grid, vecs, vals)
    defect = float(np.max(np.abs(basis.gram() - np.eye(N))))
    if defect > 1e-9:
        raise SolverError("basis Gram matrix deviates from identity by %.2e" % defect)
    return basis


# --------------------------------------------------------------------------
# time weights

def exponential_weights(lam: float, dt: float, n_steps: int) -> np.ndarray:
    """Weights on samples s_k = -k dt, k = 0..n_steps, integrating
    lam e^{lam s} against the piecewise linear interpolant exactly. The
    mass beyond the horizon is put on the last sample, so the weights sum
    to one."""
    x = lam * dt
    decay = np.exp(-x * np.arange(n_steps + 1))
    if x < 1e-6:
        a = x / 2 - x * x / 3
        b = x / 2 - x * x / 6
    else:
        a = 1.0 - (1.0 - math.exp(-x)) / x
        b = (1.0 - math.exp(-x)) / x - math.exp(-x)
    w = np.zeros(n_steps + 1)
    w[:-1] += a * decay[:-1]
    w[1:] += b * decay[:-1]
    w[-1] += decay[-1]
    return w


def average_weights(T: float, dt: float, n_steps: int) -> np.ndarray:
    """Trapezoid weights of (1/T) int_{-T}^0 ds on the same samples."""
    m = int(round(T / dt))
    if m < 1 or m > n_steps:
        raise ValueError("window T=%g does not fit %d steps of %g" % (T, n_steps, dt))
    w = np.zeros(n_steps + 1)
    w[: m + 1] = dt / T
    w[0] *= 0.5
    w[m] *= 0.5
    return w


def horizon_steps(lam: float, dt: float, factor: float = HORIZON_FACTOR) -> int:
    return max(1, int(math.ceil(factor / (lam * dt))))


# --------------------------------------------------------------------------
# pointwise trajectory averages

def _as_list(g):
    return (list(g), False) if isinstance(g, (list, tuple)) else ([g], True)


def _backward_values(gs, x, v, fields, species, dt, n_steps, weights, chunk, backend):
    """Evaluate each g on backward orbits and contract with the time-weight
    vectors chunk by chunk. Returns (reduced[n_g, n_points, n_w],
    spread[n_g, n_points], status)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = len(x)
    W = np.column_stack(weights)
    red = np.empty((len(gs), n, W.shape[1]))
    spread = np.empty((len(gs), n))
    status = np.zeros(n, dtype=np.int64)
    species = np.broadcast_to(np.asarray(species, dtype=float), (n,))
    for lo in range(0, n, chunk):
        sl = slice(lo, min(n, lo + chunk))
        cyl0 = np.column_stack([x[sl, 0], x[sl, 1], v[sl], np.zeros(sl.stop - lo)])
        samples, st, _, _ = kernels.trace(to_cartesian(cyl0), species[sl], fields, -dt,
                                          n_steps, 1, backend=backend)
        status[sl] = st
        cyl = to_cylindrical(samples)
        for k, g in enumerate(gs):
            vals = g(cyl)
            red[k, sl] = vals @ W
            spread[k, sl] = np.max(vals, axis=1) - np.min(vals, axis=1)
    return red, spread, status


@dataclass
class AverageResult:
    values: np.ndarray
    estimate: np.ndarray        # truncation (Q) or tail (P) estimate per point
    status: np.ndarray
    converged: np.ndarray | None = None


def q_lambda_apply(g, lam: float, x, v, fields: EquilibriumFields, species=1, dt: float = 0.01,
                   horizon_factor: float = HORIZON_FACTOR, chunk: int = 512,
                   backend: str | None = None) -> AverageResult:
    """Q_lam g at phase-space points (x = (r, z), v cylindrical).

    ``g`` maps cylindrical states (..., 6) to values, or is a list of such
    callables. The truncation estimate is e^{-lam horizon} times the spread
    of g along the orbit.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    gs, single = _as_list(g)
    n_steps = horizon_steps(lam, dt, horizon_factor)
    w = exponential_weights(lam, dt, n_steps)
    red, spread, status = _backward_values(gs, x, v, fields, species, dt, n_steps, [w], chunk,
                                           backend)
    res = red[..., 0]
    est = math.exp(-lam * n_steps * dt) * spread
    if single:
        return AverageResult(res[0], est[0], status)
    return AverageResult(res, est, status)


def p_apply(g, x, v, fields: EquilibriumFields, T_avg: float = 200.0, species=1,
            dt: float = 0.05, tol: float = 1e-4, chunk: int = 512,
            backend: str | None = None) -> AverageResult:
    """Backward time average of g over [-T_avg, 0]; the tail estimate is
    the difference to the average over [-T_avg/2, 0]."""
    gs, single = _as_list(g)
    n_steps = int(round(T_avg / dt))
    red, _, status = _backward_values(
        gs, x, v, fields, species, dt, n_steps,
        [average_weights(T_avg, dt, n_steps), average_weights(T_avg / 2, dt, n_steps)],
        chunk, backend)
    full, half = red[..., 0], red[..., 1]
    est = np.abs(full - half)
    conv = est <= tol
    if single:
        return AverageResult(full[0], est[0], status, conv[0])
    return AverageResult(full, est, status, conv)


def h_norm_sq(values, weights, mu_e) -> float:
    """Squared norm with weight |mu_e| on a phase-space sample."""
    return float(np.sum(weights * np.abs(mu_e) * np.asarray(values) ** 2))


# --------------------------------------------------------------------------
# phase-space sample

@dataclass
class AssemblySettings:
    dt: float = 0.05
    T_avg: float = 200.0
    horizon_factor: float = HORIZON_FACTOR
    row_stride: int = 2
    row_chunk: int = 16
    asymmetry_tol: float = 0.25
    tail_tol: float = 1e-4
    max_doublings: int = 2
    backend: str | None = None


def assembly_quadrature(ansatz: EquilibriumAnsatz, b: float, n_radial: int = 8,
                        n_polar: int = 8, n_azimuth: int = 4, tol: float = 1e-6,
                        v_cap: float = 30.0) -> VelocityQuadrature:
    """Coarse velocity rule for operator assembly; the cutoff follows the
    tail of the ansatz."""
    v_max = max(2.0, min(ansatz.tail_speed(tol, b), v_cap))
    panels = max(1, int(math.ceil(v_max / 4.0)))
    return VelocityQuadrature.spherical(n_radial, n_polar, n_azimuth, v_max, panels)


@dataclass
class PhaseSpaceSample:
    """Subsampled grid nodes times velocity nodes, with the equilibrium
    derivatives of both species on every pair."""

    grid: MeridianGrid
    rows: np.ndarray            # indices into interior nodes
    rz: np.ndarray              # (n_rows, 2)
    weights: np.ndarray         # spatial weights, rescaled to the full volume
    velocities: np.ndarray      # (n_v, 3) cylindrical
    vweights: np.ndarray
    vhat_phi: np.ndarray        # (n_v,)
    gamma: np.ndarray           # <v>
    species: dict               # sign -> dict(mu_e, mu_p, p) each (n_rows, n_v)
    A_rows: np.ndarray
    phi_rows: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.rows)


def make_sample(grid: MeridianGrid, ansatz: EquilibriumAnsatz, fields: EquilibriumFields,
                quad: VelocityQuadrature, stride: int = 2) -> PhaseSpaceSample:
    ij = grid.interior
    keep = (ij[:, 0] % stride == 0) & (ij[:, 1] % stride == 0)
    rows = np.flatnonzero(keep)
    if len(rows) == 0:
        raise AssemblyError("row subsampling left no interior nodes")
    r = grid.r_interior[rows]
    z = grid.z_interior[rows]
    w = grid.weights[rows] * (grid.weights.sum() / grid.weights[rows].sum())
    vel = quad.nodes
    gam = quad.gamma_factor
    phi = fields.phi(r, z)
    A = fields.A(r, z)
    species = {}
    for s in (1, -1):
        e = gam[None, :] + s * phi[:, None]
        p = r[:, None] * (vel[None, :, 1] + s * A[:, None])
        species[s] = {"mu_e": ansatz.mu_e(s, e, p), "mu_p": ansatz.mu_p(s, e, p), "p": p}
    return PhaseSpaceSample(grid, rows, np.column_stack([r, z]), w, vel, quad.weights,
                            vel[:, 1] / gam, gam, species, A, phi)


# --------------------------------------------------------------------------
# matrices

@dataclass
class OperatorMatrices:
    lam: float
    A1: np.ndarray
    A2: np.ndarray
    B: np.ndarray
    L: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    def to_json(self, path, meta: dict | None = None):
        data = {"lambda": self.lam, "N_phi": self.A1.shape[0], "N_A": self.A2.shape[0],
                "A1": self.A1.tolist(), "A2": self.A2.tolist(), "B": self.B.tolist(),
                "L": None if self.L is None else self.L.tolist(), "report": self.report,
                "version": __version__}
        data.update(meta or {})
        with open(path, "w") as fh:
            json.dump(data, fh, sort_keys=True, default=_json_default)

    @classmethod
    def from_json(cls, path) -> "OperatorMatrices":
        with open(path) as fh:
            d = json.load(fh)
        L = None if d.get("L") is None else np.array(d["L"])
        return cls(d["lambda"], np.array(d["A1"]), np.array(d["A2"]), np.array(d["B"]), L,
                   d.get("report", {}))


def relative_asymmetry(M: np.ndarray) -> float:
    n = np.linalg.norm(M)
    return 0.0 if n == 0 else float(np.linalg.norm(M - M.T) / n)


class OperatorAssembler:
    """Assembles A1, A2, B and L for one equilibrium on fixed bases.

    Trajectory deposits are cached per set of growth rates, so repeated
    requests (for instance different basis truncations) reuse them.
    """

    def __init__(self, ansatz: EquilibriumAnsatz, fields: EquilibriumFields,
                 basis_phi: BasisSet, basis_A: BasisSet, quad: VelocityQuadrature | None = None,
                 settings: AssemblySettings | None = None):
        if basis_phi.kind != "laplacian-dirichlet" or basis_A.kind != "m1-dirichlet":
            raise ValueError("expected a laplacian-dirichlet and an m1-dirichlet basis")
        if basis_phi.grid is not basis_A.grid or basis_phi.grid is not fields.grid:
            raise ValueError("bases and fields must share one grid")
        self.ansatz = ansatz
        self.fields = fields
        self.grid = fields.grid
        self.basis_phi = basis_phi
        self.basis_A = basis_A
        self.settings = settings or AssemblySettings()
        self.quad = quad or assembly_quadrature(ansatz, self.grid.domain.b)
        self.sample = make_sample(self.grid, ansatz, fields, self.quad, self.settings.row_stride)
        s = self.sample
        self.Hphi_rows = basis_phi.functions[s.rows]
        self.HA_rows = basis_A.functions[s.rows]
        self._Hphi_full = basis_phi.full()
        self._HA_full = basis_A.full()
        self._cache: dict = {}
        self._local = self._local_parts()

    # local (trajectory-free) parts ------------------------------------
    def _local_parts(self):
        s = self.sample
        wv = s.vweights[None, :]
        D1 = np.zeros(s.n_rows)
        Dv = np.zeros(s.n_rows)
        DI = np.zeros(s.n_rows)
        DII = np.zeros(s.n_rows)
        for sign, d in s.species.items():
            D1 += np.sum(wv * d["mu_e"], axis=1)
            Dv += np.sum(wv * d["mu_e"] * s.vhat_phi[None, :], axis=1)
            # vhat_phi r = (p - sign r A) / <v>
            DI += np.sum(wv * d["p"] * d["mu_p"] / s.gamma[None, :], axis=1)
            DII -= sign * s.rz[:, 0] * s.A_rows * np.sum(wv * d["mu_p"] / s.gamma[None, :], axis=1)
        return {"D1": D1, "Dv": Dv, "Dp": DI + DII, "DI": DI, "DII": DII}

    def coupling_constants(self) -> dict:
        """sup over sampled nodes of int sum |mu_e| dv and int sum r |vhat_phi mu_p| dv."""
        s = self.sample
        ce = np.zeros(s.n_rows)
        cp = np.zeros(s.n_rows)
        for d in s.species.values():
            ce += np.abs(d["mu_e"]) @ s.vweights
            cp += (np.abs(d["mu_p"] * s.vhat_phi[None, :]) @ s.vweights) * s.rz[:, 0]
        return {"C_e": float(ce.max(initial=0.0)), "C_p": float(cp.max(initial=0.0))}

    # trajectory deposits --------------------------------------------
    def _weight_table(self, lams, T_avg):
        st = self.settings
        dt = st.dt
        n = 0
        for lam in lams:
            n = max(n, horizon_steps(lam, dt, st.horizon_factor) if lam > 0
                    else int(round(T_avg / dt)))
        rows, labels = [], []
        for lam in lams:
            if lam > 0:
                w = np.zeros(n + 1)
                k = horizon_steps(lam, dt, st.horizon_factor)
                w[: k + 1] = exponential_weights(lam, dt, k)
                rows.append(w)
                labels.append(("Q", lam))
            else:
                rows.append(average_weights(T_avg, dt, n))
                rows.append(average_weights(T_avg / 2, dt, n))
                labels += [("P", 0.0), ("P_half", 0.0)]
        return np.array(rows), labels, n

    def _deposit(self, lams, T_avg):
        st = self.settings
        s = self.sample
        g = self.grid
        tw, labels, n_steps = self._weight_table(lams, T_avg)
        n_w = len(labels)
        grid_spec = (g.r_lo, g.z_lo, g.h, g.shape[0], g.shape[1], g.on_axis)
        Nphi, NA = self.basis_phi.size, self.basis_A.size
        M1 = np.zeros((n_w, s.n_rows, Nphi))
        Mv = np.zeros((n_w, s.n_rows, Nphi))
        Mvv = np.zeros((n_w, s.n_rows, NA))
        status = np.zeros(4, dtype=np.int64)
        if self.fields.kernel_data().zero and self.ansatz.symmetric_species:
            groups = [(1.0, s.species[1]["mu_e"] + s.species[-1]["mu_e"])]
        else:
            groups = [(float(sign), d["mu_e"]) for sign, d in s.species.items()]
        for sign, mu_e in groups:
            coef = mu_e * s.vweights[None, :]
            if not np.any(coef):
                continue
            for lo in range(0, s.n_rows, st.row_chunk):
                sl = slice(lo, min(s.n_rows, lo + st.row_chunk))
                out, counts = kernels.deposit(s.rz[sl], s.velocities, coef[sl], sign,
                                              self.fields, -st.dt, n_steps, tw, grid_spec,
                                              backend=st.backend)
                status += counts
                M1[:, sl] += out[:, 0] @ self._Hphi_full
                Mv[:, sl] += out[:, 1] @ self._Hphi_full
                Mvv[:, sl] += out[:, 2] @ self._HA_full
        return labels, M1, Mv, Mvv, status, n_steps

    def nonlocal_parts(self, lams) -> dict:
        """Projected deposits per growth rate; lam = 0 uses the time average
        with adaptive window doubling up to ``max_doublings``."""
        key = tuple(sorted(set(float(l) for l in lams)))
        if key in self._cache:
            return self._cache[key]
        st = self.settings
        T_avg = st.T_avg
        for attempt in range(st.max_doublings + 1):
            labels, M1, Mv, Mvv, status, n_steps = self._deposit(key, T_avg)
            parts = {}
            tail = None
            for k, (kind, lam) in enumerate(labels):
                if kind == "Q":
                    parts[lam] = {"M1": M1[k], "Mv": Mv[k], "Mvv": Mvv[k]}
                elif kind == "P":
                    parts[0.0] = {"M1": M1[k], "Mv": Mv[k], "Mvv": Mvv[k]}
                else:
                    tail = self._tail(parts[0.0], {"M1": M1[k], "Mv": Mv[k], "Mvv": Mvv[k]}, T_avg)
            if tail is None or tail["converged"] or attempt == st.max_doublings:
                break
            log.info("time average not converged (tail %.2e); doubling T_avg", tail["operator_tail"])
            T_avg *= 2
        if tail is not None and not tail["converged"]:
            log.warning("time average tail %.2e exceeds %.1e at T_avg=%g",
                        tail["operator_tail"], st.tail_tol, T_avg)
        info = {"status_counts": {kernels.STATUS_NAMES[i]: int(status[i]) for i in range(4)},
                "n_steps": n_steps, "tail": tail}
        self._cache[key] = (parts, info)
        return self._cache[key]

    def _tail(self, full, half, T_avg) -> dict:
        """Relative change of the nonlocal matrix blocks between the T_avg
        and T_avg/2 averages, overall and per sample row."""
        W = self.sample.weights[:, None]
        rows = np.zeros(self.sample.n_rows)
        num = den = 0.0
        for name, H in (("M1", self.Hphi_rows), ("Mv", self.Hphi_rows), ("Mvv", self.HA_rows)):
            d = full[name] - half[name]
            num = max(num, float(np.linalg.norm(H.T @ (W * d))))
            den = max(den, float(np.linalg.norm(H.T @ (W * full[name]))))
            rows = np.maximum(rows, np.abs(d).max(axis=1) / max(float(np.abs(full[name]).max()), 1e-300))
        rel = num / den if den > 0 else 0.0
        # against the whole operator, whose size is set by the diagonal part
        op = max(float(np.linalg.norm(self.basis_phi.eigenvalues)),
                 float(np.linalg.norm(self.basis_A.eigenvalues)))
        return {"T_avg": T_avg, "relative_tail": rel, "operator_tail": num / op,
                "rows_not_converged": int(np.sum(rows > self.settings.tail_tol)),
                "converged": num / op <= self.settings.tail_tol}

    # matrices ---------------------------------------------------------
    def assemble(self, lams, with_L: bool = True, N_phi: int | None = None,
                 N_A: int | None = None) -> list[OperatorMatrices]:
        parts, info = self.nonlocal_parts(lams)
        s = self.sample
        loc = self._local
        W = s.weights[:, None]
        Np = N_phi or self.basis_phi.size
        Na = N_A or self.basis_A.size
        Hp = self.Hphi_rows[:, :Np]
        Ha = self.HA_rows[:, :Na]
        out = []
        for lam in lams:
            lam = float(lam)
            d = parts[lam]
            A1 = -np.diag(self.basis_phi.eigenvalues[:Np]) + Hp.T @ (W * (loc["D1"][:, None] * Hp - d["M1"][:, :Np]))
            B = -Ha.T @ (W * (loc["Dv"][:, None] * Hp - d["Mv"][:, :Np]))
            A2 = np.diag(lam * lam + self.basis_A.eigenvalues[:Na]) - Ha.T @ (
                W * (loc["Dp"][:, None] * Ha + d["Mvv"][:, :Na]))
            report = {"lambda": lam, "asymmetry_A1": relative_asymmetry(A1),
                      "asymmetry_A2": relative_asymmetry(A2), "N_phi": Np, "N_A": Na,
                      "n_rows": s.n_rows, "n_velocities": len(s.vweights),
                      "dt": self.settings.dt, "T_avg": self.settings.T_avg,
                      "horizon_factor": self.settings.horizon_factor,
                      "quadrature": {"kind": self.quad.kind, "v_max": self.quad.v_max,
                                     "size": self.quad.size},
                      "backend": self.settings.backend or kernels.BACKEND}
            report.update(info)
            worst = max(report["asymmetry_A1"], report["asymmetry_A2"])
            if worst > self.settings.asymmetry_tol:
                raise AssemblyError("pre-symmetrisation asymmetry %.3e exceeds %.3e"
                                    % (worst, self.settings.asymmetry_tol))
            A1 = 0.5 * (A1 + A1.T)
            A2 = 0.5 * (A2 + A2.T)
            mats = OperatorMatrices(lam, A1, A2, B, None, report)
            if with_L:
                mats.L, rep = schur_L(A1, A2, B)
                report.update(rep)
            out.append(mats)
        return out

    def quadratic_form_terms(self, coeffs_A, lam: float = 0.0) -> dict:
        """<A2 h, h> = energy + I + II + III for h = sum c_k h_k (magnetic basis)."""
        c = np.asarray(coeffs_A, dtype=float)
        Na = len(c)
        parts, _ = self.nonlocal_parts([lam])
        d = parts[float(lam)]
        s = self.sample
        h = self.HA_rows[:, :Na] @ c
        W = s.weights
        energy = float(np.sum((lam * lam + self.basis_A.eigenvalues[:Na]) * c * c))
        term_I = -float(np.sum(W * self._local["DI"] * h * h))
        term_II = -float(np.sum(W * self._local["DII"] * h * h))
        term_III = -float(np.sum(W * h * (d["Mvv"][:, :Na] @ c)))
        return {"total": energy + term_I + term_II + term_III, "energy": energy,
                "term_I": term_I, "term_II": term_II, "term_III": term_III}


def assemble_A1(assembler: OperatorAssembler, lam: float) -> np.ndarray:
    return assembler.assemble([lam], with_L=False)[0].A1


def assemble_A2(assembler: OperatorAssembler, lam: float) -> np.ndarray:
    return assembler.assemble([lam], with_L=False)[0].A2


def assemble_B(assembler: OperatorAssembler, lam: float) -> np.ndarray:
    return assembler.assemble([lam], with_L=False)[0].B


# --------------------------------------------------------------------------
# reduction and spectrum

def schur_L(A1: np.ndarray, A2: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, dict]:
    """L = A2 - B A1^{-1} B^T after checking that A1 is negative definite."""
    top = float(np.max(scipy.linalg.eigvalsh(A1)))
    if top >= 0:
        raise InvariantViolation("A1 is not negative definite (largest eigenvalue %.3e)" % top)
    Y = scipy.linalg.solve(A1, B.T, assume_a="sym")
    L = A2 - B @ Y
    asym = relative_asymmetry(L)
    L = 0.5 * (L + L.T)
    return L, {"A1_max_eigenvalue": top, "asymmetry_L": asym}


@dataclass
class StabilityVerdict:
    kappa: float
    eigvec: np.ndarray
    verdict: str
    tol: float


def smallest_eigenvalue(L: np.ndarray, rel_tol: float = 1e-6) -> StabilityVerdict:
    """Smallest eigenvalue of a symmetric matrix with a sign verdict at
    tolerance rel_tol ||L||."""
    if relative_asymmetry(L) > 1e-8:
        raise ValueError("L must be symmetric")
    n = L.shape[0]
    if n <= 512:
        vals, vecs = scipy.linalg.eigh(L, subset_by_index=[0, 0])
        kappa, vec = float(vals[0]), vecs[:, 0]
    else:
        import scipy.sparse.linalg as spla

        try:
            vals, vecs = spla.eigsh(L, k=1, which="SA", tol=1e-12)
        except spla.ArpackError as exc:
            raise SolverError("eigensolver did not converge: %s" % exc) from exc
        kappa, vec = float(vals[0]), vecs[:, 0]
    tol = rel_tol * float(np.linalg.norm(L, 2))
    if kappa < -tol:
        verdict = "unstable"
    elif kappa > tol:
        verdict = "stable"
    else:
        verdict = "marginal"
    return StabilityVerdict(kappa, vec, verdict, tol)


# --------------------------------------------------------------------------
# growth-rate scans

def lambda2_bound(C_e: float, C_p: float, lambda1_m1: float) -> float:
    """Growth rate beyond which L^lam is positive: since -B A1^{-1} B^T >= 0
    and ||Q_lam|| <= 1,

        L^lam >= lam^2 + lambda1_m1 - C_p - C_e,

    with C_e = sup int sum |mu_e| dv and C_p = sup int sum r |vhat_phi mu_p| dv."""
    return math.sqrt(max(0.0, C_e + C_p - lambda1_m1))


@dataclass
class ScanResult:
    lambdas: np.ndarray
    kappas: np.ndarray
    verdicts: list
    lambda2: float
    bracket: tuple | None
    continuity: dict

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "kappa"])
            for lam, k in zip(self.lambdas, self.kappas):
                w.writerow([repr(float(lam)), repr(float(k))])


def continuity_report(lambdas, kappas, C_e: float) -> dict:
    """Compare jumps of kappa between neighbouring positive growth rates
    with the modulus lam^2 differences plus 2 C_e |log lam - log mu| scaled by
    the observed coupling; returns the largest ratio jump / modulus."""
    lam = np.asarray(lambdas, dtype=float)
    kap = np.asarray(kappas, dtype=float)
    pos = lam > 0
    lam, kap = lam[pos], kap[pos]
    if len(lam) < 2:
        return {"max_jump": 0.0, "max_ratio": 0.0}
    dk = np.abs(np.diff(kap) - np.diff(lam ** 2))
    modulus = 2.0 * np.abs(np.diff(np.log(lam)))
    ratio = dk / np.maximum(modulus, 1e-300)
    return {"max_jump": float(np.max(np.abs(np.diff(kap)))),
            "max_reduced_jump": float(dk.max()),
            "max_ratio": float(ratio.max()), "C_e": C_e,
            "consistent": bool(ratio.max() <= max(C_e, 1e-300) * 4.0)}


def lambda_scan(assembler: OperatorAssembler, lambdas, rel_tol: float = 1e-6) -> ScanResult:
    lambdas = np.asarray(sorted(set(float(l) for l in lambdas)))
    if lambdas[0] != 0:
        raise ValueError("a growth-rate scan must include lam = 0")
    mats = assembler.assemble(lambdas)
    verdicts = [smallest_eigenvalue(m.L, rel_tol) for m in mats]
    kappas = np.array([v.kappa for v in verdicts])
    consts = assembler.coupling_constants()
    lam2 = lambda2_bound(consts["C_e"], consts["C_p"], float(assembler.basis_A.eigenvalues[0]))
    bracket = None
    if kappas[0] < 0:
        for k in range(1, len(lambdas)):
            if kappas[k] > 0:
                bracket = (float(lambdas[k - 1]), float(lambdas[k]))
                break
    cont = continuity_report(lambdas, kappas, consts["C_e"])
    return ScanResult(lambdas, kappas, [v.verdict for v in verdicts], lam2, bracket, cont)
