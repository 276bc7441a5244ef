"""Finite-difference elliptic operators on the meridian plane.

Unknowns live at the centres of a uniform square-cell grid covering the
bounding box of the cross-section. Nodes where the level set is negative are
interior. The axisymmetric Laplacian is written in conservative form,

    -(1/r) d/dr (r du/dr) - d2u/dz2,

and Dirichlet data on the curved boundary enter through a ghost value that
makes the linear interpolant vanish at the boundary crossing. Multiplying a
row by the volume weight 2 pi r h^2 gives a symmetric matrix, so the discrete
operator is self-adjoint in the weighted inner product.

The ``m1`` operator adds 1/r^2. It is the meridian form of -Delta acting on
g(r, z) e^{i phi}; regularity at the axis comes from the 1/r^2 term and the
vanishing face coefficient at r = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .geometry import Domain

KINDS = ("poisson", "m1")


class MeridianGrid:
    """Cell-centred grid with an interior mask.

    ``n`` is the number of cells across the larger of the two extents. The
    box is padded by ``pad`` cells on every side; when the domain comes
    within ``pad`` cells of the axis the box starts exactly at r = 0.
    """

    def __init__(self, domain: Domain, n: int = 48, pad: int = 4):
        if n < 4:
            raise ValueError("grid needs at least 4 cells across")
        self.domain = domain
        self.n = int(n)
        self.pad = int(pad)
        h = max(domain.L1, domain.L2) / n
        self.h = h
        r_lo = domain.r_min - pad * h
        self.on_axis = domain.touches_axis or r_lo <= 0.5 * h
        if self.on_axis:
            r_lo = 0.0
        nr = int(math.ceil((domain.b + pad * h - r_lo) / h))
        z_lo = domain.z_min - pad * h
        nz = int(math.ceil((domain.z_max + pad * h - z_lo) / h))
        self.r = r_lo + (np.arange(nr) + 0.5) * h
        self.z = z_lo + (np.arange(nz) + 0.5) * h
        self.r_lo, self.z_lo = r_lo, z_lo
        self.shape = (nr, nz)
        R, Z = np.meshgrid(self.r, self.z, indexing="ij")
        self.R, self.Z = R, Z
        self.phi_ls = domain.levelset(R, Z)
        self.mask = self.phi_ls < 0
        self.index = -np.ones(self.shape, dtype=np.int64)
        self.interior = np.argwhere(self.mask)
        self.index[self.mask] = np.arange(len(self.interior))
        self.n_interior = len(self.interior)
        if self.n_interior < 4:
            raise SolverError("grid too coarse: fewer than 4 interior nodes")
        self.weights = 2.0 * np.pi * R[self.mask] * h * h
        self._factor_cache: dict = {}

    # grid functions ----------------------------------------------------
    def to_full(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.mask] = values
        return out

    def to_interior(self, full: np.ndarray) -> np.ndarray:
        full = np.asarray(full, dtype=float)
        if full.shape == self.shape:
            return full[self.mask]
        if full.shape == (self.n_interior,):
            return full
        raise ValueError("grid function has shape %s" % (full.shape,))

    def inner(self, u, v) -> float:
        """Discrete L2 inner product with the axisymmetric volume weight."""
        return float(np.sum(self.weights * self.to_interior(u) * self.to_interior(v)))

    def l2norm(self, u) -> float:
        return math.sqrt(self.inner(u, u))

    @property
    def r_interior(self) -> np.ndarray:
        return self.R[self.mask]

    @property
    def z_interior(self) -> np.ndarray:
        return self.Z[self.mask]

    def describe(self) -> dict:
        return {"h": self.h, "n": self.n, "pad": self.pad, "shape": list(self.shape),
                "r_lo": self.r_lo, "z_lo": self.z_lo, "on_axis": self.on_axis,
                "n_interior": self.n_interior}

    # boundary crossings -----------------------------------------------
    @cached_property
    def _crossings(self):
        """For each interior node and direction, the fraction theta of a cell
        at which the level set changes sign (1 when the neighbour is inside).

        Directions are ordered (-r, +r, -z, +z).
        """
        theta = np.ones((self.n_interior, 4))
        nr, nz = self.shape
        steps = ((-1, 0), (1, 0), (0, -1), (0, 1))
        ii, jj = self.interior[:, 0], self.interior[:, 1]
        for d, (di, dj) in enumerate(steps):
            ni, nj = ii + di, jj + dj
            outside_box = (ni < 0) | (ni >= nr) | (nj < 0) | (nj >= nz)
            inside = np.zeros(len(ii), dtype=bool)
            ok = ~outside_box
            inside[ok] = self.mask[ni[ok], nj[ok]]
            need = ~inside
            if d == 0 and self.on_axis:
                # the face at r = 0 carries no flux; nothing to cut
                need &= ii > 0
            idx = np.flatnonzero(need)
            if idx.size == 0:
                continue
            r0, z0 = self.R[ii[idx], jj[idx]], self.Z[ii[idx], jj[idx]]
            r1, z1 = r0 + di * self.h, z0 + dj * self.h
            lo, hi = np.zeros(idx.size), np.ones(idx.size)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                f = self.domain.levelset(r0 + mid * (r1 - r0), z0 + mid * (z1 - z0))
                inside_mid = f < 0
                lo = np.where(inside_mid, mid, lo)
                hi = np.where(inside_mid, hi, mid)
            theta[idx, d] = np.maximum(0.5 * (lo + hi), 1e-6)
        return theta

    # operators ----------------------------------------------------------
    def operator(self, kind: str = "poisson", shift: float = 0.0) -> sp.csr_matrix:
        """Sparse matrix of -Delta (``poisson``) or -Delta + 1/r^2 (``m1``)
        plus ``shift`` times the identity, acting on interior values."""
        if kind not in KINDS:
            raise ValueError("unknown operator kind %r" % kind)
        key = ("op", kind, float(shift))
        if key in self._factor_cache:
            return self._factor_cache[key]
        h2 = self.h * self.h
        ii, jj = self.interior[:, 0], self.interior[:, 1]
        r = self.R[ii, jj]
        theta = self._crossings
        nr, nz = self.shape
        rows, cols, vals = [], [], []
        diag = np.full(self.n_interior, float(shift))
        if kind == "m1":
            diag += 1.0 / (r * r)
        faces = (
            (-1, 0, np.maximum(r - 0.5 * self.h, 0.0) / (r * h2)),
            (1, 0, (r + 0.5 * self.h) / (r * h2)),
            (0, -1, np.full_like(r, 1.0 / h2)),
            (0, 1, np.full_like(r, 1.0 / h2)),
        )
        me = np.arange(self.n_interior)
        for d, (di, dj, c) in enumerate(faces):
            ni, nj = ii + di, jj + dj
            valid = (ni >= 0) & (ni < nr) & (nj >= 0) & (nj < nz)
            nb = -np.ones_like(ii)
            nb[valid] = self.index[ni[valid], nj[valid]]
            inside = nb >= 0
            diag += np.where(inside, c, c / theta[:, d])
            rows.append(me[inside])
            cols.append(nb[inside])
            vals.append(-c[inside])
        rows.append(me)
        cols.append(me)
        vals.append(diag)
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(self.n_interior, self.n_interior))
        self._factor_cache[key] = mat
        return mat

    def symmetric_operator(self, kind: str = "poisson", shift: float = 0.0) -> sp.csr_matrix:
        """Weighted form W A, symmetric up to rounding (made exact here)."""
        wa = sp.diags(self.weights) @ self.operator(kind, shift)
        return ((wa + wa.T) * 0.5).tocsr()

    def factor(self, kind: str = "poisson", shift: float = 0.0):
        key = ("lu", kind, float(shift))
        lu = self._factor_cache.get(key)
        if lu is None:
            try:
                lu = spla.splu(self.operator(kind, shift).tocsc())
            except RuntimeError as exc:
                raise SolverError("factorisation failed: %s" % exc) from exc
            self._factor_cache[key] = lu
        return lu

    def solve(self, rhs, kind: str = "poisson", shift: float = 0.0, rtol: float = 1e-10):
        """Solve the Dirichlet problem; returns interior values."""
        b = self.to_interior(rhs)
        if not np.all(np.isfinite(b)):
            raise SolverError("right-hand side is not finite")
        lu = self.factor(kind, shift)
        u = lu.solve(b)
        op = self.operator(kind, shift)
        res = np.linalg.norm(op @ u - b)
        bnorm = np.linalg.norm(b)
        if bnorm > 0 and res > rtol * bnorm:
            # one step of iterative refinement before giving up
            u += lu.solve(b - op @ u)
            res = np.linalg.norm(op @ u - b)
            if res > rtol * bnorm:
                raise SolverError("residual %.3e exceeds %.1e * ||rhs||" % (res, rtol),
                                  condition_estimate=self.condition_estimate(kind, shift))
        self.last_residual = res / bnorm if bnorm > 0 else 0.0
        return u

    def condition_estimate(self, kind: str = "poisson", shift: float = 0.0) -> float:
        op = self.operator(kind, shift).tocsc()
        lu = self.factor(kind, shift)
        inv = spla.LinearOperator(op.shape, matvec=lu.solve,
                                  rmatvec=lambda x: lu.solve(x, trans="T"))
        return float(spla.onenormest(op) * spla.onenormest(inv))

    def sup_norm_of_inverse(self, kind: str = "poisson", shift: float = 0.0) -> float:
        """||A^{-1}||_inf. The matrix is an M-matrix, so its inverse is
        entrywise non-negative and the norm is max(A^{-1} 1)."""
        return float(np.max(self.factor(kind, shift).solve(np.ones(self.n_interior))))

    def eigenpairs(self, kind: str = "poisson", count: int = 16):
        """Lowest ``count`` Dirichlet eigenpairs, eigenvectors orthonormal in
        the weighted inner product. Returns (values, vectors[n_interior, count])."""
        if count > self.n_interior:
            raise SolverError("requested %d eigenpairs but only %d interior nodes"
                              % (count, self.n_interior))
        key = ("eig", kind, count)
        if key in self._factor_cache:
            return self._factor_cache[key]
        sw = np.sqrt(self.weights)
        sym = self.symmetric_operator(kind)
        scaled = sp.diags(1.0 / sw) @ sym @ sp.diags(1.0 / sw)
        scaled = ((scaled + scaled.T) * 0.5).tocsc()
        if self.n_interior <= 2500:
            vals, vecs = scipy.linalg.eigh(scaled.toarray(), subset_by_index=[0, count - 1])
        else:
            try:
                vals, vecs = spla.eigsh(scaled, k=count, sigma=0.0, which="LM", tol=1e-13)
            except spla.ArpackError as exc:
                raise SolverError("eigensolver failed: %s" % exc) from exc
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            resid = np.linalg.norm(scaled @ vecs - vecs * vals, axis=0)
            if np.max(resid) > 1e-8 * max(1.0, np.max(np.abs(vals))):
                raise SolverError("eigenpair residuals too large: %s" % resid)
        vecs = vecs / sw[:, None]
        # deterministic signs: largest entry positive
        pick = np.argmax(np.abs(vecs), axis=0)
        vecs *= np.sign(vecs[pick, np.arange(count)])
        result = (vals, vecs)
        self._factor_cache[key] = result
        return result


def solve_poisson_dirichlet(grid: MeridianGrid, rhs) -> np.ndarray:
    """Solve -Delta u = rhs with u = 0 on the boundary; full-grid result."""
    return grid.to_full(grid.solve(rhs, "poisson"))


def solve_helmholtz_m1(grid: MeridianGrid, rhs, lambda_sq: float = 0.0) -> np.ndarray:
    """Solve (lambda^2 - Delta + 1/r^2) u = rhs with u = 0 on the boundary."""
    if lambda_sq < 0:
        raise ValueError("lambda_sq must be non-negative")
    return grid.to_full(grid.solve(rhs, "m1", shift=lambda_sq))


@dataclass
class BasisSet:
    """Orthonormal Dirichlet eigenfunctions on a grid.

    ``functions`` has shape (n_interior, N); columns are orthonormal in the
    weighted L2 inner product. ``kind`` is ``laplacian-dirichlet`` or
    ``m1-dirichlet``.
    """

    kind: str
    grid: MeridianGrid
    functions: np.ndarray
    eigenvalues: np.ndarray

    @property
    def size(self) -> int:
        return self.functions.shape[1]

    def full(self) -> np.ndarray:
        """Functions on the whole box grid, zero outside, shape (nr*nz, N)."""
        out = np.zeros((self.grid.shape[0] * self.grid.shape[1], self.size))
        out[self.grid.index.ravel() >= 0] = self.functions[
            self.grid.index.ravel()[self.grid.index.ravel() >= 0]]
        return out

    def gram(self) -> np.ndarray:
        f = self.functions
        return f.T @ (self.grid.weights[:, None] * f)

    def truncated(self, n: int) -> "BasisSet":
        return BasisSet(self.kind, self.grid, self.functions[:, :n], self.eigenvalues[:n])

    def synthesize(self, coeffs) -> np.ndarray:
        return self.functions @ np.asarray(coeffs, dtype=float)
