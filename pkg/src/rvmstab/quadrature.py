"""Velocity-space quadrature rules.

Momenta use cylindrical components (v_r, v_phi, v_z). Both rules are
symmetric under v -> -v and under the reversal (v_r, v_z) -> (-v_r, -v_z), so
odd integrands cancel to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


def composite_gauss_legendre(a: float, b: float, n: int, panels: int = 1):
    """Nodes and weights of an n-point Gauss-Legendre rule on each of
    ``panels`` equal sub-intervals of [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass
class VelocityQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    v_max: float
    kind: str

    @classmethod
    def cartesian(cls, n: int = 24, v_max: float = 8.0, panels: int = 1):
        """Tensor Gauss-Legendre rule on the cube [-v_max, v_max]^3."""
        x, w = composite_gauss_legendre(-v_max, v_max, n, panels)
        vr, vp, vz = np.meshgrid(x, x, x, indexing="ij")
        wr, wp, wz = np.meshgrid(w, w, w, indexing="ij")
        nodes = np.column_stack([vr.ravel(), vp.ravel(), vz.ravel()])
        return cls(nodes, (wr * wp * wz).ravel(), v_max, "cartesian")

    @classmethod
    def spherical(cls, n_radial: int = 16, n_polar: int = 12, n_azimuth: int = 8,
                  v_max: float = 8.0, panels: int = 1):
        """Product rule on the ball |v| <= v_max with polar axis along e_phi.

        Radial nodes carry the |v|^2 Jacobian, the polar angle is integrated
        in cos(theta) = v_phi / |v| by Gauss-Legendre and the azimuth in the
        (v_r, v_z) plane by the midpoint rule with an even node count.
        """
        if n_azimuth % 2:
            raise ValueError("azimuthal node count must be even")
        s, ws = composite_gauss_legendre(0.0, v_max, n_radial, panels)
        c, wc = np.polynomial.legendre.leggauss(n_polar)
        psi = (np.arange(n_azimuth) + 0.5) * 2 * np.pi / n_azimuth
        wpsi = np.full(n_azimuth, 2 * np.pi / n_azimuth)
        S, C, P = np.meshgrid(s, c, psi, indexing="ij")
        W = (ws * s * s)[:, None, None] * wc[None, :, None] * wpsi[None, None, :]
        sin = np.sqrt(1.0 - C * C)
        nodes = np.column_stack([(S * sin * np.cos(P)).ravel(), (S * C).ravel(),
                                 (S * sin * np.sin(P)).ravel()])
        return cls(nodes, W.ravel(), v_max, "spherical")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.nodes, axis=1)

    @property
    def gamma_factor(self) -> np.ndarray:
        """<v> = sqrt(1 + |v|^2)."""
        return np.sqrt(1.0 + np.sum(self.nodes ** 2, axis=1))

    def volume(self) -> float:
        return float(np.sum(self.weights))

    def exact_volume(self) -> float:
        if self.kind == "cartesian":
            return (2 * self.v_max) ** 3
        return 4.0 / 3.0 * math.pi * self.v_max ** 3

    def symmetry_defect(self) -> float:
        """Largest mismatch between the rule and its images under v -> -v and
        (v_r, v_z) -> (-v_r, -v_z); zero for a symmetric rule."""
        key = np.round(self.nodes, 12)
        base = {tuple(k): w for k, w in zip(key, self.weights)}
        worst = 0.0
        for flip in (np.array([-1.0, -1.0, -1.0]), np.array([-1.0, 1.0, -1.0])):
            for k, w in zip(key * flip, self.weights):
                other = base.get(tuple(np.round(k, 12) + 0.0))
                worst = max(worst, abs(w) if other is None else abs(other - w))
        return worst

    def collapse(self):
        """Merge nodes sharing (|v|, v_phi); valid for integrands depending
        on the velocity only through <v> and v_phi."""
        key = np.round(np.column_stack([self.speed, self.nodes[:, 1]]), 12)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=self.weights)
        return uniq[:, 0], uniq[:, 1], w


def tail_speed(decay_rate: float, tol: float, power: float | None = None) -> float:
    """Speed V beyond which a radial tail carries a fraction <= tol.

    With ``power`` None the density decays like exp(-decay_rate |v|) and the
    relative tail is exp(-k V)(k^2 V^2 + 2 k V + 2)/2. Otherwise the density
    decays like |v|^-power and the tail fraction is ~ V^(3 - power).
    """
    if power is not None:
        if power <= 3:
            return math.inf
        return tol ** (-1.0 / (power - 3.0))
    k = decay_rate
    if k <= 0:
        return math.inf

    def frac(v):
        x = k * v
        return math.exp(-x) * (x * x + 2 * x + 2) / 2 - tol

    return brentq(frac, 0.0, 200.0 / k + 10.0)
