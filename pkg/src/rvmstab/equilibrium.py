"""Self-consistent equilibria: charge and current densities of the ansatz
and the Picard iteration for the coupled elliptic system

    -Delta phi0 = rho(phi0, A0),   (-Delta + 1/r^2) A0 = j(phi0, A0)

with homogeneous Dirichlet data on the boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad as adaptive_quad
from scipy.optimize import minimize_scalar

from .ansatz import EquilibriumAnsatz
from .elliptic import MeridianGrid, solve_helmholtz_m1, solve_poisson_dirichlet
from .errors import DivergenceError, InvariantViolation, MaxIterationsError, ParameterError
from .fields import EquilibriumFields
from .quadrature import VelocityQuadrature

log = logging.getLogger(__name__)


@dataclass
class DensityResult:
    rho: np.ndarray
    j_phi: np.ndarray
    tail_estimate: float
    warning: str | None = None


def default_quadrature(ansatz: EquilibriumAnsatz, b: float, tol: float = 1e-8,
                       v_cap: float = 60.0, n_radial: int = 24, n_polar: int = 24,
                       panels: int | None = None) -> VelocityQuadrature:
    """Density quadrature whose cutoff follows the tail of the ansatz.

    The cutoff is capped at ``v_cap``; power-law tails usually hit the cap,
    in which case the truncation is reported by :func:`densities`.
    """
    v_max = min(ansatz.tail_speed(tol, b), v_cap)
    v_max = max(v_max, 4.0)
    if panels is None:
        panels = max(2, int(math.ceil(v_max / 3.0)))
    return VelocityQuadrature.spherical(n_radial, n_polar, 2, v_max, panels)


def tail_fraction(ansatz: EquilibriumAnsatz, quad: VelocityQuadrature, b: float) -> float:
    """Estimated relative mass beyond the quadrature cutoff."""
    worst = 0.0
    for s in (1, -1):
        rate, power = ansatz.profile(s).speed_decay(b)
        V = quad.v_max
        if power is not None:
            worst = max(worst, V ** (3.0 - power) if power > 3 else 1.0)
        elif rate > 0:
            x = rate * V
            worst = max(worst, math.exp(-x) * (x * x + 2 * x + 2) / 2)
        else:
            worst = 1.0
    return worst


def densities(ansatz: EquilibriumAnsatz, r, phi, A, quad: VelocityQuadrature,
              chunk: int = 512, tail_tol: float = 1e-6) -> DensityResult:
    """Charge rho and current j_phi at points with radius r and potentials
    (phi, A). Uses that the integrand depends on v only via <v> and v_phi."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), r.shape)
    A = np.broadcast_to(np.asarray(A, dtype=float), r.shape)
    speed, vphi, w = quad.collapse()
    gam = np.sqrt(1.0 + speed * speed)
    vhat = vphi / gam
    rho = np.zeros(r.shape)
    jph = np.zeros(r.shape)
    for lo in range(0, r.size, chunk):
        sl = slice(lo, lo + chunk)
        rr, pp, aa = r[sl, None], phi[sl, None], A[sl, None]
        for s in (1, -1):
            mu = ansatz.mu(s, gam[None, :] + s * pp, rr * (vphi[None, :] + s * aa))
            rho[sl] += s * (mu @ w)
            jph[sl] += s * (mu @ (w * vhat))
    tail = tail_fraction(ansatz, quad, max(float(np.max(np.abs(r), initial=0.0)), 1.0))
    warning = None
    if tail > tail_tol:
        warning = "velocity cutoff %.3g leaves an estimated tail fraction %.2e" % (quad.v_max, tail)
    return DensityResult(rho, jph, tail, warning)


def charge_current_density(ansatz: EquilibriumAnsatz, fields: EquilibriumFields, x,
                           quad: VelocityQuadrature) -> DensityResult:
    """rho and j_phi at a single meridian point."""
    r, z = float(x[0]), float(x[1])
    fields.check_inside(r, z)
    res = densities(ansatz, [r], fields.phi(r, z), fields.A(r, z), quad)
    return DensityResult(float(res.rho[0]), float(res.j_phi[0]), res.tail_estimate, res.warning)


# a-priori constant ----------------------------------------------------------

def shifted_decay_ratio(gamma: float, shift: float = 0.5) -> float:
    """sup over t >= 1 of (1 + t^gamma) / (1 + (t - shift)^gamma)."""
    f = lambda t: -(1 + t ** gamma) / (1 + (t - shift) ** gamma)
    res = minimize_scalar(f, bounds=(1.0, 1.0 + 10 * gamma), method="bounded")
    return max(-f(1.0), -res.fun)


def decay_integral(gamma: float, zeta: float = 0.0) -> float:
    """int over R^3 of <v>^zeta / (1 + <v>^gamma) dv."""
    val, _ = adaptive_quad(lambda v: 4 * np.pi * v * v * (1 + v * v) ** (zeta / 2)
                           / (1 + (1 + v * v) ** (gamma / 2)), 0, np.inf, limit=200)
    return val


def estimate_C0(grid: MeridianGrid, gamma: float, safety: float = 2.0) -> dict:
    """Numerical stand-in for the elliptic a-priori constant C0.

    The Picard map T(phi, A) has sup-norm Lipschitz constant at most
    C0 C_mu K on the ball ||phi||, ||A|| <= 1/2, where

        C0 = 4 max(1, b) c_gamma I_gamma max(||P^-1||, ||M^-1||)

    with P, M the discrete Poisson and m=1 operators, I_gamma the velocity
    integral of 1/(1 + <v>^gamma) and c_gamma bounding the effect of the
    energy shift by |phi| <= 1/2. ``safety`` multiplies the result.
    """
    b = grid.domain.b
    sp = grid.sup_norm_of_inverse("poisson")
    sm = grid.sup_norm_of_inverse("m1")
    c_gamma = shifted_decay_ratio(gamma)
    i_gamma = decay_integral(gamma)
    c0 = safety * 4.0 * max(1.0, b) * c_gamma * i_gamma * max(sp, sm)
    return {"C0": c0, "sup_inverse_poisson": sp, "sup_inverse_m1": sm,
            "c_gamma": c_gamma, "I_gamma": i_gamma, "safety": safety}


# fixed point --------------------------------------------------------------------

@dataclass
class FixedPointResult:
    fields: EquilibriumFields
    iterations: int
    contraction_estimate: float
    ratios: list
    differences: list
    C0: dict
    gate: dict
    tail_estimate: float
    warnings: list = field(default_factory=list)

    def report(self) -> dict:
        phi_sup, A_sup = self.fields.sup_norms()
        return {"iterations": self.iterations, "contraction_estimate": self.contraction_estimate,
                "ratios": self.ratios, "differences": self.differences, "C0": self.C0,
                "gate": self.gate, "phi_sup": phi_sup, "A_sup": A_sup,
                "tail_estimate": self.tail_estimate, "warnings": self.warnings}


def smallness_gate(C_mu: float, K: float, C0: float, gamma: float, b: float) -> dict:
    limit = min(1.0 / (2.0 * C0), gamma / (16.0 * math.pi * b))
    return {"C_mu_K": C_mu * K, "limit": limit, "passed": C_mu * K <= limit}


def fixed_point_equilibrium(ansatz: EquilibriumAnsatz, grid: MeridianGrid, tol: float = 1e-10,
                            max_iter: int = 100, quad: VelocityQuadrature | None = None,
                            relaxation: float = 1.0, order: int = 5,
                            require_gate: bool = False, stall: int = 3) -> FixedPointResult:
    """Picard iteration from (phi, A) = (0, 0) until the sup-norm update is
    below ``tol``. ``relaxation`` in (0, 1] damps the update."""
    if not 0 < relaxation <= 1:
        raise ParameterError("relaxation must lie in (0, 1]", "0 < omega <= 1")
    b = grid.domain.b
    K = ansatz.scaled.K if ansatz.scaled else 1.0
    if ansatz.scaled is not None and ansatz.scaled.base_C_mu is not None:
        # the gate is stated for the decay constant of the unscaled profile
        C_mu = ansatz.scaled.base_C_mu
    else:
        C_mu = ansatz.resolved_C_mu(b)
    c0 = estimate_C0(grid, ansatz.gamma)
    gate = smallness_gate(C_mu, K, c0["C0"], ansatz.gamma, b)
    if require_gate and not gate["passed"]:
        raise ParameterError("smallness gate C_mu K <= %.3e violated (C_mu K = %.3e)"
                             % (gate["limit"], gate["C_mu_K"]), "C_mu K <= min(1/(2 C0), gamma/(16 pi b))")
    quad = quad or default_quadrature(ansatz, b)
    r = grid.r_interior
    phi = np.zeros(grid.n_interior)
    A = np.zeros(grid.n_interior)
    diffs, ratios, warnings = [], [], []
    tail = 0.0
    for it in range(1, max_iter + 1):
        dens = densities(ansatz, r, phi, A, quad)
        tail = dens.tail_estimate
        if dens.warning and dens.warning not in warnings:
            warnings.append(dens.warning)
        if not (np.all(np.isfinite(dens.rho)) and np.all(np.isfinite(dens.j_phi))):
            raise DivergenceError("densities overflowed at iteration %d" % it, ratios)
        phi_new = grid.solve(dens.rho, "poisson")
        A_new = grid.solve(dens.j_phi, "m1")
        phi_new = phi + relaxation * (phi_new - phi)
        A_new = A + relaxation * (A_new - A)
        diff = max(float(np.max(np.abs(phi_new - phi))), float(np.max(np.abs(A_new - A))))
        if diffs and diffs[-1] > 0:
            ratios.append(diff / diffs[-1])
        diffs.append(diff)
        phi, A = phi_new, A_new
        log.debug("picard iteration %d: update %.3e", it, diff)
        if diff <= tol:
            break
        if len(ratios) >= stall and all(q >= 1.0 for q in ratios[-stall:]):
            raise DivergenceError("Picard iteration is not contracting", ratios)
    else:
        raise MaxIterationsError("no convergence in %d iterations (last update %.3e)"
                                 % (max_iter, diffs[-1]))
    fields = EquilibriumFields(grid, phi, A, order=order)
    phi_sup, A_sup = fields.sup_norms()
    if phi_sup > 0.5 or A_sup > 0.5:
        raise ParameterError("fixed point leaves the ball ||phi||, ||A|| <= 1/2 "
                             "(%.3g, %.3g)" % (phi_sup, A_sup), "||phi||, ||A|| <= 1/2")
    contraction = max(ratios) if ratios else 0.0
    result = FixedPointResult(fields, it, contraction, ratios, diffs, c0, gate, tail, warnings)
    fields.meta["fixed_point"] = result.report()
    return result


@dataclass
class SupCheck:
    phi_sup: float
    A_sup: float
    bound: float
    ok: bool

    @property
    def slack(self) -> float:
        worst = max(self.phi_sup, self.A_sup)
        return math.inf if worst == 0 else self.bound / worst


def potential_sup_check(fields: EquilibriumFields, C_mu: float, K: float, delta: float, b: float,
                        raise_on_violation: bool = False) -> SupCheck:
    """Compare sup norms of both potentials with 20 pi b^2 C_mu / K^delta."""
    phi_sup, A_sup = fields.sup_norms()
    bound = 20.0 * math.pi * b * b * C_mu / K ** delta
    ok = phi_sup <= bound and A_sup <= bound
    if not ok and raise_on_violation:
        raise InvariantViolation("potential bound violated: sup|phi| = %.3e, sup|A| = %.3e, "
                                 "bound %.3e" % (phi_sup, A_sup, bound))
    return SupCheck(phi_sup, A_sup, bound, ok)
