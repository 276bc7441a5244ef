"""Closed-form stability and instability tests.

Stable side: for p mu_p <= 0 the equilibrium is stable when

    (i)  sup |A0| r (2 + 2^g |phi0|^g) <= C(g) / (C_mu c_P)
    (ii) sup |A0| r^3 (2 + 2^g |phi0|^g) <= 1 / (2 C_mu)

with C(g) = (8 pi/3 + 4 pi^2/g)^-1 and c_P the squared Poincare constant.

Unstable side: for the scaled family K^-delta mu(e, K p) the form
<L h, h> of a normalised test function h is bounded above by

    1 - H1 C1 C_nu C'_mu K^(1-delta-eps)
      + 120 2^g pi^2 b^2 (H1 + H2) C_mu^2 K^(1-2 delta)
      + 2^g H2 C2 C_mu K^-delta + 256 pi^2 c_P C_mu^2 H2 K^(-2 delta)

with C1 = 2^(-1-eps/2) b^-eps and C2 = 8 pi/3 + 4 pi^2/(g-1); a negative
value predicts instability.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.integrate import quad as adaptive_quad

from . import __version__
from .ansatz import EquilibriumAnsatz, scale_ansatz
from .elliptic import BasisSet, MeridianGrid
from .equilibrium import decay_integral, estimate_C0, smallness_gate
from .errors import ParameterError, SolverError
from .fields import EquilibriumFields, _json_default
from .geometry import Domain, poincare_upper_bound


# --------------------------------------------------------------------------
# constants

def C_gamma(gamma: float) -> float:
    return 1.0 / (8.0 * math.pi / 3.0 + 4.0 * math.pi ** 2 / gamma)


def C_gamma_integral(gamma: float) -> float:
    """(2 int <v>^-1 (1 + <v>^g)^-1 dv)^-1, which C(g) must not exceed."""
    return 1.0 / (2.0 * decay_integral(gamma, zeta=-1.0))


def C1(epsilon: float, b: float) -> float:
    return 2.0 ** (-1.0 - epsilon / 2.0) * b ** (-epsilon)


def C2(gamma: float) -> float:
    return 8.0 * math.pi / 3.0 + 4.0 * math.pi ** 2 / (gamma - 1.0)


@dataclass
class CriteriaConstants:
    gamma: float
    C_gamma: float
    C1: float | None
    C2: float
    c_P: float
    b: float
    L1: float
    L2: float
    epsilon: float | None = None
    c_P_source: str = "bound"

    def check(self) -> dict:
        integral = C_gamma_integral(self.gamma)
        return {"C_gamma": self.C_gamma, "C_gamma_integral": integral,
                "C_gamma_ok": self.C_gamma <= integral,
                "positive": all(v > 0 for v in (self.C_gamma, self.C2, self.c_P)
                                ) and (self.C1 is None or self.C1 > 0)}


def criteria_constants(domain: Domain, gamma: float, epsilon: float | None = None,
                       grid: MeridianGrid | None = None) -> CriteriaConstants:
    """Constants for a domain. With a grid, c_P is the discrete value
    1/lambda_1(-Delta); otherwise the geometric upper bound."""
    if grid is not None:
        lam1 = float(grid.eigenpairs("poisson", 1)[0][0])
        c_P, source = 1.0 / lam1, "discrete"
    else:
        c_P, source = poincare_upper_bound(domain).value, "bound"
    c1 = C1(epsilon, domain.b) if epsilon is not None else None
    return CriteriaConstants(gamma, C_gamma(gamma), c1, C2(gamma), c_P, domain.b,
                             domain.L1, domain.L2, epsilon, source)


# --------------------------------------------------------------------------
# integral bound

@dataclass
class IntegralBound:
    factor: float
    lhs_plus: float
    lhs_minus: float
    rhs: float
    safe_factor: float = math.inf

    @property
    def ratio(self) -> float:
        return max(self.lhs_plus, self.lhs_minus) / self.rhs

    @property
    def holds(self) -> bool:
        return self.ratio <= self.factor

    @property
    def holds_safe(self) -> bool:
        return self.ratio <= self.safe_factor


def _radial_integral(fn, kinks=()) -> float:
    """4 pi int_0^inf s^2 fn(<s>) ds, split at the given speeds."""
    edges = [0.0] + sorted(k for k in kinks if k > 0) + [math.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = adaptive_quad(lambda s: 4 * math.pi * s * s * fn(math.sqrt(1 + s * s)), a, b,
                               limit=400, epsabs=0.0, epsrel=1e-11)
        total += val
    return total


def integral_bound_factor(phi0: float, gamma: float, zeta: float) -> IntegralBound:
    """Both sides of

        int <v>^z / (1 + |<v> +- phi0|^g) dv <= (2 + 2^g |phi0|^g) int <v>^z / (1 + <v>^g) dv

    by adaptive quadrature.

    The factor 2 + 2^g |phi0|^g is not a valid bound for every phi0: where
    |<v> +- phi0| > <v>/2 the pointwise ratio can reach 2^g, and for
    0.3 <~ |phi0| <~ 0.6 the integrals exceed it. ``safe_factor`` is
    max(2^g, 1 + 2^g |phi0|^g), which bounds the integrand pointwise.
    """
    if zeta > 1:
        raise ParameterError("zeta must not exceed 1", "zeta <= 1")
    phi0 = float(phi0)
    factor = 2.0 + 2.0 ** gamma * abs(phi0) ** gamma
    kink = math.sqrt(phi0 * phi0 - 1.0) if abs(phi0) > 1 else 0.0
    plus = _radial_integral(lambda g: g ** zeta / (1 + abs(g + phi0) ** gamma), (kink,))
    minus = _radial_integral(lambda g: g ** zeta / (1 + abs(g - phi0) ** gamma), (kink,))
    rhs = _radial_integral(lambda g: g ** zeta / (1 + g ** gamma))
    safe = max(2.0 ** gamma, 1.0 + 2.0 ** gamma * abs(phi0) ** gamma)
    return IntegralBound(factor, plus, minus, rhs, safe)


# --------------------------------------------------------------------------
# stable side

@dataclass
class CriterionResult:
    name: str
    verdict: str                 # pass | fail | inapplicable
    lhs: float
    rhs: float
    details: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """rhs / lhs; above one means the inequality holds."""
        if self.lhs == 0:
            return math.inf
        return self.rhs / self.lhs

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _sup_samples(fields: EquilibriumFields):
    """Field values on interior grid nodes and on the cell midpoints between
    them; returns (r, phi, A) for both sets."""
    grid = fields.grid
    r_nodes = grid.r_interior
    z_nodes = grid.z_interior
    rm = np.concatenate([r_nodes + 0.5 * grid.h, r_nodes])
    zm = np.concatenate([z_nodes, z_nodes + 0.5 * grid.h])
    rm2 = r_nodes + 0.5 * grid.h
    zm2 = z_nodes + 0.5 * grid.h
    rm = np.concatenate([rm, rm2])
    zm = np.concatenate([zm, zm2])
    inside = grid.domain.levelset(rm, zm) < 0
    rm, zm = rm[inside], zm[inside]
    out = []
    for r, z in ((r_nodes, z_nodes), (rm, zm)):
        out.append((r, np.asarray(fields.phi(r, z)), np.asarray(fields.A(r, z))))
    return out


def _sup_with_refinement(fields, fn) -> tuple[float, dict]:
    (rn, pn, an), (rm, pm, am) = _sup_samples(fields)
    nodes = float(np.max(fn(rn, pn, an), initial=0.0))
    mids = float(np.max(fn(rm, pm, am), initial=0.0)) if len(rm) else 0.0
    sup = max(nodes, mids)
    rel = 0.0 if sup == 0 else (sup - nodes) / sup
    return sup, {"sup_nodes": nodes, "sup_midpoints": mids, "refinement_change": rel}


def _weight(g: float, factor: str):
    """Pointwise factor bounding the shifted decay integrals."""
    if factor == "stated":
        return lambda p: 2 + 2 ** g * np.abs(p) ** g
    if factor == "safe":
        return lambda p: np.maximum(2 ** g, 1 + 2 ** g * np.abs(p) ** g)
    raise ValueError("factor must be 'stated' or 'safe'")


def _precondition(ansatz: EquilibriumAnsatz, b: float) -> tuple[bool, float]:
    worst = ansatz.p_mu_p_max(b)
    scale = ansatz.resolved_C_mu(b)
    return worst <= 1e-12 * max(scale, 1e-300), worst


def check_stable_i(fields: EquilibriumFields, ansatz: EquilibriumAnsatz,
                   constants: CriteriaConstants, factor: str = "stated") -> CriterionResult:
    b = constants.b
    ok, worst = _precondition(ansatz, b)
    C_mu = ansatz.resolved_C_mu(b)
    g = ansatz.gamma
    w = _weight(g, factor)
    lhs, info = _sup_with_refinement(fields, lambda r, p, a: np.abs(a) * r * w(p))
    rhs = math.inf if C_mu == 0 else constants.C_gamma / (C_mu * constants.c_P)
    info.update({"C_mu": C_mu, "c_P": constants.c_P, "c_P_source": constants.c_P_source,
                 "p_mu_p_max": worst, "factor": factor})
    if not ok:
        return CriterionResult("stable_i", "inapplicable", lhs, rhs, info)
    return CriterionResult("stable_i", "pass" if lhs <= rhs else "fail", lhs, rhs, info)


def check_stable_ii(fields: EquilibriumFields, ansatz: EquilibriumAnsatz,
                    constants: CriteriaConstants, factor: str = "stated") -> CriterionResult:
    b = constants.b
    ok, worst = _precondition(ansatz, b)
    C_mu = ansatz.resolved_C_mu(b)
    g = ansatz.gamma
    w = _weight(g, factor)
    lhs, info = _sup_with_refinement(fields, lambda r, p, a: np.abs(a) * r ** 3 * w(p))
    rhs = math.inf if C_mu == 0 else 0.5 / C_mu
    info.update({"C_mu": C_mu, "p_mu_p_max": worst, "factor": factor})
    if not ok:
        return CriterionResult("stable_ii", "inapplicable", lhs, rhs, info)
    return CriterionResult("stable_ii", "pass" if lhs <= rhs else "fail", lhs, rhs, info)


def stable_verdict(results) -> str:
    """Either condition suffices."""
    if any(r.verdict == "pass" for r in results):
        return "stable"
    if all(r.verdict == "inapplicable" for r in results):
        return "inapplicable"
    return "undecided"


def check_geometric_form(domain: Domain, fields: EquilibriumFields, ansatz: EquilibriumAnsatz,
                         variant: str = "corrected", factor: str = "stated") -> CriterionResult:
    """Condition (i) with the Poincare constant replaced by its geometric bound:

        sup|A0| sup r (2 + 2^g |phi0|^g) <= C(g) / (C_mu c_P_bound)

    ``variant="printed"`` uses the bound max{pi^2 (L1^2 + L2^2) / (b L1^2 L2^2), 1/L1}
    for 1/c_P; the default uses the corrected bound (see
    :func:`poincare_upper_bound`). ``factor="safe"`` in this and the two
    direct checks replaces 2 + 2^g |phi0|^g by the valid pointwise factor
    of :func:`integral_bound_factor`."""
    b = domain.b
    ok, worst = _precondition(ansatz, b)
    C_mu = ansatz.resolved_C_mu(b)
    g = ansatz.gamma
    bound = poincare_upper_bound(domain, variant)
    planar_inv = 1.0 / bound.planar_branch
    axial_inv = 1.0 / bound.axial_branch
    branch = "planar" if planar_inv >= axial_inv else "axial"
    a_sup, _ = _sup_with_refinement(fields, lambda r, p, a: np.abs(a))
    w = _weight(g, factor)
    w_sup, _ = _sup_with_refinement(fields, lambda r, p, a: r * w(p))
    lhs = a_sup * w_sup
    rhs = math.inf if C_mu == 0 else C_gamma(g) * max(planar_inv, axial_inv) / C_mu
    info = {"branch": branch, "planar_inverse": planar_inv, "axial_inverse": axial_inv,
            "variant": variant, "factor": factor, "C_mu": C_mu, "p_mu_p_max": worst}
    if not ok:
        return CriterionResult("geometric", "inapplicable", lhs, rhs, info)
    return CriterionResult("geometric", "pass" if lhs <= rhs else "fail", lhs, rhs, info)


# --------------------------------------------------------------------------
# unstable side

@dataclass
class UnstableCheckInputs:
    H1: float
    H2: float
    K: float
    delta: float
    epsilon: float
    C_mu: float
    C_mu_prime: float
    C_nu: float = 1.0
    coeffs: np.ndarray | None = None
    normalization_error: float = 0.0


@dataclass
class UnstableVerdict:
    value: float
    terms: dict
    verdict: str                 # unstable-predicted | no-prediction
    form: str


def _check_exponents(delta: float, epsilon: float):
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ParameterError("delta and epsilon must lie in (0, 1)", "0 < eps, delta < 1")
    if not delta > epsilon:
        raise ParameterError("delta must exceed epsilon", "delta > epsilon")
    if not delta + epsilon < 1:
        raise ParameterError("delta + epsilon must be below 1", "delta + epsilon < 1")


def check_unstable_inequality(inputs: UnstableCheckInputs, constants: CriteriaConstants,
                              form: str = "derived") -> UnstableVerdict:
    """Evaluate the five-term instability bound.

    ``form="derived"`` keeps C_nu in the leading negative term, as the bound
    on <L h, h> requires; ``form="printed"`` drops it.
    """
    if constants.b <= 1:
        raise ParameterError("instability test needs sup r > 1", "b > 1")
    K, d, e = inputs.K, inputs.delta, inputs.epsilon
    _check_exponents(d, e)
    if K < 1:
        raise ParameterError("K must be >= 1", "K >= 1")
    if inputs.H1 < 0:
        raise ParameterError("H1 must be non-negative", "H1 >= 0")
    if inputs.normalization_error > 1e-8:
        raise ParameterError("test function is not normalised (error %.2e)"
                             % inputs.normalization_error, "normalisation")
    if form not in ("derived", "printed"):
        raise ValueError("form must be 'derived' or 'printed'")
    g = constants.gamma
    b = constants.b
    c1 = constants.C1 if constants.C1 is not None else C1(e, b)
    C_mu = inputs.C_mu
    nu = inputs.C_nu if form == "derived" else 1.0
    terms = {
        "one": 1.0,
        "angular": -inputs.H1 * c1 * nu * inputs.C_mu_prime * K ** (1 - d - e),
        "potential": 120 * 2 ** g * math.pi ** 2 * b ** 2 * (inputs.H1 + inputs.H2)
                     * C_mu ** 2 * K ** (1 - 2 * d),
        "projection": 2 ** g * inputs.H2 * constants.C2 * C_mu * K ** (-d),
        "schur": 256 * math.pi ** 2 * constants.c_P * C_mu ** 2 * inputs.H2 * K ** (-2 * d),
    }
    value = math.fsum(terms.values())
    return UnstableVerdict(value, terms, "unstable-predicted" if value < 0 else "no-prediction", form)


def normalize_test_function(basis_A: BasisSet, coeffs) -> tuple[np.ndarray, float, float, float]:
    """Scale coefficients so that int |grad h|^2 + h^2/r^2 = 1; returns
    (coeffs, H1, H2, normalization error)."""
    c = np.asarray(coeffs, dtype=float)
    lam = basis_A.eigenvalues[: len(c)]
    energy = float(np.sum(lam * c * c))
    if energy <= 0:
        raise ParameterError("test function vanishes", "h != 0")
    c = c / math.sqrt(energy)
    grid = basis_A.grid
    h = basis_A.functions[:, : len(c)] @ c
    r = grid.r_interior
    H2 = float(np.sum(grid.weights * h * h))
    H1 = float(np.sum(np.where(r >= 1.0, grid.weights * r * h * h, 0.0)))
    err = abs(float(np.sum(lam * c * c)) - 1.0)
    return c, H1, H2, err


def outer_ground_state(grid: MeridianGrid) -> np.ndarray:
    """Lowest eigenfunction of -Delta + 1/r^2 restricted to {r >= 1}, zero
    elsewhere, as interior grid values."""
    sel = np.flatnonzero(grid.r_interior >= 1.0)
    if len(sel) < 4:
        raise ParameterError("too few grid nodes with r >= 1", "b > 1")
    S = grid.symmetric_operator("m1").tocsr()[sel][:, sel].toarray()
    W = grid.weights[sel]
    vals, vecs = scipy.linalg.eigh(S, np.diag(W), subset_by_index=[0, 0])
    h = np.zeros(grid.n_interior)
    h[sel] = vecs[:, 0] * np.sign(vecs[np.argmax(np.abs(vecs[:, 0])), 0])
    return h


def max_H1(grid: MeridianGrid) -> float:
    """Largest int_{r>=1} r h^2 over grid functions with unit energy
    int |grad h|^2 + h^2/r^2; a ceiling for any normalised test function."""
    S = grid.symmetric_operator("m1").toarray()
    D = np.where(grid.r_interior >= 1.0, grid.weights * grid.r_interior, 0.0)
    n = grid.n_interior
    vals = scipy.linalg.eigh(np.diag(D), S, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(vals[0])


@dataclass
class UnstableSelection:
    K: float
    C_mu: float
    C_mu_prime: float
    C_nu: float
    delta: float
    epsilon: float
    gate: dict
    K_bounds: dict
    H1_required: float
    H1: float
    H2: float
    H1_ceiling: float
    coeffs: np.ndarray
    check: UnstableVerdict
    realizability: dict

    @property
    def feasible(self) -> bool:
        return self.check.verdict == "unstable-predicted"

    def inputs(self) -> UnstableCheckInputs:
        return UnstableCheckInputs(self.H1, self.H2, self.K, self.delta, self.epsilon,
                                   self.C_mu, self.C_mu_prime, self.C_nu, self.coeffs)


def select_unstable_parameters(domain: Domain, ansatz: EquilibriumAnsatz, grid: MeridianGrid,
                               basis_A: BasisSet, delta: float = 0.6, epsilon: float = 0.2,
                               C_nu: float = 1.0, K_margin: float = 1.01,
                               C0: float | None = None,
                               require_feasible: bool = True) -> UnstableSelection:
    """Parameter recipe for the scaled family.

    K is the smallest value (times ``K_margin``) above the three lower
    bounds; C_mu is then pushed to the smallness gate C_mu K <= min(1/(2 C0),
    g/(16 pi b)), capped below one, and C'_mu = C_mu/2. The test function is
    the ground state of -Delta + 1/r^2 on {r >= 1} projected on the basis.
    ``realizability`` compares these recipe values with what the template
    ansatz actually provides and with the largest H1 any test function can
    reach on the grid.

    With ``require_feasible`` a SolverError carrying the selection is raised
    when the constructed h misses the H1 requirement.
    """
    b = domain.b
    if b <= 1:
        raise ParameterError("the instability recipe needs sup r > 1", "b > 1")
    _check_exponents(delta, epsilon)
    g = ansatz.gamma
    const = criteria_constants(domain, g, epsilon, grid)
    c1, c2, cP = const.C1, const.C2, const.c_P
    bounds = {
        "potential": (2000 * 2 ** g * math.pi ** 2 * b ** 2 / (c1 * C_nu)) ** (1 / (delta - epsilon)),
        "projection": (8 * 2 ** g * c2 / (c1 * C_nu)) ** (1 / (1 - epsilon)),
        "schur": (2048 * math.pi ** 2 * cP / (c1 * C_nu)) ** (1 / (1 + delta - epsilon)),
    }
    K = max(1.0, max(bounds.values()) * K_margin)
    c0 = C0 if C0 is not None else estimate_C0(grid, g)["C0"]
    limit = smallness_gate(1.0, 1.0, c0, g, b)["limit"]
    C_mu = min(0.99, limit / K)
    C_mu_prime = 0.5 * C_mu
    H1_req = 4.0 / (c1 * C_nu * C_mu_prime * K ** (1 - delta - epsilon))
    h = outer_ground_state(grid)
    coeffs = basis_A.functions.T @ (grid.weights * h)
    coeffs, H1, H2, err = normalize_test_function(basis_A, coeffs)
    if H1 <= 0:
        raise SolverError("projected test function has no mass in r >= 1; use a larger basis")
    inputs = UnstableCheckInputs(H1, H2, K, delta, epsilon, C_mu, C_mu_prime, C_nu, coeffs, err)
    check = check_unstable_inequality(inputs, const)
    template_C_mu = ansatz.resolved_C_mu(b)
    template_C_prime = ansatz.angular_momentum_constant(b, epsilon)
    ceiling = max_H1(grid)
    realizability = {
        "template_C_mu": template_C_mu,
        "template_C_mu_prime": template_C_prime,
        "template_ratio": template_C_prime / template_C_mu if template_C_mu else 0.0,
        "required_ratio": 0.5,
        "H1_ceiling": ceiling,
        "H1_required": H1_req,
        "H1_feasible": ceiling > H1_req,
        "gate_limit": limit,
        "C0": c0,
    }
    gate = smallness_gate(C_mu, K, c0, g, b)
    selection = UnstableSelection(K, C_mu, C_mu_prime, C_nu, delta, epsilon, gate, bounds,
                                  H1_req, H1, H2, ceiling, coeffs, check, realizability)
    if require_feasible and H1 < H1_req:
        hint = ("a larger basis" if ceiling >= H1_req else
                "no grid function reaches it (ceiling %.3e), so refining will not help" % ceiling)
        err = SolverError("test function has H1 = %.3e but the recipe needs %.3e; %s"
                          % (H1, H1_req, hint))
        err.selection = selection
        raise err
    return selection


def build_unstable_ansatz(template: EquilibriumAnsatz, selection: UnstableSelection,
                          b: float, nu=None) -> EquilibriumAnsatz:
    """Scaled family K^-delta mu(e, K p) whose template amplitude is set so
    that its decay constant over the K-stretched momentum range equals the
    selected C_mu."""
    base = template.decay_constant(selection.K * b)
    if base <= 0:
        raise ParameterError("template ansatz vanishes", "mu != 0")
    factor = selection.C_mu / base
    try:
        plus = replace(template.plus, amplitude=template.plus.amplitude * factor)
        minus = plus if template.minus is template.plus else replace(
            template.minus, amplitude=template.minus.amplitude * factor)
    except TypeError as exc:
        raise ParameterError("template family %r has no amplitude to rescale" % template.family,
                             "amplitude family") from exc
    tmpl = replace(template, plus=plus, minus=minus, C_mu=selection.C_mu)
    return scale_ansatz(tmpl, selection.K, selection.delta, selection.epsilon,
                        selection.C_mu_prime, selection.C_nu, nu)


def quadratic_form_A2(coeffs, ansatz: EquilibriumAnsatz, fields: EquilibriumFields, quad=None,
                      basis_A: BasisSet | None = None, settings=None, assembler=None,
                      lam: float = 0.0) -> dict:
    """<A2 h, h> = energy + I + II + III for h given by its coefficients on
    the m=1 basis; energy is one after normalisation.

    Pass an existing ``assembler`` to reuse its trajectory deposits.
    """
    if assembler is None:
        from .operators import OperatorAssembler, build_basis
        if basis_A is None:
            basis_A = build_basis(fields.grid, len(coeffs), "m1-dirichlet")
        basis_phi = build_basis(fields.grid, 1, "laplacian-dirichlet")
        assembler = OperatorAssembler(ansatz, fields, basis_phi, basis_A, quad, settings)
    c, _, _, _ = normalize_test_function(assembler.basis_A, coeffs)
    return assembler.quadratic_form_terms(c, lam)


def quadratic_form_L(coeffs, mats) -> float:
    """<L h, h> for a normalised h from assembled matrices."""
    c = np.asarray(coeffs, dtype=float)
    return float(c @ mats.L[: len(c), : len(c)] @ c)


def B_norm_bound(C_mu: float, K: float, delta: float) -> float:
    """8 sqrt(2) pi C_mu K^-delta."""
    return 8.0 * math.sqrt(2.0) * math.pi * C_mu * K ** (-delta)


# --------------------------------------------------------------------------
# reports

def criteria_report(path, constants: CriteriaConstants, results=(), unstable=None,
                    extra: dict | None = None):
    data = {"version": __version__, "constants": asdict(constants),
            "constants_check": constants.check(),
            "criteria": [{"name": r.name, "verdict": r.verdict, "lhs": r.lhs, "rhs": r.rhs,
                          "margin": r.margin, "details": r.details} for r in results]}
    if results:
        data["stable_verdict"] = stable_verdict(results)
    if unstable is not None:
        data["unstable"] = {"value": unstable.value, "terms": unstable.terms,
                            "verdict": unstable.verdict, "form": unstable.form}
    data.update(extra or {})
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True, default=_json_default)
    return data
