"""Equilibrium distributions mu(e, p) of the two particle species.

Each species carries a profile with the density and both partial
derivatives. Profiles are vectorised over numpy arrays of (e, p).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, ParameterError
from .quadrature import tail_speed


@dataclass(frozen=True)
class ExponentialProfile:
    """a exp(-e/T) (cosh(w p) + s sinh(w p)) with |s| <= 1."""

    amplitude: float
    temperature: float = 1.0
    omega: float = 0.0
    skew: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ParameterError("temperature must be positive", "temperature > 0")
        if abs(self.skew) > 1:
            raise ParameterError("skew must satisfy |s| <= 1 to keep mu >= 0", "|skew| <= 1")
        if self.amplitude < 0:
            raise ParameterError("amplitude must be non-negative", "amplitude >= 0")

    def _pfactor(self, p):
        wp = self.omega * p
        return np.cosh(wp) + self.skew * np.sinh(wp)

    def mu(self, e, p):
        return self.amplitude * np.exp(-e / self.temperature) * self._pfactor(p)

    def mu_e(self, e, p):
        return -self.mu(e, p) / self.temperature

    def mu_p(self, e, p):
        wp = self.omega * p
        return (self.amplitude * np.exp(-e / self.temperature) * self.omega
                * (np.sinh(wp) + self.skew * np.cosh(wp)))

    def speed_decay(self, b: float):
        """Exponential rate in |v| bounding mu along accessible momenta."""
        return 1.0 / self.temperature - abs(self.omega) * b, None


@dataclass(frozen=True)
class PowerLawProfile:
    """a (1 + e^2)^(-q) (1 + c tanh(k p)^2), c >= -1.

    The velocity integrals of this family are cut off at a finite speed;
    the truncated tail is reported alongside every density.
    """

    amplitude: float
    power: float = 3.0
    contrast: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.contrast < -1:
            raise ParameterError("contrast must be >= -1 to keep mu >= 0", "contrast >= -1")
        if self.power <= 1.5:
            raise ParameterError("power must exceed 3/2 for finite density", "power > 1.5")

    def _e(self, e):
        return (1.0 + e * e) ** (-self.power)

    def mu(self, e, p):
        t = np.tanh(self.width * p)
        return self.amplitude * self._e(e) * (1.0 + self.contrast * t * t)

    def mu_e(self, e, p):
        t = np.tanh(self.width * p)
        return (-2.0 * self.power * e * self.amplitude * (1.0 + e * e) ** (-self.power - 1.0)
                * (1.0 + self.contrast * t * t))

    def mu_p(self, e, p):
        t = np.tanh(self.width * p)
        return self.amplitude * self._e(e) * 2.0 * self.contrast * self.width * t * (1.0 - t * t)

    def speed_decay(self, b: float):
        return 0.0, 2.0 * self.power


class TableProfile:
    """Tabulated positive density; log(mu) is a cubic spline in (e, p).

    Beyond the largest tabulated energy log(mu) continues linearly in e; p
    is clamped to the table range.
    """

    def __init__(self, e_grid, p_grid, values):
        e_grid = np.asarray(e_grid, dtype=float)
        p_grid = np.asarray(p_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(values <= 0):
            raise ParameterError("tabulated density must be positive", "mu > 0")
        self.e_grid, self.p_grid = e_grid, p_grid
        k = min(3, len(e_grid) - 1, len(p_grid) - 1)
        self._log = RectBivariateSpline(e_grid, p_grid, np.log(values), kx=k, ky=k)
        self._e_hi = e_grid[-1]

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [(float(r["e"]), float(r["p"]), float(r["mu"])) for r in csv.DictReader(fh)]
        e = np.unique([r[0] for r in rows])
        p = np.unique([r[1] for r in rows])
        table = np.full((len(e), len(p)), np.nan)
        for ee, pp, mm in rows:
            table[np.searchsorted(e, ee), np.searchsorted(p, pp)] = mm
        if np.isnan(table).any():
            raise ConfigError("custom table must fill a full (e, p) grid", key="table")
        return cls(e, p, table)

    def _parts(self, e, p):
        e = np.asarray(e, dtype=float)
        p = np.clip(np.asarray(p, dtype=float), self.p_grid[0], self.p_grid[-1])
        inside = np.clip(e, self.e_grid[0], self._e_hi)
        logmu = self._log.ev(inside, p)
        slope = self._log.ev(inside, p, dx=1)
        logmu = logmu + np.where(e > self._e_hi, (e - self._e_hi) * self._log.ev(self._e_hi, p, dx=1), 0.0)
        slope = np.where(e > self._e_hi, self._log.ev(self._e_hi, p, dx=1), slope)
        return np.exp(logmu), slope, self._log.ev(inside, p, dy=1)

    def mu(self, e, p):
        return self._parts(e, p)[0]

    def mu_e(self, e, p):
        m, se, _ = self._parts(e, p)
        return m * se

    def mu_p(self, e, p):
        m, _, sp_ = self._parts(e, p)
        pp = np.asarray(p, dtype=float)
        clamp = (pp < self.p_grid[0]) | (pp > self.p_grid[-1])
        return np.where(clamp, 0.0, m * sp_)

    def speed_decay(self, b: float):
        slope = float(np.max(self._log.ev(np.full_like(self.p_grid, self._e_hi), self.p_grid, dx=1)))
        return -slope, None


@dataclass(frozen=True)
class ScaledProfile:
    """K^-delta mu(e, K p)."""

    base: object
    K: float
    delta: float

    def mu(self, e, p):
        return self.K ** -self.delta * self.base.mu(e, self.K * np.asarray(p))

    def mu_e(self, e, p):
        return self.K ** -self.delta * self.base.mu_e(e, self.K * np.asarray(p))

    def mu_p(self, e, p):
        return self.K ** (1.0 - self.delta) * self.base.mu_p(e, self.K * np.asarray(p))

    def speed_decay(self, b: float):
        return self.base.speed_decay(self.K * b)


@dataclass(frozen=True)
class ScaledParams:
    K: float
    delta: float
    epsilon: float | None = None
    C_mu_prime: float | None = None
    C_nu: float | None = None
    nu: Callable | None = None
    base_C_mu: float | None = None


@dataclass
class EquilibriumAnsatz:
    """Pair of species profiles with the decay exponent gamma.

    ``C_mu`` is filled lazily by :meth:`decay_constant` unless given.
    """

    plus: object
    minus: object
    gamma: float = 5.0
    family: str = "exponential"
    params: dict = field(default_factory=dict)
    scaled: ScaledParams | None = None
    C_mu: float | None = None

    def __post_init__(self):
        if self.gamma <= 3:
            raise ParameterError("decay exponent gamma must exceed 3", "gamma > 3")

    def profile(self, sign: int):
        return self.plus if sign > 0 else self.minus

    @property
    def symmetric_species(self) -> bool:
        return self.plus is self.minus or self.plus == self.minus

    def mu(self, sign, e, p):
        return self.profile(sign).mu(e, p)

    def mu_e(self, sign, e, p):
        return self.profile(sign).mu_e(e, p)

    def mu_p(self, sign, e, p):
        return self.profile(sign).mu_p(e, p)

    def is_zero(self) -> bool:
        e = np.linspace(1.0, 10.0, 7)
        return all(np.all(self.mu(s, e, 0 * e) == 0) and np.all(self.mu_p(s, e, 0 * e + 0.5) == 0)
                   for s in (1, -1))

    # sampled constants ---------------------------------------------------
    def sample_grid(self, b: float, phi_max: float = 0.5, A_max: float = 0.5,
                    e_max: float = 200.0, n_e: int = 400, n_p: int = 161):
        """(e, p) samples of the accessible set: e >= 1 - phi_max and
        |p| <= b (sqrt((e + phi_max)^2 - 1) + A_max)."""
        e = np.concatenate([np.linspace(1.0 - phi_max, 10.0, n_e // 2),
                            np.geomspace(10.0, e_max, n_e - n_e // 2)])
        pmax = b * (np.sqrt(np.maximum((e + phi_max) ** 2 - 1.0, 0.0)) + A_max)
        frac = np.linspace(-1.0, 1.0, n_p)
        E = np.repeat(e[:, None], n_p, axis=1)
        P = pmax[:, None] * frac[None, :]
        return E, P

    def decay_constant(self, b: float, phi_max: float = 0.5, A_max: float = 0.5,
                       part: str = "full") -> float:
        """Smallest C with |mu_e| + |mu_p| <= C / (1 + |e|^gamma) on samples.

        ``part="energy"`` restricts the bound to |mu_e|.
        """
        E, P = self.sample_grid(b, phi_max, A_max)
        worst = 0.0
        for s in (1, -1):
            val = np.abs(self.mu_e(s, E, P))
            if part == "full":
                val = val + np.abs(self.mu_p(s, E, P))
            worst = max(worst, float(np.max(val * (1.0 + np.abs(E) ** self.gamma))))
        return worst

    def resolved_C_mu(self, b: float) -> float:
        if self.C_mu is None:
            self.C_mu = self.decay_constant(b)
        return self.C_mu

    def check_assumptions(self, b: float, phi_max=0.5, A_max=0.5) -> dict:
        """Sampled check of mu_e < 0 and the decay bound."""
        E, P = self.sample_grid(b, phi_max, A_max)
        C = self.resolved_C_mu(b)
        report = {"C_mu": C, "gamma": self.gamma}
        neg = True
        bound_ok = True
        for s in (1, -1):
            me = self.mu_e(s, E, P)
            # exponentially small values underflow to 0; only count resolvable ones
            resolvable = self.mu(s, E, P) > 1e-250
            neg &= bool(np.all(me[resolvable] < 0))
            lhs = np.abs(me) + np.abs(self.mu_p(s, E, P))
            bound_ok &= bool(np.all(lhs <= C / (1.0 + np.abs(E) ** self.gamma) * (1 + 1e-12)))
        report["mu_e_negative"] = neg
        report["decay_bound"] = bound_ok
        return report

    def p_mu_p_max(self, b: float, phi_max=0.5, A_max=0.5) -> float:
        """max of p mu_p over samples; <= 0 is the stable-criterion premise."""
        E, P = self.sample_grid(b, phi_max, A_max)
        return max(float(np.max(P * self.mu_p(s, E, P))) for s in (1, -1))

    def angular_momentum_constant(self, b: float, epsilon: float, nu: Callable | None = None,
                                  p_min: float = 1.0, phi_max=0.5, A_max=0.5) -> float:
        """Largest C' with p mu_p >= C' |p| <p>^-eps nu(e) on samples |p| >= p_min.

        The default nu(e) = exp(-e). Returns 0 when some sample has p mu_p <= 0.
        """
        nu = nu or (lambda e: np.exp(-e))
        E, P = self.sample_grid(b, phi_max, A_max)
        sel = np.abs(P) >= p_min
        E, P = E[sel], P[sel]
        denom = np.abs(P) * (1.0 + P * P) ** (-0.5 * epsilon) * nu(E)
        worst = math.inf
        for s in (1, -1):
            ratio = P * self.mu_p(s, E, P) / np.where(denom > 0, denom, np.inf)
            ok = denom > 1e-300
            worst = min(worst, float(np.min(ratio[ok])) if ok.any() else math.inf)
        return max(worst, 0.0)

    def tail_speed(self, tol: float, b: float) -> float:
        speeds = []
        for s in (1, -1):
            rate, power = self.profile(s).speed_decay(b)
            speeds.append(tail_speed(rate, tol, power))
        return max(speeds)


def make_ansatz(family: str, gamma: float = 5.0, **params) -> EquilibriumAnsatz:
    """Build an ansatz from a family name and flat parameters.

    Species-specific values use ``_plus`` / ``_minus`` suffixes; unsuffixed
    keys apply to both species. When both species resolve to the same
    parameters a single profile object is shared.
    """
    names = {
        "exponential": (ExponentialProfile, ("amplitude", "temperature", "omega", "skew")),
        "polynomial-cutoff": (PowerLawProfile, ("amplitude", "power", "contrast", "width")),
    }
    if family == "custom-table":
        table = params.get("table")
        table_minus = params.get("table_minus", table)
        if table is None:
            raise ConfigError("custom-table ansatz needs a 'table' path", key="table")
        plus = TableProfile.from_csv(table)
        minus = plus if table_minus == table else TableProfile.from_csv(table_minus)
        return EquilibriumAnsatz(plus, minus, gamma, family, dict(params))
    if family not in names:
        raise ConfigError("unknown ansatz family %r" % family, key="family")
    cls, keys = names[family]
    unknown = set(params) - {k + suf for k in keys for suf in ("", "_plus", "_minus")}
    if unknown:
        raise ConfigError("unknown ansatz parameters: %s" % ", ".join(sorted(unknown)),
                          key=sorted(unknown)[0])

    def species(suffix):
        kw = {}
        for k in keys:
            if k + suffix in params:
                kw[k] = float(params[k + suffix])
            elif k in params:
                kw[k] = float(params[k])
        if "amplitude" not in kw:
            raise ConfigError("ansatz needs 'amplitude'", key="amplitude")
        return cls(**kw)

    plus, minus = species("_plus"), species("_minus")
    if plus == minus:
        minus = plus
    return EquilibriumAnsatz(plus, minus, gamma, family, dict(params))


def scale_ansatz(ansatz: EquilibriumAnsatz, K: float, delta: float, epsilon: float | None = None,
                 C_mu_prime: float | None = None, C_nu: float | None = None,
                 nu: Callable | None = None) -> EquilibriumAnsatz:
    """Scaled family K^-delta mu(e, K p) for both species."""
    if K < 1:
        raise ParameterError("K must be >= 1", "K >= 1")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)", "0 < delta < 1")
    if K == 1:
        plus, minus = ansatz.plus, ansatz.minus
    else:
        plus = ScaledProfile(ansatz.plus, K, delta)
        minus = plus if ansatz.minus is ansatz.plus else ScaledProfile(ansatz.minus, K, delta)
    return replace(ansatz, plus=plus, minus=minus, C_mu=None,
                   scaled=ScaledParams(K, delta, epsilon, C_mu_prime, C_nu, nu, ansatz.C_mu))


def zero_ansatz(gamma: float = 5.0) -> EquilibriumAnsatz:
    prof = ExponentialProfile(0.0)
    return EquilibriumAnsatz(prof, prof, gamma, "exponential", {"amplitude": 0.0})
