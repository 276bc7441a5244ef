"""INI run configuration.

Example::

    [domain]
    shape = torus
    R = 2.0
    a = 0.5

    [ansatz]
    family = exponential
    gamma = 5
    amplitude = 0.05
    temperature = 0.5

    [grid]
    n = 32

Section and key names are case-insensitive. Every missing or malformed
value raises ConfigError naming the key.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .ansatz import EquilibriumAnsatz, make_ansatz, scale_ansatz
from .elliptic import MeridianGrid
from .errors import ConfigError, RvmError
from .geometry import Domain

SECTIONS = {
    "run": {"seed", "threads", "backend", "tol"},
    "domain": {"shape", "r", "a", "ar", "az", "r0", "r1", "z0", "z1", "curve"},
    "ansatz": None,              # family parameters are checked by make_ansatz
    "scaling": {"k", "delta", "epsilon", "c_nu"},
    "grid": {"n", "pad", "order"},
    "equilibrium": {"tol", "max_iter", "relaxation", "fields"},
    "trajectories": {"dt", "t", "n_particles", "v_max", "species", "max_collisions", "stride",
                     "dump"},
    "basis": {"n_phi", "n_a"},
    "quadrature": {"n_radial", "n_polar", "n_azimuth", "v_cap", "tol"},
    "operators": {"dt", "t_avg", "horizon_factor", "row_stride", "row_chunk", "asymmetry_tol",
                  "tail_tol", "max_doublings", "lambdas", "rel_tol"},
    "criteria": {"delta", "epsilon", "c_nu", "variant", "form", "unstable", "factor"},
}

DOMAIN_SHAPES = {"torus": ("r", "a"), "ball": ("a",), "ellipse": ("r", "ar", "az"),
                 "rectangle": ("r0", "r1", "z0", "z1")}


def _parser() -> configparser.ConfigParser:
    # keys are case-folded by default; keep inline comments usable
    return configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)


@dataclass
class RunConfig:
    sections: dict
    source: str = "<string>"
    base_dir: Path = field(default_factory=Path.cwd)

    # raw access ---------------------------------------------------------
    def has(self, section: str, key: str) -> bool:
        return key.lower() in self.sections.get(section, {})

    def raw(self, section: str, key: str, default=None):
        val = self.sections.get(section, {}).get(key.lower())
        if val is None:
            if default is ConfigError:
                raise ConfigError("missing required key [%s] %s" % (section, key), key=key)
            return default
        return val

    def get_float(self, section, key, default=None, positive=False) -> float:
        val = self.raw(section, key, default)
        if val is None:
            return None
        try:
            out = float(val)
        except (TypeError, ValueError):
            raise ConfigError("[%s] %s must be a number, got %r" % (section, key, val), key=key)
        if not math.isfinite(out) or (positive and out <= 0):
            raise ConfigError("[%s] %s must be a positive finite number" % (section, key), key=key)
        return out

    def get_int(self, section, key, default=None, minimum=None) -> int:
        val = self.raw(section, key, default)
        if val is None:
            return None
        try:
            out = int(str(val))
        except ValueError:
            raise ConfigError("[%s] %s must be an integer, got %r" % (section, key, val), key=key)
        if minimum is not None and out < minimum:
            raise ConfigError("[%s] %s must be >= %d" % (section, key, minimum), key=key)
        return out

    def get_list(self, section, key, default=None) -> list[float] | None:
        val = self.raw(section, key, None)
        if val is None:
            return default
        try:
            return [float(x) for x in str(val).replace(",", " ").split()]
        except ValueError:
            raise ConfigError("[%s] %s must be a list of numbers" % (section, key), key=key)

    def get_bool(self, section, key, default=False) -> bool:
        val = self.raw(section, key, None)
        if val is None:
            return default
        low = str(val).strip().lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ConfigError("[%s] %s must be a boolean" % (section, key), key=key)

    def path(self, section, key) -> Path | None:
        val = self.raw(section, key)
        if val is None:
            return None
        p = Path(val)
        return p if p.is_absolute() else self.base_dir / p

    # provenance ---------------------------------------------------------
    def canonical(self) -> str:
        lines = []
        for sec in sorted(self.sections):
            lines.append("[%s]" % sec)
            for k in sorted(self.sections[sec]):
                lines.append("%s=%s" % (k, self.sections[sec][k].strip()))
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @property
    def seed(self) -> int:
        return self.get_int("run", "seed", 12345)

    @property
    def threads(self) -> int | None:
        return self.get_int("run", "threads", None, minimum=1)

    @property
    def backend(self) -> str | None:
        return self.raw("run", "backend")

    # builders -----------------------------------------------------------
    def domain(self) -> Domain:
        if self.has("domain", "curve"):
            return Domain.from_csv(self.path("domain", "curve"))
        shape = self.raw("domain", "shape", ConfigError).strip().lower()
        if shape not in DOMAIN_SHAPES:
            raise ConfigError("unknown domain shape %r (expected one of %s or a curve CSV)"
                              % (shape, ", ".join(sorted(DOMAIN_SHAPES))), key="shape")
        args = [self.get_float("domain", k, ConfigError) for k in DOMAIN_SHAPES[shape]]
        try:
            return getattr(Domain, shape)(*args)
        except RvmError as exc:
            raise ConfigError("invalid %s domain: %s" % (shape, exc), key="shape") from exc

    def grid(self, domain: Domain | None = None) -> MeridianGrid:
        return MeridianGrid(domain or self.domain(), self.get_int("grid", "n", 32, minimum=4),
                            self.get_int("grid", "pad", 4, minimum=2))

    def ansatz(self) -> EquilibriumAnsatz:
        sec = dict(self.sections.get("ansatz", {}))
        if "gamma" not in sec:
            raise ConfigError("missing required key [ansatz] gamma", key="gamma")
        gamma = self.get_float("ansatz", "gamma", positive=True)
        family = sec.pop("family", "exponential").strip()
        sec.pop("gamma")
        params = {}
        for k, v in sec.items():
            if k in ("table", "table_minus"):
                p = Path(v)
                params[k] = str(p if p.is_absolute() else self.base_dir / p)
            else:
                params[k] = self.get_float("ansatz", k)
        try:
            ansatz = make_ansatz(family, gamma, **params)
        except ConfigError:
            raise
        except RvmError as exc:
            raise ConfigError("invalid ansatz: %s" % exc, key=getattr(exc, "constraint", None)) from exc
        if self.has("scaling", "K"):
            ansatz = scale_ansatz(ansatz, self.get_float("scaling", "K", positive=True),
                                  self.get_float("scaling", "delta", ConfigError, positive=True),
                                  self.get_float("scaling", "epsilon"),
                                  None, self.get_float("scaling", "C_nu"))
        return ansatz


def _validate(sections: dict):
    for sec, keys in sections.items():
        if sec not in SECTIONS:
            raise ConfigError("unknown section [%s]" % sec, key=sec)
        allowed = SECTIONS[sec]
        if allowed is None:
            continue
        for k in keys:
            if k not in allowed:
                raise ConfigError("unknown key [%s] %s" % (sec, k), key=k)
    for sec, key in (("run", "tol"), ("equilibrium", "tol"), ("quadrature", "tol"),
                     ("operators", "asymmetry_tol"), ("operators", "tail_tol"),
                     ("operators", "rel_tol")):
        val = sections.get(sec, {}).get(key)
        if val is not None:
            try:
                ok = float(val) > 0
            except ValueError:
                ok = False
            if not ok:
                raise ConfigError("[%s] %s must be a positive tolerance" % (sec, key), key=key)


def parse_config(text: str, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("cannot parse %s: %s" % (source, exc)) from exc
    sections = {s.lower(): dict(cp[s]) for s in cp.sections()}
    _validate(sections)
    return RunConfig(sections, source, base_dir or Path.cwd())


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc), key="--config") from exc
    return parse_config(text, str(path), path.parent.resolve())
