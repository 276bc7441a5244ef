"""Command-line front end.

    rvmstab equilibrium  --config run.ini --out results/
    rvmstab trajectories --config run.ini --out results/
    rvmstab stability    --config run.ini --out results/
    rvmstab scan         --config run.ini --out results/
    rvmstab criteria     --config run.ini --out results/

Exit codes: 0 success, 1 computation error, 2 configuration error,
3 violated theory invariant.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, criteria, kernels
from .config import RunConfig, load_config
from .elliptic import MeridianGrid
from .equilibrium import fixed_point_equilibrium, potential_sup_check
from .errors import ConfigError, RvmError
from .fields import EquilibriumFields, _json_default
from .operators import (AssemblySettings, OperatorAssembler, assembly_quadrature, build_basis,
                        lambda_scan, smallest_eigenvalue)
from .trajectories import ParticleState, collision_census, integrate, sample_phase_space

log = logging.getLogger("rvmstab")


def _write_json(path: Path, data: dict, cfg: RunConfig):
    data = dict(data)
    data["config_hash"] = cfg.hash
    data["version"] = __version__
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


class Run:
    """Lazily built objects shared by the subcommands of one invocation."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self._domain = None
        self._ansatz = None
        self._fp = None
        self._fields = None

    @property
    def domain(self):
        if self._domain is None:
            self._domain = self.cfg.domain()
        return self._domain

    @property
    def grid(self) -> MeridianGrid:
        return self.fields.grid

    @property
    def ansatz(self):
        if self._ansatz is None:
            self._ansatz = self.cfg.ansatz()
        return self._ansatz

    @property
    def fields(self) -> EquilibriumFields:
        if self._fields is None:
            path = self.cfg.path("equilibrium", "fields")
            if path is not None:
                self._fields = EquilibriumFields.load(path)
            else:
                self.solve_equilibrium()
        return self._fields

    def solve_equilibrium(self):
        c = self.cfg
        self._fp = fixed_point_equilibrium(
            self.ansatz, self.cfg.grid(self.domain),
            tol=c.get_float("equilibrium", "tol", 1e-10, positive=True),
            max_iter=c.get_int("equilibrium", "max_iter", 100, minimum=1),
            relaxation=c.get_float("equilibrium", "relaxation", 1.0, positive=True),
            order=c.get_int("grid", "order", 5, minimum=1))
        self._fields = self._fp.fields
        return self._fp

    def settings(self) -> AssemblySettings:
        c = self.cfg
        d = AssemblySettings()
        return AssemblySettings(
            dt=c.get_float("operators", "dt", d.dt, positive=True),
            T_avg=c.get_float("operators", "T_avg", d.T_avg, positive=True),
            horizon_factor=c.get_float("operators", "horizon_factor", d.horizon_factor, positive=True),
            row_stride=c.get_int("operators", "row_stride", d.row_stride, minimum=1),
            row_chunk=c.get_int("operators", "row_chunk", d.row_chunk, minimum=1),
            asymmetry_tol=c.get_float("operators", "asymmetry_tol", d.asymmetry_tol, positive=True),
            tail_tol=c.get_float("operators", "tail_tol", d.tail_tol, positive=True),
            max_doublings=c.get_int("operators", "max_doublings", d.max_doublings, minimum=0),
            backend=c.backend)

    def assembler(self) -> OperatorAssembler:
        c = self.cfg
        N_phi = c.get_int("basis", "N_phi", 16, minimum=1)
        N_A = c.get_int("basis", "N_A", N_phi, minimum=1)
        bphi = build_basis(self.grid, N_phi, "laplacian-dirichlet")
        bA = build_basis(self.grid, N_A, "m1-dirichlet")
        quad = assembly_quadrature(
            self.ansatz, self.domain.b,
            n_radial=c.get_int("quadrature", "n_radial", 8, minimum=1),
            n_polar=c.get_int("quadrature", "n_polar", 8, minimum=1),
            n_azimuth=c.get_int("quadrature", "n_azimuth", 4, minimum=1),
            tol=c.get_float("quadrature", "tol", 1e-6, positive=True),
            v_cap=c.get_float("quadrature", "v_cap", 30.0, positive=True))
        return OperatorAssembler(self.ansatz, self.fields, bphi, bA, quad, self.settings())

    def lambdas(self) -> list[float]:
        lams = self.cfg.get_list("operators", "lambdas", [0.0])
        if any(l < 0 for l in lams):
            raise ConfigError("growth rates must be non-negative", key="lambdas")
        return sorted(set([0.0] + lams))


# --------------------------------------------------------------------------
# subcommands

def cmd_equilibrium(run: Run) -> dict:
    fp = run.solve_equilibrium()
    report = fp.report()
    sc = run.ansatz.scaled
    if sc is not None:
        C_mu = sc.base_C_mu if sc.base_C_mu is not None else run.ansatz.resolved_C_mu(run.domain.b)
        chk = potential_sup_check(fp.fields, C_mu, sc.K, sc.delta, run.domain.b)
        report["sup_check"] = {"phi_sup": chk.phi_sup, "A_sup": chk.A_sup, "bound": chk.bound,
                               "passed": chk.ok}
    fp.fields.save(run.out / "fields.csv", {"config_hash": run.cfg.hash, "version": __version__})
    _write_json(run.out / "equilibrium.json", report, run.cfg)
    log.info("equilibrium: %d iterations, contraction %.3g", fp.iterations, fp.contraction_estimate)
    return report


def cmd_trajectories(run: Run) -> dict:
    c = run.cfg
    dt = c.get_float("trajectories", "dt", 1e-3, positive=True)
    T = c.get_float("trajectories", "T", 10.0, positive=True)
    n = c.get_int("trajectories", "n_particles", 1000, minimum=1)
    v_max = c.get_float("trajectories", "v_max", 3.0, positive=True)
    species = c.get_int("trajectories", "species", 1)
    if species not in (1, -1):
        raise ConfigError("species must be 1 or -1", key="species")
    max_coll = c.get_int("trajectories", "max_collisions", 10 ** 6, minimum=1)
    stride = c.get_int("trajectories", "stride", None, minimum=1)
    fields = run.fields
    rng = np.random.default_rng(run.cfg.seed)
    ens = sample_phase_space(run.domain, n, rng, v_max)
    census = collision_census(ens, fields, T, dt, species, max_coll, c.backend, stride)
    extra = {"dt": dt, "T": T, "n_particles": n, "species": species, "v_max": v_max,
             "backend": c.backend or kernels.BACKEND, "seed": run.cfg.seed,
             "config_hash": c.hash, "version": __version__}
    census.to_json(run.out / "census.json", extra)
    with open(run.out / "collisions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["collisions", "count"])
        for k in sorted(census.histogram):
            w.writerow([k, census.histogram[k]])
    if c.get_bool("trajectories", "dump", False):
        x = ens[0]
        res = integrate(ParticleState(x[0], x[1], x[2], x[3], x[4], species), fields, T, dt,
                        stride or max(1, int(round(T / dt)) // 1000), max_coll,
                        backend=c.backend)
        res.to_csv(run.out / "trajectory_0.csv", fields)
    log.info("trajectories: max drift e %.2e p %.2e, grazing %.3g", census.drift_e_max,
             census.drift_p_max, census.grazing_fraction)
    return {"drift_e_max": census.drift_e_max, "drift_p_max": census.drift_p_max,
            "grazing_fraction": census.grazing_fraction}


def _criteria_results(run: Run) -> tuple[criteria.CriteriaConstants, list, dict]:
    c = run.cfg
    eps = c.get_float("criteria", "epsilon", None)
    const = criteria.criteria_constants(run.domain, run.ansatz.gamma, eps, run.grid)
    factor = c.raw("criteria", "factor", "stated")
    if factor not in ("stated", "safe"):
        raise ConfigError("factor must be 'stated' or 'safe'", key="factor")
    variant = c.raw("criteria", "variant", "corrected")
    if variant not in ("corrected", "printed"):
        raise ConfigError("variant must be 'corrected' or 'printed'", key="variant")
    results = [criteria.check_stable_i(run.fields, run.ansatz, const, factor),
               criteria.check_stable_ii(run.fields, run.ansatz, const, factor),
               criteria.check_geometric_form(run.domain, run.fields, run.ansatz, variant, factor)]
    extra = {}
    if c.get_bool("criteria", "unstable", False):
        if run.domain.b <= 1:
            extra["unstable_selection"] = {"verdict": "inapplicable", "reason": "b <= 1"}
        else:
            basis = build_basis(run.grid, c.get_int("basis", "N_A", 16, minimum=1), "m1-dirichlet")
            sel = criteria.select_unstable_parameters(
                run.domain, run.ansatz, run.grid, basis,
                delta=c.get_float("criteria", "delta", 0.6, positive=True),
                epsilon=eps if eps is not None else 0.2,
                C_nu=c.get_float("criteria", "C_nu", 1.0, positive=True),
                require_feasible=False)
            extra["unstable_selection"] = {
                "K": sel.K, "C_mu": sel.C_mu, "C_mu_prime": sel.C_mu_prime, "K_bounds": sel.K_bounds,
                "gate": sel.gate, "H1": sel.H1, "H2": sel.H2, "H1_required": sel.H1_required,
                "H1_ceiling": sel.H1_ceiling, "value": sel.check.value, "terms": sel.check.terms,
                "verdict": sel.check.verdict, "realizability": sel.realizability}
    return const, results, extra


def cmd_criteria(run: Run) -> dict:
    const, results, extra = _criteria_results(run)
    extra.update({"config_hash": run.cfg.hash})
    data = criteria.criteria_report(run.out / "criteria.json", const, results, None, extra)
    log.info("criteria: %s", data["stable_verdict"])
    return data


def _matrices_out(run: Run, mats):
    mdir = run.out / "matrices"
    mdir.mkdir(exist_ok=True)
    for m in mats:
        m.to_json(mdir / ("lambda_%s.json" % repr(float(m.lam))), {"config_hash": run.cfg.hash})


def cmd_stability(run: Run) -> dict:
    asm = run.assembler()
    rel_tol = run.cfg.get_float("operators", "rel_tol", 1e-6, positive=True)
    lams = run.lambdas()
    mats = asm.assemble(lams)
    _matrices_out(run, mats)
    verdicts = [smallest_eigenvalue(m.L, rel_tol) for m in mats]
    with open(run.out / "kappa.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "kappa"])
        for m, v in zip(mats, verdicts):
            w.writerow([repr(float(m.lam)), repr(v.kappa)])
    v0 = verdicts[0]
    verdict = "stable" if v0.kappa >= -v0.tol else "unstable"
    const, results, extra = _criteria_results(run)
    crit = criteria.criteria_report(run.out / "criteria.json", const, results, None,
                                    dict(extra, config_hash=run.cfg.hash))
    report = {"kappa0": v0.kappa, "tol": v0.tol, "verdict": verdict,
              "kappas": {repr(float(m.lam)): v.kappa for m, v in zip(mats, verdicts)},
              "assembly": mats[0].report, "criteria_verdict": crit["stable_verdict"],
              "coupling": asm.coupling_constants()}
    _write_json(run.out / "stability.json", report, run.cfg)
    log.info("stability: kappa0 = %.6g (%s)", v0.kappa, verdict)
    return report


def cmd_scan(run: Run) -> dict:
    asm = run.assembler()
    rel_tol = run.cfg.get_float("operators", "rel_tol", 1e-6, positive=True)
    scan = lambda_scan(asm, run.lambdas(), rel_tol)
    scan.to_csv(run.out / "scan.csv")
    report = {"lambdas": scan.lambdas, "kappas": scan.kappas, "verdicts": scan.verdicts,
              "lambda2": scan.lambda2, "bracket": scan.bracket, "continuity": scan.continuity}
    _write_json(run.out / "scan.json", report, run.cfg)
    log.info("scan: lambda2 bound %.4g, bracket %s", scan.lambda2, scan.bracket)
    return report


COMMANDS = {"equilibrium": cmd_equilibrium, "trajectories": cmd_trajectories,
            "stability": cmd_stability, "criteria": cmd_criteria, "scan": cmd_scan}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rvmstab", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version="%(prog)s " + __version__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default="rvmstab-out", help="output directory")
    ap.add_argument("--threads", type=int, help="kernel threads (overrides [run] threads)")
    ap.add_argument("--verbose", "-v", action="count", default=0)
    return ap


def _error_json(out: Path | None, exc: BaseException, code: int):
    data = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
            "version": __version__}
    for attr in ("key", "constraint"):
        if getattr(exc, attr, None) is not None:
            data[attr] = getattr(exc, attr)
    text = json.dumps(data, indent=1, sort_keys=True, default=_json_default)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").unlink(missing_ok=True)
        cfg = load_config(args.config)
        threads = args.threads or cfg.threads
        if threads:
            kernels.set_threads(threads)
        COMMANDS[args.command](Run(cfg, out))
    except RvmError as exc:
        _error_json(out, exc, exc.exit_code)
        if args.verbose > 1:
            traceback.print_exc()
        return exc.exit_code
    except Exception as exc:  # computation failure outside the package hierarchy
        _error_json(out, exc, 1)
        if args.verbose:
            traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
