"""``plapmix`` command line: config-driven runs and a formula shortcut.

Exit codes: 0 all requested checks passed, 1 a verification failed,
2 the config could not be parsed or validated, 3 a solve did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .discretize import EnergyModel, Grid
from .eigensolver import ConvergenceError, EigenReport, SolverOptions, solve_first, sweep_p
from .geometry import Domain, InvalidDomainError, Interval, domain_from_dict, inradius
from .kernel import Kernel, ResolutionError, quadrature_weights
from .limit import check_extremal, extremal_fields, lambda_for
from .viscosity import residual_report

log = logging.getLogger("plapmix")

SCHEMA = "plapmix.report/1"
TASK_ORDER = ("solve", "sweep", "verify-formulas", "viscosity-check")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    p: list = field(default_factory=lambda: [2.0])
    alpha: float = 1.0
    beta: float = 1.0
    h: float | None = None
    nodes: int | None = None
    tol_lambda: float = 1e-10
    tol_grad: float = 1e-8
    max_iters: int | None = None
    method: str = "inverse_power"
    init: str = "distance"


@dataclass
class ChecksConfig:
    sweep_rel_tol: float = 0.15
    residual_tol: float = 0.15


@dataclass
class RunConfig:
    domain: Domain
    kernel_profile: str = "tent"
    r_j: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    tasks: list = field(default_factory=lambda: ["solve"])
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    out_dir: str = "out"
    report_name: str = "report.json"

    def spacing(self) -> float:
        s = self.solver
        if s.h is not None:
            return float(s.h)
        lo, hi = self.domain.bounding_box()
        if s.nodes is not None:
            return float(hi[0] - lo[0]) / s.nodes
        r_omega, _ = inradius(self.domain)
        return min(self.r_j / 32, r_omega / 16)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "kernel": {"profile": self.kernel_profile, "r_j": self.r_j},
            "solver": asdict(self.solver),
            "tasks": list(self.tasks),
            "checks": asdict(self.checks),
            "output": {"dir": self.out_dir, "report": self.report_name},
        }


def _section(data: dict, key: str, required: bool = False) -> dict:
    val = data.get(key)
    if val is None:
        if required:
            raise ConfigError(f"missing required block '{key}'")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return val


def _fill(cls, block: dict, where: str):
    known = set(cls.__dataclass_fields__)
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**block)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    try:
        domain = domain_from_dict(_section(data, "domain", required=True))
    except (InvalidDomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from None

    kern = _section(data, "kernel")
    unknown = set(kern) - {"profile", "r_j"}
    if unknown:
        raise ConfigError(f"kernel: unknown field(s) {sorted(unknown)}")
    profile = kern.get("profile", "tent")
    try:
        r_j = float(kern.get("r_j", 1.0))
        Kernel(profile, r_j, domain.dim)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"kernel: {exc}") from None

    solver = _fill(SolverConfig, _section(data, "solver"), "solver")
    p = solver.p if isinstance(solver.p, list) else [solver.p]
    try:
        solver.p = [float(v) for v in p]
        solver.alpha, solver.beta = float(solver.alpha), float(solver.beta)
        solver.tol_lambda, solver.tol_grad = float(solver.tol_lambda), float(solver.tol_grad)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    if not solver.p or any(not v >= 2 for v in solver.p):
        raise ConfigError(f"solver.p: every exponent must be >= 2, got {solver.p}")
    if solver.alpha < 0 or solver.beta < 0 or solver.alpha + solver.beta <= 0:
        raise ConfigError("solver: need alpha, beta >= 0 with alpha + beta > 0")
    if solver.h is not None and solver.nodes is not None:
        raise ConfigError("solver: give either h or nodes, not both")
    try:
        SolverOptions(
            max_iters=solver.max_iters,
            tol_lambda=solver.tol_lambda,
            tol_grad=solver.tol_grad,
            method=solver.method,
            init=solver.init,
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    tasks = data.get("tasks", ["solve"])
    if isinstance(tasks, str):
        tasks = [tasks]
    if not tasks:
        raise ConfigError("tasks: at least one task is required")
    bad = [t for t in tasks if t not in TASK_ORDER]
    if bad:
        raise ConfigError(f"tasks: unknown task(s) {bad}; choose from {list(TASK_ORDER)}")
    tasks = [t for t in TASK_ORDER if t in tasks]

    checks = _fill(ChecksConfig, _section(data, "checks"), "checks")
    out = _section(data, "output")
    cfg = RunConfig(
        domain=domain,
        kernel_profile=profile,
        r_j=r_j,
        solver=solver,
        tasks=tasks,
        checks=checks,
        out_dir=str(out.get("dir", "out")),
        report_name=str(out.get("report", "report.json")),
    )
    try:
        Grid(domain, cfg.spacing(), r_j)
    except ResolutionError as exc:
        raise ConfigError(f"solver.h: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: parse error{where}: {getattr(exc, 'problem', exc)}") from None
    return config_from_dict(data)


# -- report helpers --------------------------------------------------------------


def _scrub(obj, path: str, bad: list):
    """Replace non-finite floats by None, recording their paths in ``bad``."""
    if isinstance(obj, dict):
        return {k: _scrub(v, f"{path}.{k}" if path else str(k), bad) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_scrub(v, f"{path}[{i}]", bad) for i, v in enumerate(obj)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        if not math.isfinite(val):
            bad.append(path)
            return None
        return val
    return obj


def _finite_tree(obj):
    bad: list = []
    return _scrub(obj, "", bad), bad


def _eigen_entry(model: EnergyModel, rep: EigenReport) -> dict:
    entry = rep.summary()
    vals = rep.field[model.grid.interior]
    entry["min_interior"] = float(vals.min())
    entry["norm_p"] = math.exp(model._log_norm(vals, rep.p) / rep.p)
    return entry


def _write_trace(rep: EigenReport, path: Path):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "lambda", "residual"])
        for it, lam, res in rep.trace:
            w.writerow([it, repr(lam), repr(res)])


def emit_plotdata(report: dict, fields: dict, grid: Grid, out_dir) -> list[Path]:
    """Write one CSV per figure-like artifact present in the report."""
    out_dir = Path(out_dir)
    written = []
    sweep = report.get("results", {}).get("sweep")
    if sweep and sweep.get("rows"):
        path = out_dir / "sweep.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "lambda_root", "Lambda"])
            for row in sweep["rows"]:
                w.writerow([repr(row["p"]), repr(row["lambda1_root"]), repr(sweep["Lambda"])])
        written.append(path)
    else:
        log.info("no sweep results; sweep.csv not written")
    if fields.get("eigenfield") is not None:
        written.append(grid.write_csv(fields["eigenfield"], out_dir / "eigenfield.csv"))
    else:
        log.info("no eigenfield; eigenfield.csv not written")
    if fields.get("residual") is not None:
        path = out_dir / "residual.csv"
        fields["residual"].write_csv(grid, path)
        written.append(path)
    else:
        log.info("no viscosity residual; residual.csv not written")
    return written


# -- orchestration ---------------------------------------------------------------


def execute(cfg: RunConfig, out_dir=None, verbose: bool = False) -> tuple[int, dict]:
    out_dir = Path(out_dir or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = cfg.spacing()
    grid = Grid(cfg.domain, h, cfg.r_j)
    kernel = Kernel(cfg.kernel_profile, cfg.r_j, cfg.domain.dim)
    model = EnergyModel(grid, quadrature_weights(kernel, h))
    s = cfg.solver
    opts = SolverOptions(
        max_iters=s.max_iters, tol_lambda=s.tol_lambda, tol_grad=s.tol_grad, method=s.method, init=s.init
    )
    case = lambda_for(grid.r_omega, cfg.r_j)
    results: dict = {}
    fields: dict = {}
    nonconverged = False
    verified = True
    largest: EigenReport | None = None

    if "solve" in cfg.tasks:
        entries = []
        for p in s.p:
            try:
                rep = solve_first(model, p, s.alpha, s.beta, opts)
            except ConvergenceError as exc:
                log.error("%s", exc)
                rep, nonconverged = exc.report, True
            entries.append(_eigen_entry(model, rep))
            if verbose:
                _write_trace(rep, out_dir / f"trace_solve_p{p:g}.csv")
            if largest is None or rep.p >= largest.p:
                largest = rep
        results["solve"] = {"entries": entries}

    if "sweep" in cfg.tasks:
        reps = sweep_p(model, s.p, s.alpha, s.beta, opts)
        rows = []
        for rep in reps:
            nonconverged |= not rep.converged
            row = _eigen_entry(model, rep)
            row["gap"] = abs(rep.lambda1_root - case.value)
            rows.append(row)
            if verbose:
                _write_trace(rep, out_dir / f"trace_sweep_p{rep.p:g}.csv")
        gaps = [r["gap"] for r in rows]
        final_rel = gaps[-1] / case.value
        monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
        passed = final_rel < cfg.checks.sweep_rel_tol and monotone
        verified &= passed
        results["sweep"] = {
            "Lambda": case.value,
            "rows": rows,
            "final_relative_gap": final_rel,
            "gap_monotone": monotone,
            "passed": passed,
        }
        largest = reps[-1]

    if "verify-formulas" in cfg.tasks:
        checks = [check_extremal(grid, ext, case) for ext in extremal_fields(grid, case)]
        passed = all(c["passed"] for c in checks)
        verified &= passed
        results["verify-formulas"] = {"case": case.to_dict(), "test_functions": checks, "passed": passed}

    if "viscosity-check" in cfg.tasks:
        if largest is None:
            try:
                largest = solve_first(model, max(s.p), s.alpha, s.beta, opts)
            except ConvergenceError as exc:
                log.error("%s", exc)
                largest, nonconverged = exc.report, True
        vr = residual_report(largest.field, grid, cfg.r_j, case.value)
        passed = vr.sup_residual < cfg.checks.residual_tol
        verified &= passed
        results["viscosity-check"] = {"p": largest.p, "Lambda": case.value, **vr.summary(), "passed": passed}
        fields["residual"] = vr

    if largest is not None:
        fields["eigenfield"] = largest.field

    report = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "grid": {"h": h, "shape": list(grid.shape), "interior_nodes": grid.n_interior},
        "results": results,
    }
    report, bad = _finite_tree(report)
    report["non_finite"] = bad
    status = EXIT_NONCONVERGED if nonconverged else (EXIT_OK if verified else EXIT_VERIFY)
    report["exit_status"] = status
    (out_dir / cfg.report_name).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    emit_plotdata(report, fields, grid, out_dir)
    return status, report


def run(config_path, out_dir=None, verbose: bool = False) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, _ = execute(cfg, out_dir, verbose)
    return status


def verify_formulas(r_omega: float, r_j: float, h: float | None = None) -> tuple[int, dict]:
    """Closed-form Lambda plus extremal-field checks on the interval (-r_omega, r_omega)."""
    case = lambda_for(r_omega, r_j)
    h = h or min(r_j / 32, r_omega / 16)
    grid = Grid(Interval(-r_omega, r_omega), h, r_j)
    checks = [check_extremal(grid, ext, case) for ext in extremal_fields(grid, case)]
    passed = all(c["passed"] for c in checks)
    report, _ = _finite_tree(
        {"schema": SCHEMA, "case": case.to_dict(), "h": h, "test_functions": checks, "passed": passed}
    )
    return (EXIT_OK if passed else EXIT_VERIFY), report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plapmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute the tasks in a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out-dir")
    p_run.add_argument("--verbose", action="store_true")
    p_ver = sub.add_parser("verify-formulas", help="closed-form Lambda and extremal-field checks")
    p_ver.add_argument("--r-omega", type=float, required=True)
    p_ver.add_argument("--r-j", type=float, required=True)
    p_ver.add_argument("--h", type=float)
    args = parser.parse_args(argv)

    if args.command == "run":
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
        return run(args.config, args.out_dir, args.verbose)
    try:
        status, report = verify_formulas(args.r_omega, args.r_j, args.h)
    except (ValueError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(report, indent=2, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
