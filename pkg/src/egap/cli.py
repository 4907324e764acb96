"""Command-line harness: ``egap run | certify | profile | gen``.

Every experiment is described by one TOML file::

    [problem]
    family = "basis_pursuit"      # group_bp, group_bp_slack, elastic_net, sqrt_lasso, instance
    seed = 0
    m = 24
    n = 64
    sparsity = 8

    [solver]
    scheme = "1p2d"
    smoother = "auglag"           # bregman, auglag or none
    c = 0.0                       # or c_policy = "kick" / "diameter"
    max_iter = 500
    certify = true

    [reference]
    oracle = "auto"               # auto, none, lp, qp, self

``run`` writes ``trace.csv`` (one row per iteration, floats in shortest
round-trip form) and ``summary.json`` into the output directory.  Exit
codes: 0 converged, 2 iteration or inner budget exhausted, 3 certificate
failed, 64 configuration error.  Errors are reported on stderr as one line
of JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import click
import numpy as np

from . import bounds as bd
from . import problems as pb
from . import schemes as sc
from . import smoothing as sm
from .errors import SolverError
from .profile import performance_profile, read_metrics, tau_tilde

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

SCHEMA = "trace-summary/1"
CERT_SCHEMA = "certificate-report/1"

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_CERT = 3
EXIT_CONFIG = 64

# decision: exit-codes
_STATUS_EXIT = {
    sc.CONVERGED: EXIT_OK,
    sc.MAX_ITER: EXIT_BUDGET,
    sc.INNER_BUDGET: EXIT_BUDGET,
    sc.CERTIFICATE_FAILED: EXIT_CERT,
}
_INT_FIELDS = {"k", "inner_iters", "wall_ns", "n_prox", "n_A", "n_At"}


class HarnessExit(Exception):
    def __init__(self, code: int, error: str, message: str) -> None:
        super().__init__(message)
        self.code, self.error = code, error


# trace files ---------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trace_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(sc.RECORD_FIELDS)
    for rec in records:
        w.writerow([format_value(getattr(rec, name)) for name in sc.RECORD_FIELDS])
    return buf.getvalue()


def parse_trace(text: str) -> list[sc.IterationRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != sc.RECORD_FIELDS:
        raise SolverError("config", "trace header does not match the record layout")
    out = []
    for row in rows[1:]:
        vals = {}
        for name, cell in zip(rows[0], row):
            if cell == "":
                vals[name] = None
            else:
                vals[name] = int(cell) if name in _INT_FIELDS else float(cell)
        out.append(sc.IterationRecord(**vals))
    return out


def read_trace(path) -> list[sc.IterationRecord]:
    return parse_trace(Path(path).read_text())


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


# configuration -------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as err:
        raise HarnessExit(EXIT_CONFIG, "config", f"cannot read {path}: {err.strerror}") from None
    except tomllib.TOMLDecodeError as err:
        raise HarnessExit(EXIT_CONFIG, "config", f"{path}: {err}") from None


def build_problem(spec: dict, seed: int | None = None) -> pb.ConstrainedProblem:
    spec = dict(spec)
    family = spec.pop("family", None)
    if seed is not None:
        spec["seed"] = seed
    try:
        if family == "instance":
            return pb.problem_from_json(Path(spec["path"]).read_text())
        if family == "basis_pursuit":
            return pb.make_basis_pursuit(spec.get("seed", 0), spec["m"], spec["n"], spec.get("sparsity", 1))
        if family in ("group_bp", "group_bp_slack"):
            prob = pb.make_group_bp(spec.get("seed", 0), spec["n"], spec.get("m"), spec.get("n_groups"),
                                    spec.get("box", True))
            return pb.group_bp_slack(prob) if family == "group_bp_slack" else prob
        if family == "elastic_net":
            return pb.make_elastic_net(spec.get("seed", 0), spec["m"], spec["n"], spec.get("sparsity", 1),
                                       spec.get("sigma", 0.1))
        if family == "sqrt_lasso":
            return pb.make_sqrt_lasso(spec.get("seed", 0), spec["m"], spec["n"], spec.get("sparsity", 1),
                                      spec.get("lam"))
    except KeyError as err:
        raise SolverError("config", f"problem parameter {err.args[0]!r} is missing") from None
    except (OSError, ValueError) as err:
        raise SolverError("config", str(err)) from None
    raise SolverError("config", f"unknown problem family {family!r}")


def build_solver(spec: dict, problem, certify: bool | None = None,
                 max_iter: int | None = None) -> sc.SolverConfig:
    spec = dict(spec)
    if "scheme" not in spec:
        raise SolverError("config", "solver.scheme is required")
    kind = spec.pop("smoother", "none")
    center = spec.pop("center", None)
    L_bar = spec.pop("L_bar", None)
    smoother = None if kind == "none" else sm.make_smoother(problem, kind, center, L_bar)
    c = spec.pop("c", None)
    policy = spec.pop("c_policy", None)
    if policy == "kick":
        c_policy = ("kick", spec.pop("kick_s", 10.0), spec.pop("kick_mult", 1.02))
    elif policy == "diameter":
        c_policy = ("diameter",)
    elif policy is None:
        c_policy = None if c is None else ("const", float(c))
    else:
        raise SolverError("config", f"unknown c_policy {policy!r}")
    # decision: wall-clock-off
    spec.setdefault("record_wall", False)
    if certify is not None:
        spec["certify"] = certify
    if max_iter is not None:
        spec["max_iter"] = max_iter
    known = {f.name for f in fields(sc.SolverConfig)} - {"smoother", "c_policy"}
    unknown = set(spec) - known
    if unknown:
        raise SolverError("config", f"unknown solver keys: {', '.join(sorted(unknown))}")
    cfg = sc.SolverConfig(smoother=smoother, c_policy=c_policy, **spec)
    sc.validate(problem, cfg)
    return cfg


# decision: staged-self-reference
def self_reference(problem, max_iter: int = 3000, tolerances=(1e-4, 1e-6, 1e-8, 1e-10)) -> pb.Reference:
    """Run 1P2D with the AL smoother and polish the result on its support.

    The polish only returns a point that passes the KKT checks, so a loose
    run that already identifies the support is enough; the tolerance is
    tightened only when the check rejects the polished point.
    """
    smoother = sm.make_smoother(problem, sm.AUGLAG)
    last = None
    for eps in tolerances:
        cfg = sc.SolverConfig(sc.ONE_P2D, smoother, eps_f=eps, eps_x=eps, max_iter=max_iter, record_wall=False)
        x = sc.solve(problem, cfg).final.x_bar
        scale = max(1.0, float(np.max(np.abs(x))))
        # polishing is cheap next to a solve, so several support thresholds are tried
        for mult in (10.0, 3.0, 100.0):
            try:
                return pb.reference_from_support(problem, x, support_tol=mult * eps * scale)
            except SolverError as err:
                last = err
    raise last


def reference_for(problem, oracle: str = "auto") -> pb.Reference | None:
    """Reference ``(x*, y*, f*)`` from the requested oracle; ``auto`` picks what applies."""
    if oracle == "none":
        return None
    if oracle == "lp":
        return pb.reference_solve_lp(problem)
    if oracle == "qp":
        return pb.reference_solve_qp(problem)
    if oracle == "self":
        return self_reference(problem)
    if oracle != "auto":
        raise SolverError("config", f"unknown oracle {oracle!r}")
    if problem.reference is not None:
        return problem.reference
    if len(problem.blocks) == 1 and problem.blocks[0].X.kind == "all":
        if problem.term.sigma_f > 0:
            return pb.reference_solve_qp(problem)
        if problem.n <= pb.VERTEX_ENUM_MAX_N:
            try:
                return pb.reference_solve_lp(problem)
            except SolverError:
                return None
    return None


# commands ------------------------------------------------------------------

def run_experiment(config: dict, out: Path, seed: int | None = None, certify: bool | None = None,
                   max_iter: int | None = None) -> int:
    """Run one configured experiment, write its files and return the exit code."""
    problem = build_problem(config.get("problem", {}), seed)
    cfg = build_solver(config.get("solver", {}), problem, certify, max_iter)
    ref = reference_for(problem, config.get("reference", {}).get("oracle", "auto"))
    f_star = None if ref is None else ref.f
    dists: list[float] = []
    observer = None
    if ref is not None and cfg.certify:
        def observer(state):
            dists.append(float(np.linalg.norm(state.it.x_bar - ref.x)))
    trace = sc.solve(problem, cfg, f_star=f_star, observer=observer)
    report = None
    if cfg.certify:
        bset, why = bd.bound_set_for(problem, trace.header, cfg.smoother, None if ref is None else ref.y)
        if bset is None:
            report = bd.certify(trace.records, None, f_star, reason=why)
        else:
            report = bd.certify_trace(trace, bset, f_star, iterate_dist=dists or None)
            if report.status != bd.DISABLED:
                for rec in trace.records:
                    rec.feas_bound = bset.feas(rec.k, rec.gamma, rec.beta)
                    rec.obj_upper = bset.obj_upper(rec.k, rec.gamma, rec.beta)
                    rec.obj_lower = bset.obj_lower(rec.k, rec.feas_abs)
    code = _STATUS_EXIT[trace.status]
    if report is not None and report.status == bd.FAIL:
        code = EXIT_CERT
    last = trace.records[-1]
    summary = {
        "schema": SCHEMA,
        "status": trace.status,
        "exit_code": code,
        "seed": problem.meta.get("seed"),
        "iterations": last.k,
        "final": {"f_val": last.f_val, "obj_residual": last.obj_residual, "feas_abs": last.feas_abs,
                  "feas_rel": last.feas_rel},
        "reference": None if ref is None else {"f_star": ref.f, "y_star_norm": float(np.linalg.norm(ref.y)),
                                                "provenance": ref.provenance},
        "certificate": None if report is None else report.to_dict(),
        "header": trace.header,
        "events": trace.events,
        "config": config,
    }
    write_atomic(out / "trace.csv", trace_to_csv(trace.records))
    write_atomic(out / "summary.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return code


def certify_file(trace_path, spec: dict) -> tuple[dict, int]:
    """Re-check a stored trace against the bound spec; returns the report dict and exit code."""
    records = read_trace(trace_path)
    summary_path = spec.get("summary") or Path(trace_path).with_name("summary.json")
    header = {}
    if Path(summary_path).exists():
        header = json.loads(Path(summary_path).read_text()).get("header", {})
    family = spec.get("family") or header.get("bound_family") or ""
    consts = dict(spec.get("constants", {}))
    for key in ("L_bar", "K_total", "q0", "delta0"):
        if header.get(key) is not None:
            consts.setdefault("K" if key == "K_total" else key, header[key])
    warning = None
    bset = None
    if not family:
        warning = "no bound family given"
    else:
        try:
            bset = bd.make_bound_set(family, **consts)
        except SolverError as err:
            warning = str(err)
    enabled = header.get("certificates_enabled", True)
    reason = header.get("disabled_reason") if not enabled else warning
    report = bd.certify(records, bset, spec.get("f_star"), tol_rel=spec.get("tol_rel", bd.TOL_REL),
                        enabled=enabled, reason=reason)
    doc = {"schema": CERT_SCHEMA, "trace": str(trace_path), **report.to_dict()}
    if report.status == bd.DISABLED:
        doc["warning"] = report.reason
    return doc, EXIT_CERT if report.status == bd.FAIL else EXIT_OK


def _report_error(code: int, error: str, message: str) -> int:
    click.echo(json.dumps({"error": error, "message": message, "exit_code": code}), err=True)
    return code


def _guard(fn):
    try:
        return fn()
    except HarnessExit as err:
        return _report_error(err.code, err.error, str(err))
    except SolverError as err:
        return _report_error(EXIT_CONFIG, err.code, str(err))


@click.group()
def main() -> None:
    """Excessive-gap primal-dual solvers, certificates and profiles."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", default="out", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Overrides problem.seed.")
@click.option("--certify", type=click.Choice(["on", "off"]), default=None)
@click.option("--max-iter", type=int, default=None)
def run(config_path, out_dir, seed, certify, max_iter) -> None:
    """Run the experiment described by a TOML file."""
    flag = None if certify is None else certify == "on"
    code = _guard(lambda: run_experiment(load_config(config_path), Path(out_dir), seed, flag, max_iter))
    sys.exit(code)


@main.command()
@click.argument("trace_path", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="TOML bound spec: family, f_star, [constants].")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
def certify(trace_path, config_path, out_dir) -> None:
    """Check a stored trace against a bound set."""
    def go():
        doc, code = certify_file(trace_path, load_config(config_path))
        text = json.dumps(_jsonable(doc), sort_keys=True)
        out = Path(out_dir) if out_dir else Path(trace_path).parent
        write_atomic(out / "certificate.json", text + "\n")
        click.echo(text)
        return code
    try:
        sys.exit(_guard(go))
    except (OSError, ValueError) as err:
        sys.exit(_report_error(EXIT_CONFIG, "config", str(err)))


@main.command()
@click.argument("metric_files", nargs=-1, type=click.Path(dir_okay=False))
@click.option("--taus", default=None, help="Comma-separated tau grid (default 0 to tau~ in steps of 0.25).")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def profile(metric_files, taus, out_path) -> None:
    """Performance profile of long-format ``problem,solver,value`` files."""
    def go():
        if not metric_files:
            raise SolverError("no-data", "no metric files given")
        _, solvers, T = read_metrics(metric_files)
        if taus:
            grid = [float(t) for t in taus.split(",")]
        else:
            top = max(1.0, math.ceil(4 * tau_tilde(T)) / 4)
            grid = list(np.arange(0.0, top + 0.125, 0.25))
        rho = performance_profile(T, grid)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", *solvers])
        for t, row in zip(grid, rho):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        if out_path:
            write_atomic(Path(out_path), buf.getvalue())
        else:
            click.echo(buf.getvalue(), nl=False)
        return EXIT_OK
    try:
        sys.exit(_guard(go))
    except (OSError, ValueError, KeyError) as err:
        sys.exit(_report_error(EXIT_CONFIG, "config", str(err)))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", default="out", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None)
def gen(config_path, out_dir, seed) -> None:
    """Write the configured problem instance as ``instance.json``."""
    def go():
        config = load_config(config_path)
        problem = build_problem(config.get("problem", {}), seed)
        oracle = config.get("reference", {}).get("oracle", "none")
        ref = reference_for(problem, oracle)
        if ref is not None:
            problem = problem.with_reference(ref)
        write_atomic(Path(out_dir) / "instance.json", pb.problem_to_json(problem) + "\n")
        return EXIT_OK
    sys.exit(_guard(go))


if __name__ == "__main__":
    main()
