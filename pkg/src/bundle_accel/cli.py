"""Command-line harness: ``run``, ``compare`` and ``verify``.

Every run writes a CSV trace with the columns in :data:`CSV_HEADER` and a
JSON sidecar holding the configuration and a diagnostics summary. ``verify``
rebuilds the run from the sidecar, checks that it reproduces the CSV and
runs the certificate checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import diagnostics as dg
from .objectives import OptimumUnavailable, default_start, parse_objective, quadratic_optimum
from .prox_descent import InnerBudgetExhausted
from .solvers import (
    SOLVERS,
    accelerated_pbm,
    classical_pbm_single_loop,
    gradient_descent,
    nesterov_agd,
    pbm,
)

log = logging.getLogger("bundle_accel")

CSV_HEADER = ["k", "f", "gap", "inner_iters", "epsilon", "oracle_calls", "wall_ms"]
EXIT_OK, EXIT_FAILED_CHECK, EXIT_BUDGET, EXIT_CONFIG = 0, 1, 2, 3
THREADS_ENV = "BUNDLE_ACCEL_THREADS"
SLOPE_WINDOW = (100, 1000)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    objective: str = "worst-case:500"
    solver: str = "apbm"
    rho: float = 1.0
    beta: float = 0.5
    iterations: int = 1000
    seed: int | None = None
    max_inner: int | None = None
    diagnostics: bool = False
    output_path: str = "run.csv"
    step: float | None = None
    gap_tol: float | None = None
    timing: bool = False
    minorant_samples: int = 100

    def validate(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        try:
            parse_objective(self.objective)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.iterations < 1:
            raise ConfigError("iterations must be positive")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must lie in (0, 1)")
        if self.max_inner is not None and self.max_inner < 1:
            raise ConfigError("max_inner must be positive")

    def to_toml(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, str):
                text = _toml_string(value)
            elif isinstance(value, float):
                text = repr(value) if math.isfinite(value) else ("inf" if value > 0 else "-inf")
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, value in data.items():
            if value is None:
                kwargs[key] = None
            elif key in ("rho", "beta", "step", "gap_tol"):
                kwargs[key] = float(value)
            elif key in ("iterations", "seed", "max_inner", "minorant_samples"):
                if isinstance(value, float) and not value.is_integer():
                    raise ConfigError(f"{key} must be an integer")
                kwargs[key] = int(value)
            elif key in ("diagnostics", "timing"):
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be true or false")
                kwargs[key] = value
            else:
                kwargs[key] = str(value)
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file: {exc}") from None
        return cls.from_mapping(data)


def _toml_string(value: str) -> str:
    out = []
    for ch in value:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


# ---------------------------------------------------------------------------
# running

@dataclass
class Problem:
    oracle: object
    x0: np.ndarray
    x_star: np.ndarray | None
    f_star: float | None

    @property
    def dist2(self):
        if self.x_star is None:
            return None
        d = self.x0 - self.x_star
        return float(d @ d)


def build_problem(config: ExperimentConfig) -> Problem:
    oracle = parse_objective(config.objective)
    try:
        x_star, f_star = quadratic_optimum(oracle)
    except OptimumUnavailable as exc:
        log.warning("optimum unavailable for %s: %s", config.objective, exc)
        x_star, f_star = None, None
    return Problem(oracle, default_start(oracle, config.seed), x_star, f_star)


def solve(config: ExperimentConfig, problem: Problem):
    """Dispatch to the configured solver; may raise :class:`InnerBudgetExhausted`."""
    o, x0, f_star = problem.oracle, problem.x0, problem.f_star
    record = config.diagnostics
    common = dict(f_star=f_star, gap_tol=config.gap_tol)
    if config.solver == "gd":
        return gradient_descent(o, x0, config.step, config.iterations, **common)
    if config.solver == "agd":
        return nesterov_agd(o, x0, config.iterations, **common)
    if config.solver == "pbm":
        return pbm(o, x0, config.beta, config.rho, config.iterations, config.max_inner,
                   record_models=record, **common)
    if config.solver == "pbm-single":
        return classical_pbm_single_loop(o, x0, config.beta, config.rho, config.iterations, **common)
    return accelerated_pbm(o, x0, config.beta, config.rho, config.iterations, config.max_inner,
                           record_models=record, **common)


def run_certificates(config: ExperimentConfig, problem: Problem, run) -> list[dg.CertificateReport]:
    """All checks that the theory guarantees for this solver and parameter choice."""
    M = problem.oracle.smoothness
    solver = config.solver
    rho = M if solver == "agd" else config.rho
    reports = []
    if solver == "gd" or rho < M:
        return reports
    if solver in ("agd", "apbm", "pbm", "pbm-single"):
        if solver == "pbm-single":
            descents = [r for r in run.iterations if r.descent]
            reports.append(dg.check_ahpe_condition(_subrun(run, descents), rho))
        else:
            reports.append(dg.check_ahpe_condition(run, rho))
    if solver in ("pbm", "pbm-single", "apbm"):
        reports.append(dg.check_inner_bound(run, M, rho, config.beta))
    if solver in ("agd", "apbm"):
        reports.append(dg.check_coefficients(run))
        if problem.x_star is not None:
            reports.append(dg.check_potential(run, problem.x_star, rho, f_ref=problem.f_star))
            reports.append(dg.check_rate_bound(run, problem.dist2, rho))
    if run.model_snapshots:
        reports.append(dg.check_model_minorant(problem.oracle, run.model_snapshots,
                                               config.minorant_samples, config.seed or 0))
    return reports


def _subrun(run, records):
    from .solvers import RunRecord

    return RunRecord(run.solver_name, run.objective_name, run.parameters, run.f_star, list(records))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def csv_rows(run, timing: bool) -> list[list[str]]:
    return [[_fmt(r.k), _fmt(r.f), _fmt(r.gap), _fmt(r.inner_iterations), _fmt(r.epsilon),
             _fmt(r.oracle_calls), _fmt(r.wall_ms) if timing else ""]
            for r in run.iterations]


def render_csv(run, timing: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(csv_rows(run, timing))
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def summarize(config, problem, run, reports, status) -> dict:
    gaps = run.gaps()
    summary = {
        "status": status,
        "records": len(run.iterations),
        "final_f": run.iterations[-1].f,
        "final_gap": None if problem.f_star is None else float(gaps[-1]),
        "f_star": problem.f_star,
        "dist2": problem.dist2,
        "max_inner_iterations": max((r.inner_iterations for r in run.iterations), default=0),
        "loglog_slope": None,
        "certificates": [asdict(r) for r in reports],
    }
    lo, hi = SLOPE_WINDOW
    if problem.f_star is not None and len(gaps) > hi:
        try:
            summary["loglog_slope"] = dg.loglog_slope(gaps, lo, hi)
        except ValueError:
            pass
    if config.diagnostics and config.rho < problem.oracle.smoothness and config.solver not in ("gd", "agd"):
        summary["certificates_skipped"] = "rho < M: no guarantees apply"
    return summary


def execute(config: ExperimentConfig) -> tuple[int, dict]:
    """Run one experiment, write its CSV and sidecar, and return ``(exit_code, summary)``."""
    config.validate()
    problem = build_problem(config)
    status, code = "ok", EXIT_OK
    try:
        run = solve(config, problem)
    except InnerBudgetExhausted as exc:
        log.error("%s: %s", config.solver, exc)
        run, status, code = exc.run, "inner budget exhausted", EXIT_BUDGET
    reports = run_certificates(config, problem, run) if config.diagnostics and code == EXIT_OK else []
    summary = summarize(config, problem, run, reports, status)
    out = Path(config.output_path)
    atomic_write(out, render_csv(run, config.timing))
    atomic_write(sidecar_path(out), json.dumps({"config": asdict(config), "summary": summary}, indent=2) + "\n")
    for r in reports:
        log.info(r.line())
    return code, summary


# ---------------------------------------------------------------------------
# argument handling

def _add_run_flags(p: argparse.ArgumentParser, compare=False):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--objective")
    if not compare:
        p.add_argument("--solver")
        p.add_argument("--rho", type=float)
        p.add_argument("--output", dest="output_path")
    p.add_argument("--beta", type=float)
    p.add_argument("--iters", "--iterations", dest="iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-inner", dest="max_inner", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--diagnostics", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--minorant-samples", dest="minorant_samples", type=int)


def config_from_args(args, overrides=()) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        data.update({k: v for k, v in asdict(ExperimentConfig.from_toml(text)).items()})
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            data[f.name] = value
    data.update(dict(overrides))
    return ExperimentConfig.from_mapping(data)


def cmd_run(args) -> int:
    try:
        config = config_from_args(args)
        code, summary = execute(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    gap = summary["final_gap"]
    print(f"{config.solver} on {config.objective}: {summary['records'] - 1} iterations, "
          f"final gap {'n/a' if gap is None else f'{gap:.6e}'} -> {config.output_path}")
    for c in summary["certificates"]:
        print(dg.CertificateReport(**c).line())
    return code


def parse_run_specs(solvers: str, rhos: str | None) -> list[tuple[str, float | None]]:
    """Expand ``pbm,apbm@0.5`` against a rho list into ``(solver, rho)`` pairs."""
    rho_list = [float(r) for r in rhos.split(",")] if rhos else [1.0]
    specs = []
    for token in filter(None, (t.strip() for t in solvers.split(","))):
        name, _, at = token.partition("@")
        if name not in SOLVERS:
            raise ConfigError(f"unknown solver {name!r}")
        if at:
            specs.append((name, float(at)))
        elif name in ("gd", "agd"):
            specs.append((name, None))
        else:
            specs.extend((name, r) for r in rho_list)
    return specs


def _run_one(config: ExperimentConfig):
    logging.basicConfig(level=logging.WARNING)
    return execute(config)


def cmd_compare(args) -> int:
    try:
        base = config_from_args(args, {"solver": "apbm"})
        specs = parse_run_specs(args.solvers, args.rhos)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(specs) < 2:
        print("error: compare needs at least two runs", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.output_dir)
    configs = []
    for solver, rho in specs:
        label = solver if rho is None else f"{solver}_rho{rho:g}"
        cfg = ExperimentConfig(**{**asdict(base), "solver": solver,
                                  "rho": base.rho if rho is None else rho,
                                  "output_path": str(outdir / f"{label}.csv")})
        try:
            cfg.validate()
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        configs.append((label, solver, rho, cfg))

    workers = max(1, min(len(configs), int(os.environ.get(THREADS_ENV, os.cpu_count() or 1))))
    if workers == 1:
        results = [execute(c[3]) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [c[3] for c in configs]))

    rows = [["run", "solver", "rho", "final_gap", "loglog_slope", "exit_code"]]
    for (label, solver, rho, _), (code, summary) in zip(configs, results):
        rows.append([label, solver, "" if rho is None else repr(rho), _fmt(summary["final_gap"]),
                     _fmt(summary["loglog_slope"]), str(code)])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write(outdir / "summary.csv", buf.getvalue())
    width = max(len(r[0]) for r in rows)
    for r in rows:
        print(f"{r[0]:<{width}}  {r[3]:>24}  {r[4]:>22}  {r[5]}")
    return max(code for code, _ in results)


def verify_sidecar(path) -> tuple[bool, list[str]]:
    """Rebuild a run from its sidecar, compare with its CSV, run all certificates."""
    meta = json.loads(Path(path).read_text(encoding="utf-8"))
    config = ExperimentConfig.from_mapping(meta["config"])
    config.diagnostics = True
    config.validate()
    problem = build_problem(config)
    lines, ok = [], True
    try:
        run = solve(config, problem)
    except InnerBudgetExhausted as exc:
        return False, [f"FAIL  rerun                  {exc}"]
    csv_path = Path(config.output_path)
    if not csv_path.is_absolute() and not csv_path.exists():
        csv_path = Path(path).parent / csv_path.name
    with open(csv_path, newline="", encoding="utf-8") as fh:
        stored = list(csv.reader(fh))
    fresh = [CSV_HEADER] + csv_rows(run, timing=False)
    # wall-clock is not reproducible; compare everything else verbatim
    same = len(stored) == len(fresh) and all(a[:-1] == b[:-1] for a, b in zip(stored, fresh))
    ok &= same
    lines.append(f"{'PASS' if same else 'FAIL'}  {'csv_reproduced':<22} rows={len(stored) - 1}")
    reports = run_certificates(config, problem, run)
    if not reports:
        lines.append("SKIP  certificates           no guarantees apply to this solver/parameters")
    for r in reports:
        ok &= r.passed
        lines.append(r.line())
    return ok, lines


def cmd_verify(args) -> int:
    try:
        ok, lines = verify_sidecar(args.sidecar)
    except (OSError, KeyError, json.JSONDecodeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAILED_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bundle-accel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one solver and write its CSV trace")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several solvers on one objective")
    _add_run_flags(p_cmp, compare=True)
    p_cmp.add_argument("--solvers", required=True, help="comma list, e.g. pbm@1,agd,apbm@1,apbm@0.5")
    p_cmp.add_argument("--rhos", help="rho values for solvers given without @rho (default 1)")
    p_cmp.add_argument("--output-dir", default="compare_out")
    p_cmp.set_defaults(func=cmd_compare)

    p_ver = sub.add_parser("verify", help="re-run a persisted experiment and check its certificates")
    p_ver.add_argument("sidecar", help="JSON sidecar written by run")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
