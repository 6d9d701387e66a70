"""Benchmark harness: suites of runs, performance profiles and result files."""

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import baselines, problems
from .metrics import feas_metric, opt_metric
from .solver import SolverConfig, solve
from .smoothing import ThetaKernel

__all__ = [
    "ConfigurationError", "METHOD_IDS", "DEFAULT_SIZES", "RunRecord", "ProfileCurve",
    "SuiteConfig", "opt_metric", "feas_metric", "default_cells", "projection_cells", "random_cells",
    "run_method", "run_suite", "performance_profile", "emit", "read_records",
    "ode_comparison",
]

METHOD_IDS = ("theta1", "theta2", "min", "fb", "ipm", "projection")
DEFAULT_SIZES = {
    "P1": (10, 100, 500, 1000), "P2": (10, 100, 500, 1000), "P3": (10, 100, 500, 1000),
    "P4": (4,), "P5": (4,), "P6": (7,), "P7": (5,), "P8": (10,),
}
CSV_HEADER = ("problem", "size", "method", "status", "iterations", "opt", "feas",
              "wall_time_s", "final_r")
MEASURE_FLOOR = {"time": 1e-9, "iterations": 1.0}
RK4_STEPS = 10_000


class ConfigurationError(ValueError):
    """Unknown problem or method id, or an inconsistent run request."""


@dataclass(frozen=True)
class RunRecord:
    problem: str
    size: int
    method: str
    status: str
    iterations: int
    opt: float
    feas: float
    wall_time_s: float
    final_r: Optional[float] = None

    @property
    def solved(self):
        return self.status == "Solved"

    def key(self):
        return (self.problem, self.size)


@dataclass(frozen=True)
class ProfileCurve:
    method: str
    points: tuple  # (tau, rho) pairs, tau ascending

    def rho(self, tau):
        """Fraction of problems within ratio ``tau`` of the best method."""
        value = 0.0
        for t, r in self.points:
            if t <= tau:
                value = r
        return value


@dataclass(frozen=True)
class SuiteConfig:
    tol: float = 1e-9
    max_iter: int = 1000
    eps_reg: float = 1e-6


# -- cells ----------------------------------------------------------------------------

def default_cells(sizes=None):
    """(problem id, size) pairs of the default sweep.

    ``sizes`` overrides the sizes of the families P1-P3 only.
    """
    cells = []
    for pid, default in DEFAULT_SIZES.items():
        chosen = default if sizes is None or pid not in problems.SIZED_IDS else sizes
        cells.extend((pid, int(n)) for n in chosen)
    return cells


def projection_cells(sizes=None):
    """Default projection sweep: the default sweep without P6."""
    return [cell for cell in default_cells(sizes) if cell[0] != "P6"]


def random_cells(instances, dim, seed):
    """``instances`` seeded monotone LCPs of dimension ``dim``."""
    return [("random-monotone", int(dim), int(seed) + i) for i in range(instances)]


def _resolve(cell):
    if isinstance(cell, str):
        cell = (cell,)
    pid, size, seed = (tuple(cell) + (None, 0))[:3]
    if pid not in problems.PROBLEM_IDS:
        raise ConfigurationError(f"unknown problem id {pid!r}")
    if size is None:
        size = problems.FIXED_SIZES.get(pid)
    try:
        return problems.get_problem(pid, size, seed)
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(str(exc)) from exc


def _check_methods(methods):
    for method in methods:
        if method not in METHOD_IDS:
            raise ConfigurationError(f"unknown method id {method!r}")


# -- running ----------------------------------------------------------------------------

def run_method(problem, method, cfg=SuiteConfig(), start=None):
    """Solve ``problem`` with one method id and return its SolveReport."""
    _check_methods([method])
    if method in ("theta1", "theta2"):
        scfg = SolverConfig(kernel=ThetaKernel.parse(method), eps_reg=cfg.eps_reg,
                            tol=cfg.tol, max_iter=cfg.max_iter)
        return solve(problem, scfg, start)
    return baselines.solve_baseline(problem, method, start=start, tol=cfg.tol,
                                    max_iter=cfg.max_iter)


def _record(problem, method, report):
    r = report.final_r
    return RunRecord(problem=problem.name, size=problem.n, method=method,
                     status=report.status.value, iterations=report.iterations,
                     opt=float(report.opt), feas=float(report.feas),
                     wall_time_s=float(report.wall_time),
                     final_r=None if r is None or math.isnan(r) else float(r))


def run_suite(cells, methods, cfg=SuiteConfig(), repeats=1, keep_reports=False):
    """One record per (cell, method), sorted by problem then method.

    Cells are problem ids, (id, size) or (id, size, seed) tuples.  All ids
    are checked before anything runs.  With ``repeats > 1`` the wall time is
    averaged over repeated solves.
    """
    methods = list(methods)
    _check_methods(methods)
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    built = [_resolve(cell) for cell in cells]
    records, reports = [], {}
    for problem in built:
        for method in methods:
            if method == "projection" and not problem.is_pure:
                continue
            times = []
            for _ in range(repeats):
                report = run_method(problem, method, cfg)
                times.append(report.wall_time)
            rec = _record(problem, method, report)
            if repeats > 1:
                rec = RunRecord(**{**asdict(rec), "wall_time_s": float(np.mean(times))})
            records.append(rec)
            reports[(problem.name, problem.n, method)] = report
    records.sort(key=lambda r: (r.problem, r.size, _method_order(r.method)))
    if keep_reports:
        return records, reports
    return records


# -- performance profiles ------------------------------------------------------------------

def _method_order(method):
    if method in METHOD_IDS:
        return (0, METHOD_IDS.index(method), "")
    return (1, 0, method)


def performance_profile(records, measure="time"):
    """Performance-profile curves over the pooled grid of finite performance ratios.

    Unsolved runs get ratio +inf, so a curve ends at the method's solve
    fraction.
    """
    if measure in ("iters", "iteration"):
        measure = "iterations"
    if measure not in MEASURE_FLOOR:
        raise ConfigurationError(f"unknown measure {measure!r}")
    records = list(records)
    if not records:
        raise ValueError("no records to profile")
    table = {}
    for rec in records:
        key = (rec.key(), rec.method)
        if key in table:
            raise ValueError(f"duplicate record for {key}")
        value = rec.wall_time_s if measure == "time" else float(rec.iterations)
        table[key] = max(value, MEASURE_FLOOR[measure]) if rec.solved else math.inf
    probs = sorted({k for k, _ in table})
    methods = sorted({m for _, m in table}, key=_method_order)
    ratios = {}
    for p in probs:
        best = min(table.get((p, m), math.inf) for m in methods)
        for m in methods:
            t = table.get((p, m), math.inf)
            ratios[(p, m)] = t / best if math.isfinite(t) else math.inf
    grid = sorted({r for r in ratios.values() if math.isfinite(r)} | {1.0})
    curves = []
    for m in methods:
        mine = np.array([ratios[(p, m)] for p in probs])
        points = tuple((float(tau), float(np.mean(mine <= tau))) for tau in grid)
        curves.append(ProfileCurve(m, points))
    return curves


# -- files -------------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _json_float(value):
    if value is None or math.isfinite(value):
        return value
    return str(value)


def emit(items, fmt, path):
    """Write records or profile curves as CSV or JSON to ``path``."""
    items = list(items)
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown format {fmt!r}")
    curves = bool(items) and isinstance(items[0], ProfileCurve)
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "json":
                if curves:
                    payload = [{"method": c.method, "points": [[t, r] for t, r in c.points]}
                               for c in items]
                else:
                    payload = [{k: _json_float(v) if isinstance(v, float) else v
                                for k, v in asdict(rec).items()} for rec in items]
                json.dump(payload, fh, indent=1)
                fh.write("\n")
                return
            writer = csv.writer(fh, lineterminator="\n")
            if curves:
                writer.writerow(("method", "tau", "rho"))
                for c in items:
                    for t, r in c.points:
                        writer.writerow((c.method, _fmt(t), _fmt(r)))
                return
            writer.writerow(CSV_HEADER)
            for rec in items:
                writer.writerow([_fmt(getattr(rec, name)) for name in CSV_HEADER])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def _parse_record(row):
    out = {}
    for name in CSV_HEADER:
        raw = row[name]
        if name in ("size", "iterations"):
            out[name] = int(raw)
        elif name in ("problem", "method", "status"):
            out[name] = str(raw)
        elif raw in ("", None):
            out[name] = None
        else:
            out[name] = float(raw)
    return RunRecord(**out)


def read_records(path):
    """Parse a record file written by :func:`emit` (format from the suffix)."""
    with open(path, newline="") as fh:
        if os.fspath(path).endswith(".json"):
            return [_parse_record(row) for row in json.load(fh)]
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [_parse_record(row) for row in reader]


# -- ODE example ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeComparison:
    t: np.ndarray
    x_lcp: np.ndarray
    x_rk4: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    report: object

    @property
    def max_abs_error(self):
        return float(np.max(np.abs(self.x_lcp - self.x_rk4)))

    @property
    def max_complementarity(self):
        return float(np.max(np.abs(self.x_plus * self.x_minus)))

    def rows(self):
        return list(zip(self.t, self.x_lcp, self.x_rk4))


def ode_comparison(N, method="theta2", cfg=SuiteConfig(), rk4_steps=RK4_STEPS):
    """Solve the ODE example on an N-point grid and sample RK4 on that grid."""
    _check_methods([method])
    spec, problem = problems.build_ode_lcp(N)
    report = run_method(problem, method, cfg)
    x, x_plus = spec.reconstruct(report.x)
    t_ref, x_ref, _ = problems.rk4_reference(spec.x0, spec.dx0, spec.h * spec.N, rk4_steps)
    x_rk4 = np.interp(spec.t, t_ref, x_ref)
    return OdeComparison(spec.t, x, x_rk4, x_plus, np.asarray(report.x, dtype=float), report)


def write_ode(comparison, path):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t", "x_lcp", "x_rk4"))
            for row in comparison.rows():
                writer.writerow([_fmt(float(v)) for v in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc
