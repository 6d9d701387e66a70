"""Comparison methods: projection, Newton-min, Fischer-Burmeister, interior point.

The Newton-type methods work on the same slack formulation as the smoothing
solver, with unknowns (x, z) and residual::

    [ F(x) - z ; H(x) ; phi(x_c, z) ]

where phi is an NCP-function (min or Fischer-Burmeister), so every method
starts from the same (x0, z0) pair.  The projection method iterates on x alone
and only handles plain NCPs.
"""

import enum
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .solver import (EnlargedState, EvaluationError, LinearSolveFailure, SolveReport,
                     SolveStatus, StepTooSmall, backtrack, lu_solve)

PROJECTION_LAMBDAS = (0.1, 1.0, 10.0, 20.0, 50.0, 100.0)
DIVERGENCE_FACTOR = 1e6
_SQRT_HALF = math.sqrt(0.5)


class BaselineMethod(str, enum.Enum):
    PROJECTION = "projection"
    NEWTON_MIN = "min"
    FISCHER_BURMEISTER = "fb"
    INTERIOR_POINT = "ipm"


@dataclass(frozen=True)
class BaselineConfig:
    """Settings for one comparison method.

    ``lam`` belongs to the projection method; ``sigma`` and
    ``frac_to_boundary`` to the interior-point method.  Use :meth:`for_method`
    to get the defaults filled in.
    """

    method: BaselineMethod
    lam: Optional[float] = None
    sigma: Optional[float] = None
    frac_to_boundary: Optional[float] = None
    tol: float = 1e-9
    max_iter: int = 1000
    tau: float = 1e-4
    rho: float = 0.5
    min_step: float = 1e-5

    def __post_init__(self):
        method = BaselineMethod(self.method)
        object.__setattr__(self, "method", method)
        is_proj = method is BaselineMethod.PROJECTION
        is_ipm = method is BaselineMethod.INTERIOR_POINT
        if (self.lam is not None) != is_proj:
            raise ValueError("lam is required for, and only for, the projection method")
        if ((self.sigma is not None) != is_ipm or (self.frac_to_boundary is not None) != is_ipm):
            raise ValueError("sigma and frac_to_boundary belong to the interior-point method only")
        if is_proj and not self.lam > 0:
            raise ValueError("lam must be positive")
        if is_ipm and not (0 < self.sigma < 1 and 0 < self.frac_to_boundary < 1):
            raise ValueError("sigma and frac_to_boundary must lie in (0, 1)")
        if not 0.0 < self.tau < 0.5:
            raise ValueError("tau must lie in (0, 1/2)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not (self.tol > 0 and self.min_step > 0):
            raise ValueError("tol and min_step must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")

    @classmethod
    def for_method(cls, method, **overrides):
        method = BaselineMethod(method)
        defaults = {}
        if method is BaselineMethod.PROJECTION:
            defaults["lam"] = 1.0
        elif method is BaselineMethod.INTERIOR_POINT:
            defaults.update(sigma=0.1, frac_to_boundary=0.995)
        defaults.update(overrides)
        return cls(method=method, **defaults)


# -- NCP-functions -----------------------------------------------------------------

def phi_fb(a, b):
    """Fischer-Burmeister function sqrt(a^2 + b^2) - (a + b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.hypot(a, b) - (a + b)


def phi_fb_partials(a, b):
    """An element of the generalized gradient of :func:`phi_fb`.

    At the origin the symmetric pair (sqrt(1/2) - 1, sqrt(1/2) - 1) is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    norm = np.hypot(a, b)
    origin = norm == 0.0
    safe = np.where(origin, 1.0, norm)
    da = np.where(origin, _SQRT_HALF, a / safe) - 1.0
    db = np.where(origin, _SQRT_HALF, b / safe) - 1.0
    return da, db


def min_selection(a, b):
    """Row selection for min(a, b): True where the ``a`` row is taken.

    Ties go to ``b`` (the F side).
    """
    return np.asarray(a, dtype=float) < np.asarray(b, dtype=float)


# -- shared plumbing -----------------------------------------------------------------

def _start(problem, start, slack):
    x0 = problem.default_start if start is None else np.asarray(start, dtype=float)
    z0 = problem.start_slack(x0) if slack is None else np.asarray(slack, dtype=float)
    return x0.copy(), z0.copy()


def _report(problem, status, k, x, z, r, merits, norms, steps, t0, method,
            diverged=False, message=""):
    return SolveReport(
        status=status, iterations=k, final_state=EnlargedState(x, z, float(r)),
        opt=problem.opt(x), feas=problem.feas(x), merit_history=merits,
        wall_time=time.perf_counter() - t0, method=method, residual_history=norms,
        step_history=steps, diverged=diverged, message=message)


def _base_rows(problem, x, z):
    Fx = problem.F(x)
    Hx = problem.H(x)
    if not (np.all(np.isfinite(Fx)) and np.all(np.isfinite(Hx))):
        raise EvaluationError("non-finite F or H")
    return np.concatenate([Fx - z, Hx])


def _base_jacobian(problem):
    n, m, q = problem.n, problem.n_comp, problem.n_eq

    def build(x):
        A = np.zeros((n + m, n + m))
        A[:m, :n] = problem.J(x)
        A[:m, n:] = -np.eye(m)
        if q:
            A[m:m + q, :n] = problem.JH(x)
        return A
    return build


# -- semismooth Newton (min and FB) ----------------------------------------------------

def _ncp_residual(problem, v, kind):
    n = problem.n
    x, z = v[:n], v[n:]
    xc = x[problem.comp_index]
    phi = np.minimum(xc, z) if kind is BaselineMethod.NEWTON_MIN else phi_fb(xc, z)
    return np.concatenate([_base_rows(problem, x, z), phi])


def _ncp_jacobian(problem, v, kind, build):
    n, m, q = problem.n, problem.n_comp, problem.n_eq
    x, z = v[:n], v[n:]
    xc = x[problem.comp_index]
    A = build(x)
    if kind is BaselineMethod.NEWTON_MIN:
        take_x = min_selection(xc, z)
        da, db = take_x.astype(float), (~take_x).astype(float)
    else:
        da, db = phi_fb_partials(xc, z)
    rows = m + q + np.arange(m)
    A[rows, problem.comp_index] = da
    A[rows, n + np.arange(m)] = db
    return A


def _semismooth_newton(problem, cfg, start, slack):
    t0 = time.perf_counter()
    kind = cfg.method
    build = _base_jacobian(problem)
    x0, z0 = _start(problem, start, slack)
    v = np.concatenate([x0, z0])
    n = problem.n
    merits, norms, steps = [], [], []
    status, message, k = SolveStatus.MAX_ITER, "", 0

    def evaluate(point, d, step):
        trial = point + step * d
        return trial, _ncp_residual(problem, trial, kind)

    try:
        R = _ncp_residual(problem, v, kind)
    except EvaluationError as exc:
        R, message = None, str(exc)
    while R is not None:
        merit = 0.5 * float(R @ R)
        merits.append(merit)
        norms.append(float(np.max(np.abs(R))))
        if norms[-1] <= cfg.tol:
            status = SolveStatus.SOLVED
            break
        if k >= cfg.max_iter:
            break
        try:
            d = lu_solve(_ncp_jacobian(problem, v, kind, build), -R)
            ls = backtrack(evaluate, v, d, merit, -2.0 * merit, cfg.tau, cfg.rho, cfg.min_step)
        except LinearSolveFailure as exc:
            status, message = SolveStatus.LINEAR_SOLVE_FAILURE, str(exc)
            break
        except StepTooSmall as exc:
            status, message = SolveStatus.STEP_TOO_SMALL, str(exc)
            break
        v, R = ls.point, ls.residual
        steps.append(ls.step)
        k += 1
    return _report(problem, status, k, v[:n], v[n:], math.nan, merits, norms, steps,
                   t0, kind.value, message=message)


def newton_min_solve(problem, cfg=None, start=None, slack=None):
    """Semismooth Newton on min(x_c, z) = 0 with Armijo backtracking."""
    cfg = cfg or BaselineConfig.for_method(BaselineMethod.NEWTON_MIN)
    if cfg.method is not BaselineMethod.NEWTON_MIN:
        raise ValueError("config is not for the Newton-min method")
    return _semismooth_newton(problem, cfg, start, slack)


def fb_solve(problem, cfg=None, start=None, slack=None):
    """Semismooth Newton on the Fischer-Burmeister reformulation."""
    cfg = cfg or BaselineConfig.for_method(BaselineMethod.FISCHER_BURMEISTER)
    if cfg.method is not BaselineMethod.FISCHER_BURMEISTER:
        raise ValueError("config is not for the Fischer-Burmeister method")
    return _semismooth_newton(problem, cfg, start, slack)


# -- interior point ----------------------------------------------------------------------

def _max_step(values, deltas, fraction):
    neg = deltas < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, fraction * float(np.min(-values[neg] / deltas[neg])))


def ipm_solve(problem, cfg=None, start=None, slack=None):
    """Primal-dual damped Newton on [F(x) - z; H(x); x_c z - r].

    The target is reset every iteration to r = sigma * <x_c, z> / m.  Steps are
    capped by the fraction-to-boundary rule and then backtracked on
    1/2 |H_r|^2.  Iterates stay strictly interior.
    """
    cfg = cfg or BaselineConfig.for_method(BaselineMethod.INTERIOR_POINT)
    if cfg.method is not BaselineMethod.INTERIOR_POINT:
        raise ValueError("config is not for the interior-point method")
    t0 = time.perf_counter()
    n, m, q = problem.n, problem.n_comp, problem.n_eq
    idx = problem.comp_index
    x, z = _start(problem, start, slack)
    if np.any(x[idx] <= 0) or np.any(z <= 0):
        raise ValueError("the interior-point method needs x_c > 0 and z > 0")
    build = _base_jacobian(problem)
    merits, norms, steps = [], [], []
    status, message, k = SolveStatus.MAX_ITER, "", 0
    mu = float(x[idx] @ z) / m

    def rows(v, r):
        xv, zv = v[:n], v[n:]
        return np.concatenate([_base_rows(problem, xv, zv), xv[idx] * zv - r])

    def interior(v):
        return bool(np.all(v[idx] > 0) and np.all(v[n:] > 0))

    v = np.concatenate([x, z])
    try:
        base = _base_rows(problem, x, z)
    except EvaluationError as exc:
        base, message = None, str(exc)
    while base is not None:
        x, z = v[:n], v[n:]
        mu = float(x[idx] @ z) / m
        feas = float(np.max(np.abs(base))) if base.size else 0.0
        norms.append(max(feas, float(np.max(np.abs(x[idx] * z)))))
        if mu <= cfg.tol and feas <= cfg.tol:
            status = SolveStatus.SOLVED
            break
        if k >= cfg.max_iter:
            break
        r = cfg.sigma * mu
        R = np.concatenate([base, x[idx] * z - r])
        merit = 0.5 * float(R @ R)
        merits.append(merit)
        A = build(x)
        rows_c = m + q + np.arange(m)
        A[rows_c, idx] = z
        A[rows_c, n + np.arange(m)] = x[idx]
        try:
            d = lu_solve(A, -R)
            first = _max_step(np.concatenate([x[idx], z]),
                              np.concatenate([d[idx], d[n:]]), cfg.frac_to_boundary)
            ls = backtrack(lambda p, dd, s: (p + s * dd, rows(p + s * dd, r)), v, d,
                           merit, -2.0 * merit, cfg.tau, cfg.rho, cfg.min_step,
                           initial_step=first, admissible=interior)
        except LinearSolveFailure as exc:
            status, message = SolveStatus.LINEAR_SOLVE_FAILURE, str(exc)
            break
        except StepTooSmall as exc:
            status, message = SolveStatus.STEP_TOO_SMALL, str(exc)
            break
        v = ls.point
        base = ls.residual[:m + q]
        steps.append(ls.step)
        k += 1
    return _report(problem, status, k, v[:n], v[n:], mu, merits, norms, steps, t0,
                   BaselineMethod.INTERIOR_POINT.value, message=message)


# -- projection ----------------------------------------------------------------------------

def projection_solve(problem, cfg=None, start=None):
    """Fixed-point iteration x <- max(0, x - F(x) / lam) on a plain NCP.

    Stops once both Opt and Feas are at most ``tol``.  If Opt grows by a
    factor of 1e6 over its starting value the run ends as MaxIter with the
    divergence flag set.
    """
    cfg = cfg or BaselineConfig.for_method(BaselineMethod.PROJECTION)
    if cfg.method is not BaselineMethod.PROJECTION:
        raise ValueError("config is not for the projection method")
    if not problem.is_pure:
        raise ValueError("the projection method handles plain NCPs only")
    t0 = time.perf_counter()
    x = (problem.default_start if start is None else np.asarray(start, dtype=float)).copy()
    norms = []
    status, message, diverged, k = SolveStatus.MAX_ITER, "", False, 0
    opt0 = None
    while True:
        Fx = problem.F(x)
        if not np.all(np.isfinite(Fx)):
            diverged, message = True, "non-finite F"
            break
        opt, feas = problem.opt(x), problem.feas(x)
        norms.append(max(opt, feas))
        if opt0 is None:
            opt0 = max(opt, np.finfo(float).tiny)
        if opt <= cfg.tol and feas <= cfg.tol:
            status = SolveStatus.SOLVED
            break
        if opt > DIVERGENCE_FACTOR * opt0:
            diverged, message = True, "Opt grew by more than 1e6 over its start"
            break
        if k >= cfg.max_iter:
            break
        x = np.maximum(0.0, x - Fx / cfg.lam)
        k += 1
    return _report(problem, status, k, x, Fx, math.nan, [], norms, [], t0, BaselineMethod.PROJECTION.value,
                   diverged=diverged, message=message)


@dataclass(frozen=True)
class SweepResult:
    best_lambda: float
    best: SolveReport
    reports: dict


def projection_sweep(problem, lambdas=PROJECTION_LAMBDAS, start=None, **overrides):
    """Run the projection method for each lambda and keep the fastest solve.

    When nothing converges, the run with the smallest final Opt is reported.
    """
    if not lambdas:
        raise ValueError("need at least one lambda")
    reports = {}
    for lam in lambdas:
        cfg = BaselineConfig.for_method(BaselineMethod.PROJECTION, lam=float(lam), **overrides)
        reports[float(lam)] = projection_solve(problem, cfg, start)
    solved = [lam for lam, rep in reports.items() if rep.solved]
    if solved:
        best = min(solved, key=lambda lam: reports[lam].iterations)
    else:
        best = min(reports, key=lambda lam: reports[lam].opt
                   if np.isfinite(reports[lam].opt) else math.inf)
    return SweepResult(best, reports[best], reports)


def solve_baseline(problem, method, start=None, slack=None, **overrides):
    """Dispatch on a method id ("min", "fb", "ipm" or "projection")."""
    method = BaselineMethod(method)
    if method is BaselineMethod.PROJECTION:
        return projection_sweep(problem, start=start, **overrides).best
    cfg = BaselineConfig.for_method(method, **overrides)
    if method is BaselineMethod.NEWTON_MIN:
        return newton_min_solve(problem, cfg, start, slack)
    if method is BaselineMethod.FISCHER_BURMEISTER:
        return fb_solve(problem, cfg, start, slack)
    return ipm_solve(problem, cfg, start, slack)
