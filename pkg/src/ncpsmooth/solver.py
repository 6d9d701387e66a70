"""Nonparametric smoothing Newton method.

The smoothing parameter r is appended to the unknowns.  For a problem with
unknowns x (n), slacks z (one per complementarity pair) and r, the enlarged
residual is::

    [ F(x) - z                                   ]
    [ H(x)                  (mixed problems only) ]
    [ G_r(x_c, z)                                 ]
    [ 1/2 |x_c^-|^2 + 1/2 |z^-|^2 + r^2 + eps r   ]

where x_c are the unknowns paired with F.  Newton's method on this system,
globalised by Armijo backtracking on 1/2 |residual|^2, drives r to zero on
its own.
"""

import enum
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import smoothing
from .smoothing import ThetaKernel


class SolveStatus(str, enum.Enum):
    SOLVED = "Solved"
    MAX_ITER = "MaxIter"
    STEP_TOO_SMALL = "StepTooSmall"
    LINEAR_SOLVE_FAILURE = "LinearSolveFailure"


class EvaluationError(ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LinearSolveFailure(ArithmeticError):
    def __init__(self, pivot_index, message=None):
        super().__init__(message or f"pivot {pivot_index} below threshold")
        self.pivot_index = pivot_index


class StepTooSmall(ArithmeticError):
    pass


@dataclass(frozen=True)
class EnlargedState:
    x: np.ndarray
    z: np.ndarray
    r: float

    def as_vector(self):
        return np.concatenate([self.x, self.z, [self.r]])

    @classmethod
    def from_vector(cls, v, n):
        v = np.asarray(v, dtype=float)
        return cls(v[:n].copy(), v[n:-1].copy(), float(v[-1]))

    def moved(self, direction, step):
        return EnlargedState.from_vector(self.as_vector() + step * direction, self.x.size)


@dataclass(frozen=True)
class SolverConfig:
    kernel: ThetaKernel = ThetaKernel.EXPONENTIAL
    eps_reg: float = 1e-6
    tol: float = 1e-9
    max_iter: int = 1000
    tau: float = 1e-4
    rho: float = 0.5
    min_step: float = 1e-5
    keep_nonnegative: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel", ThetaKernel.parse(self.kernel))
        if not 0.0 < self.tau < 0.5:
            raise ValueError("tau must lie in (0, 1/2)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        for name in ("eps_reg", "tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    iterations: int
    final_state: EnlargedState
    opt: float
    feas: float
    merit_history: list
    wall_time: float
    method: str = ""
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    r_history: list = field(default_factory=list)
    diverged: bool = False
    message: str = ""

    @property
    def solved(self):
        return self.status is SolveStatus.SOLVED

    @property
    def x(self):
        return self.final_state.x

    @property
    def final_r(self):
        return self.final_state.r


# -- residual and Jacobian -----------------------------------------------------

def _checked(values, what):
    values = np.asarray(values, dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise EvaluationError(f"non-finite {what} at index {bad[0]}", int(bad[0]))
    return values


def residual(problem, state, cfg):
    x, z, r = state.x, state.z, state.r
    xc = x[problem.comp_index]
    Fx = _checked(problem.F(x), "F")
    Hx = _checked(problem.H(x), "H")
    G = smoothing.kernel_value(cfg.kernel, xc, z, r)
    xm = np.minimum(xc, 0.0)
    zm = np.minimum(z, 0.0)
    last = 0.5 * xm @ xm + 0.5 * zm @ zm + r * r + cfg.eps_reg * r
    return np.concatenate([Fx - z, Hx, np.atleast_1d(G), [last]])


def jacobian(problem, state, cfg):
    x, z, r = state.x, state.z, state.r
    n, m, q = problem.n, problem.n_comp, problem.n_eq
    idx = problem.comp_index
    size = n + m + 1
    A = np.zeros((size, size))
    A[:m, :n] = _checked(problem.J(x), "Jacobian of F")
    A[:m, n:n + m] = -np.eye(m)
    if q:
        A[m:m + q, :n] = _checked(problem.JH(x), "Jacobian of H")
    d = smoothing.kernel_derivatives(cfg.kernel, x[idx], z, r)
    rows = np.arange(m + q, 2 * m + q)
    A[rows, idx] = d.d_s
    A[rows, n + np.arange(m)] = d.d_t
    A[rows, -1] = d.d_r
    A[-1, idx] = np.minimum(x[idx], 0.0)
    A[-1, n:n + m] = np.minimum(z, 0.0)
    A[-1, -1] = 2.0 * r + cfg.eps_reg
    return A


def reduced_jacobian(problem, x, z, r, kernel):
    """Jacobian of the fixed-r system [F(x) - z; H(x); G_r(x_c, z)]."""
    state = EnlargedState(np.asarray(x, float), np.asarray(z, float), float(r))
    cfg = SolverConfig(kernel=kernel)
    return jacobian(problem, state, cfg)[:-1, :-1]


# -- linear algebra --------------------------------------------------------------

def lu_solve(A, b, pivot_rtol=1e-14):
    """Solve ``A d = b`` with partially pivoted LU.

    Raises :class:`LinearSolveFailure` when a pivot of U falls below
    ``pivot_rtol * ||A||_inf``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LinearSolveFailure(-1, "non-finite entries in the linear system")
    scale = np.linalg.norm(A, np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    small = np.flatnonzero(np.abs(np.diag(lu)) <= pivot_rtol * scale)
    if small.size or scale == 0.0:
        raise LinearSolveFailure(int(small[0]) if small.size else 0)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def newton_direction(problem, state, cfg, H=None):
    if H is None:
        H = residual(problem, state, cfg)
    return lu_solve(jacobian(problem, state, cfg), -H)


# -- line search -------------------------------------------------------------------

@dataclass(frozen=True)
class LineSearchResult:
    step: float
    point: object
    residual: np.ndarray
    merit: float


def backtrack(evaluate, point, direction, merit0, slope, tau, rho, min_step,
              initial_step=1.0, admissible=None):
    """Armijo backtracking ``merit(p + s d) - merit(p) <= tau s slope``.

    ``evaluate(p, d, s)`` returns ``(trial_point, trial_residual)``; trials that
    raise, are non-finite or fail ``admissible`` are treated as rejected.
    """
    step = initial_step
    while step >= min_step:
        try:
            trial, res = evaluate(point, direction, step)
            ok = admissible is None or admissible(trial)
        except (EvaluationError, smoothing.DomainError, FloatingPointError):
            ok = False
        if ok and np.all(np.isfinite(res)):
            merit = 0.5 * float(res @ res)
            if merit - merit0 <= tau * step * slope:
                return LineSearchResult(step, trial, res, merit)
        step *= rho
    raise StepTooSmall(f"no acceptable step >= {min_step}")


def _fraction_to_boundary(values, deltas, fraction=0.995):
    neg = deltas < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, fraction * float(np.min(-values[neg] / deltas[neg])))


def armijo_search(problem, state, direction, cfg, H=None):
    """Armijo step along a Newton direction of the enlarged system.

    For an exact Newton direction the directional derivative of the merit
    function is -|H|^2.  Trial points with r <= 0 are rejected.
    """
    if H is None:
        H = residual(problem, state, cfg)
    merit0 = 0.5 * float(H @ H)
    initial = 1.0
    if cfg.keep_nonnegative:
        idx = problem.comp_index
        n = problem.n
        vals = np.concatenate([state.x[idx], state.z])
        dels = np.concatenate([direction[idx], direction[n:-1]])
        initial = _fraction_to_boundary(vals, dels)

    def evaluate(s, d, step):
        trial = s.moved(d, step)
        return trial, residual(problem, trial, cfg)

    return backtrack(evaluate, state, direction, merit0, -2.0 * merit0,
                     cfg.tau, cfg.rho, cfg.min_step, initial_step=initial,
                     admissible=lambda s: s.r > 0)


# -- driver -------------------------------------------------------------------------

def initial_state(problem, start=None, slack=None):
    x0 = problem.default_start if start is None else np.asarray(start, dtype=float)
    z0 = problem.start_slack(x0) if slack is None else np.asarray(slack, dtype=float)
    xc = x0[problem.comp_index]
    if np.any(xc <= 0) or np.any(z0 <= 0):
        raise ValueError("the starting point must be interior (x_c > 0, z > 0)")
    r0 = float(xc @ z0) / problem.n_comp
    return EnlargedState(x0.copy(), z0.copy(), r0)


def solve(problem, cfg=SolverConfig(), start=None, slack=None):
    """Run the nonparametric Newton method from an interior point.

    Never raises for numerical trouble: the outcome is in the report status.
    """
    t0 = time.perf_counter()
    state = initial_state(problem, start, slack)
    method = "theta1" if cfg.kernel is ThetaKernel.RATIONAL else "theta2"
    merits, norms, steps, rs = [], [], [], [state.r]
    status = SolveStatus.MAX_ITER
    message = ""
    k = 0
    try:
        H = residual(problem, state, cfg)
    except EvaluationError as exc:
        H = None
        message = str(exc)
    while H is not None:
        merits.append(0.5 * float(H @ H))
        norms.append(float(np.max(np.abs(H))))
        if norms[-1] <= cfg.tol:
            status = SolveStatus.SOLVED
            break
        if k >= cfg.max_iter:
            break
        try:
            d = newton_direction(problem, state, cfg, H)
        except LinearSolveFailure as exc:
            status, message = SolveStatus.LINEAR_SOLVE_FAILURE, str(exc)
            break
        try:
            ls = armijo_search(problem, state, d, cfg, H)
        except StepTooSmall as exc:
            status, message = SolveStatus.STEP_TOO_SMALL, str(exc)
            break
        state, H = ls.point, ls.residual
        assert state.r > 0
        steps.append(ls.step)
        rs.append(state.r)
        k += 1
    return SolveReport(
        status=status, iterations=k, final_state=state,
        opt=problem.opt(state.x), feas=problem.feas(state.x),
        merit_history=merits, wall_time=time.perf_counter() - t0, method=method,
        residual_history=norms, step_history=steps, r_history=rs, message=message)
