"""Complementarity test instances.

Every instance is an :class:`NcpProblem`.  A plain NCP pairs each unknown
``x_i`` with ``F_i(x)``.  The geochemical model is a mixed problem: only the
unknowns listed in ``comp_index`` are paired with ``F``, and the remaining
degrees of freedom are pinned by equality rows ``H(x) = 0``.
"""

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .metrics import feas_metric, opt_metric


class DomainClampWarning(RuntimeWarning):
    """An evaluator clamped its argument into the map's domain."""


class InconsistentParametersError(ValueError):
    """No case of the closed-form analysis applies to the parameters."""


@dataclass(frozen=True, eq=False)
class NcpProblem:
    name: str
    n: int
    eval_F: Callable[[np.ndarray], np.ndarray]
    eval_J: Callable[[np.ndarray], np.ndarray]
    default_start: np.ndarray
    known_solutions: tuple = ()
    comp_index: Optional[np.ndarray] = None
    eval_H: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eval_JH: Optional[Callable[[np.ndarray], np.ndarray]] = None
    default_slack: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        idx = np.arange(self.n) if self.comp_index is None else np.asarray(self.comp_index, dtype=int)
        object.__setattr__(self, "comp_index", idx)
        object.__setattr__(self, "default_start", np.asarray(self.default_start, dtype=float))
        if (self.eval_H is None) != (self.eval_JH is None):
            raise ValueError("eval_H and eval_JH must be given together")
        if not 0 < self.n_comp <= self.n:
            raise ValueError("need between 1 and n complementarity variables")
        if (self.eval_H is None) != (self.n_eq == 0):
            raise ValueError("eval_H is required exactly when some variables are free")

    @property
    def n_comp(self):
        return int(self.comp_index.size)

    @property
    def n_eq(self):
        return self.n - self.n_comp

    @property
    def is_pure(self):
        return self.eval_H is None

    def F(self, x):
        return np.asarray(self.eval_F(np.asarray(x, dtype=float)), dtype=float)

    def J(self, x):
        return np.asarray(self.eval_J(np.asarray(x, dtype=float)), dtype=float)

    def H(self, x):
        if self.eval_H is None:
            return np.zeros(0)
        return np.asarray(self.eval_H(np.asarray(x, dtype=float)), dtype=float)

    def JH(self, x):
        if self.eval_JH is None:
            return np.zeros((0, self.n))
        return np.asarray(self.eval_JH(np.asarray(x, dtype=float)), dtype=float)

    def start_slack(self, x0):
        """Interior slack for ``x0``: the stored default or max(F(x0), 1)."""
        if self.default_slack is not None:
            return np.asarray(self.default_slack, dtype=float).copy()
        return np.maximum(self.F(x0), 1.0)

    def opt(self, x):
        x = np.asarray(x, dtype=float)
        return opt_metric(x[self.comp_index], self.F(x))

    def feas(self, x):
        x = np.asarray(x, dtype=float)
        return feas_metric(x[self.comp_index], self.F(x))


# -- tridiagonal families P1-P3 ------------------------------------------------

def _second_difference(x):
    y = 2.0 * x
    y[1:] -= x[:-1]
    y[:-1] -= x[1:]
    return y


def _tridiagonal(n, diag):
    J = np.diag(diag)
    idx = np.arange(n - 1)
    J[idx, idx + 1] = -1.0
    J[idx + 1, idx] = -1.0
    return J


def _ones_start(n):
    return np.ones(n)


def build_p1_p2(variant, n):
    variant = variant.upper()
    if variant not in ("P1", "P2"):
        raise ValueError(f"unknown variant {variant!r}")
    if n < 1:
        raise ValueError("dimension must be positive")
    i = np.arange(1, n + 1)
    b = (-1.0) ** i
    if variant == "P2":
        b = b / np.sqrt(i)

    def F(x):
        return _second_difference(x) + x**3 / 3.0 - b

    def J(x):
        return _tridiagonal(n, 2.0 + x**2)

    return NcpProblem(variant, n, F, J, _ones_start(n), metadata={"b": b})


def build_p3(n):
    if n < 1:
        raise ValueError("dimension must be positive")
    shift = np.arange(1, n + 1) - math.pi / 2.0

    def F(x):
        return _second_difference(x) + np.arctan(x) + shift

    def J(x):
        return _tridiagonal(n, 2.0 + 1.0 / (1.0 + x**2))

    return NcpProblem("P3", n, F, J, _ones_start(n))


# -- Kojima-Shindo -------------------------------------------------------------

def build_kojima_shindo(variant):
    """Degenerate (P4) and non-degenerate (P5) Kojima-Shindo problems.

    The two variants differ only in the x4 coefficient and constant of the
    third component.
    """
    variant = variant.upper()
    if variant in ("P4", "P4_DEGENERATE"):
        name, c34, c3 = "P4", 9.0, -9.0
    elif variant in ("P5", "P5_NONDEGENERATE"):
        name, c34, c3 = "P5", 3.0, -1.0
    else:
        raise ValueError(f"unknown variant {variant!r}")

    def F(x):
        x1, x2, x3, x4 = x
        return np.array([
            3 * x1**2 + 2 * x1 * x2 + 2 * x2**2 + x3 + 3 * x4 - 6,
            2 * x1**2 + x1 + x2**2 + 10 * x3 + 2 * x4 - 2,
            3 * x1**2 + x1 * x2 + 2 * x2**2 + 2 * x3 + c34 * x4 + c3,
            x1**2 + 3 * x2**2 + 2 * x3 + 3 * x4 - 3,
        ])

    def J(x):
        x1, x2, _, _ = x
        return np.array([
            [6 * x1 + 2 * x2, 2 * x1 + 4 * x2, 1.0, 3.0],
            [4 * x1 + 1, 2 * x2, 10.0, 2.0],
            [6 * x1 + x2, x1 + 4 * x2, 2.0, c34],
            [2 * x1, 6 * x2, 2.0, 3.0],
        ])

    x_star = np.array([math.sqrt(6.0) / 2.0, 0.0, 0.0, 0.5])
    sols = [(x_star, F(x_star))]
    if name == "P4":
        x_2star = np.array([1.0, 0.0, 3.0, 0.0])
        sols.append((x_2star, F(x_2star)))
    return NcpProblem(name, 4, F, J, _ones_start(4), known_solutions=tuple(sols))


# -- P6 ------------------------------------------------------------------------

_P6_MATRIX = np.array([
    [2, 0, -1, 0, 1, 3, 0],
    [0, 1, 0, 0, 2, 1, -1],
    [-1, 0, 2, 1, 1, 2, -4],
    [0, 0, 1, 1, 1, -1, 0],
    [-1, -2, -1, -1, 0, 0, 0],
    [-3, -1, -2, 1, 0, 0, 0],
    [0, 1, 4, 0, 0, 0, 0],
], dtype=float)
_P6_CONST = np.array([-1.0, -3.0, 1.0, -1.0, 5.0, 4.0, -1.5])
# printed to 4-5 digits; the exact point is (3, 23, 0, 6, 5, 0, 0) / 11
P6_LISTED_SOLUTION = np.array([0.2727, 2.0909, 0.0, 0.54545, 0.4545, 0.0, 0.0])


def build_p6():
    def F(x):
        return _P6_MATRIX @ x + _P6_CONST

    def J(x):
        return _P6_MATRIX.copy()

    sols = ((P6_LISTED_SOLUTION, F(P6_LISTED_SOLUTION)),)
    return NcpProblem("P6", 7, F, J, _ones_start(7), known_solutions=sols)


# -- Nash-Cournot --------------------------------------------------------------

NASH_PARAMS = {
    "P7": dict(
        c=[10, 8, 6, 4, 2], b=[1.2, 1.1, 1.0, 0.9, 0.8], L=[5] * 5, gamma=1.1),
    "P8": dict(
        c=[5, 3, 8, 5, 1, 3, 7, 4, 6, 3],
        b=[1.2, 1.0, 0.9, 0.6, 1.5, 1.0, 0.7, 1.1, 0.95, 0.75],
        L=[10] * 10, gamma=1.2),
}

NASH_FLOOR = 1e-12


def nash_marginal_cost(x, c, b, L):
    """Derivative of c x + b/(1+b) L^(1/b) x^((b+1)/b)."""
    return c + (L * x) ** (1.0 / b)


def nash_price(Q, gamma):
    return 5000.0 ** (1.0 / gamma) * Q ** (-1.0 / gamma)


def build_nash_cournot(variant):
    variant = variant.upper()
    key = {"P7": "P7", "P7_N5": "P7", "P8": "P8", "P8_N10": "P8"}.get(variant)
    if key is None:
        raise ValueError(f"unknown variant {variant!r}")
    p = NASH_PARAMS[key]
    c = np.asarray(p["c"], dtype=float)
    b = np.asarray(p["b"], dtype=float)
    L = np.asarray(p["L"], dtype=float)
    g = float(p["gamma"])
    k = 5000.0 ** (1.0 / g)
    n = c.size

    def clamp(x):
        if np.any(x < NASH_FLOOR):
            warnings.warn("Nash-Cournot argument clamped to the positive orthant",
                          DomainClampWarning, stacklevel=3)
            x = np.maximum(x, NASH_FLOOR)
        return x

    def F(x):
        x = clamp(np.asarray(x, dtype=float))
        Q = x.sum()
        P = k * Q ** (-1.0 / g)
        dP = -(1.0 / g) * k * Q ** (-1.0 / g - 1.0)
        return nash_marginal_cost(x, c, b, L) - P - x * dP

    def J(x):
        x = clamp(np.asarray(x, dtype=float))
        Q = x.sum()
        dP = -(1.0 / g) * k * Q ** (-1.0 / g - 1.0)
        d2P = (1.0 / g) * (1.0 / g + 1.0) * k * Q ** (-1.0 / g - 2.0)
        Jm = -dP - np.outer(x, np.full(n, d2P))
        Jm[np.diag_indices(n)] += (1.0 / b) * L ** (1.0 / b) * x ** (1.0 / b - 1.0) - dP
        return Jm

    return NcpProblem(key, n, F, J, _ones_start(n),
                      metadata={"c": c, "b": b, "L": L, "gamma": g})


# -- random strongly monotone LCPs ----------------------------------------------

@dataclass(frozen=True)
class RandomMonotoneSpec:
    """Size and seed of a random instance.

    Entries are drawn with numpy's PCG64 bit generator, so a (n, seed) pair
    names the same instance on every platform.
    """

    n: int
    seed: int

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(int(data["n"]), int(data["seed"]))

    def to_json(self):
        return json.dumps({"n": self.n, "seed": self.seed})


def random_monotone_data(spec):
    """Return (A, B, D, q) for ``spec``."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n
    A = rng.uniform(-5.0, 5.0, size=(n, n))
    upper = np.triu(rng.uniform(-5.0, 5.0, size=(n, n)), k=1)
    B = upper - upper.T
    D = np.diag(rng.uniform(0.0, 3.0, size=n))
    q = rng.uniform(-500.0, 0.0, size=n)
    return A, B, D, q


def build_random_monotone(spec):
    if spec.n < 1:
        raise ValueError("dimension must be positive")
    A, B, D, q = random_monotone_data(spec)
    M = A @ A.T + B + D

    def F(x):
        return M @ x + q

    def J(x):
        return M.copy()

    return NcpProblem(f"random-monotone[{spec.seed}]", spec.n, F, J, _ones_start(spec.n),
                      metadata={"M": M, "q": q, "seed": spec.seed})


# -- geochemical 2-salts model --------------------------------------------------

@dataclass(frozen=True)
class GeoChemParams:
    T: tuple = (2.0, 6.0)
    K: tuple = (37.5837, 7.6208)

    def __post_init__(self):
        if any(k <= 0 for k in self.K):
            raise ValueError("equilibrium constants must be positive")
        if any(t < 0 for t in self.T):
            raise ValueError("total concentrations must be nonnegative")


GEOCHEM_START = np.array([3.0, 1.0, 4.0, 5.0, 6.0])
GEOCHEM_SLACK = np.array([1.0, 1.0])


def build_geochem(params=GeoChemParams()):
    """Unknowns (x1, x2, x3, p1, p2); p is paired with K - x_{1,2} x3.

    Mass balance rows T - x - p = 0 and x3 = x1 + x2 close the system.
    """
    T1, T2 = map(float, params.T)
    K1, K2 = map(float, params.K)

    def F(v):
        return np.array([K1 - v[0] * v[2], K2 - v[1] * v[2]])

    def J(v):
        return np.array([[-v[2], 0.0, -v[0], 0.0, 0.0],
                         [0.0, -v[2], -v[1], 0.0, 0.0]])

    def H(v):
        return np.array([T1 - v[0] - v[3], T2 - v[1] - v[4], v[2] - v[1] - v[0]])

    def JH(v):
        return np.array([[-1.0, 0.0, 0.0, -1.0, 0.0],
                         [0.0, -1.0, 0.0, 0.0, -1.0],
                         [-1.0, -1.0, 1.0, 0.0, 0.0]])

    x, p = geochem_exact_solution(params)
    v = np.concatenate([x, p])
    return NcpProblem("geochem", 5, F, J, GEOCHEM_START.copy(),
                      known_solutions=((v, F(v)),),
                      comp_index=np.array([3, 4]), eval_H=H, eval_JH=JH,
                      default_slack=GEOCHEM_SLACK.copy(),
                      metadata={"params": params})


def geochem_exact_solution(params=GeoChemParams()):
    """Closed-form equilibrium of the 2-salts model.

    Tries, in order: both salts present, only salt 2, only salt 1, none.
    Returns ``(x, p)`` with x = (x1, x2, x3).
    """
    T1, T2 = map(float, params.T)
    K1, K2 = map(float, params.K)
    root = math.sqrt(K1 + K2)

    x1, x2 = K1 / root, K2 / root
    if T1 > x1 and T2 > x2:
        return np.array([x1, x2, root]), np.array([T1 - x1, T2 - x2])

    # p1 = 0
    x1 = T1
    x2 = (-T1 + math.sqrt(T1 * T1 + 4.0 * K2)) / 2.0
    if T2 - x2 > 0 and K1 - x1 * (x1 + x2) >= 0:
        return np.array([x1, x2, x1 + x2]), np.array([0.0, T2 - x2])

    # p2 = 0
    x2 = T2
    x1 = (-T2 + math.sqrt(T2 * T2 + 4.0 * K1)) / 2.0
    if T1 - x1 > 0 and K2 - x2 * (x1 + x2) >= 0:
        return np.array([x1, x2, x1 + x2]), np.array([T1 - x1, 0.0])

    x3 = T1 + T2
    if K1 >= T1 * x3 and K2 >= T2 * x3:
        return np.array([T1, T2, x3]), np.zeros(2)
    raise InconsistentParametersError(f"no equilibrium case applies to {params}")


# -- ODE reduced to an LCP -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OdeLcpSpec:
    N: int
    h: float
    x0: float
    dx0: float
    N1: np.ndarray
    N2: np.ndarray
    q: np.ndarray

    @property
    def t(self):
        return self.h * np.arange(1, self.N + 1)

    def reconstruct(self, w):
        """Split variable ``w = x^-`` back into the grid values x = x^+ - x^-."""
        w = np.asarray(w, dtype=float)
        x_plus = scipy.linalg.solve_triangular(self.N1, self.N2 @ w + self.q, lower=True)
        return x_plus - w, x_plus


def ode_lcp_matrices(N, t_end=5.0, x0=-4.0, dx0=5.0):
    """Banded matrices and right-hand side for x'' - |x| = -2 - t.

    Backward second differences on t_i = i h, with x_{-1} eliminated through
    the centred derivative condition at t = 0, give N1 x^+ - N2 x^- = q.
    """
    if N < 3:
        raise ValueError("grid needs at least 3 points")
    h = t_end / N
    if h >= 1.0:
        warnings.warn("step h >= 1 leaves N1 ill-conditioned", RuntimeWarning, stacklevel=2)
    h2 = h * h

    def band(sign):
        M = np.zeros((N, N))
        M[0, 0] = 2.0 + sign * h2
        M[1, 0] = -2.0
        for i in range(1, N):
            M[i, i] = 1.0 + sign * h2
        for i in range(2, N):
            M[i, i - 1] = -2.0
            M[i, i - 2] = 1.0
        return M / h2

    N1 = band(-1.0)
    N2 = band(+1.0)
    q = -(2.0 + h * np.arange(1, N + 1))
    # boundary data: x_{-1} = x_1 - 2 h dx0 folded into row 1, x_0 into rows 1-2
    q[0] -= (-2.0 * x0 - 2.0 * h * dx0) / h2
    q[1] -= x0 / h2
    return OdeLcpSpec(N, h, x0, dx0, N1, N2, q)


def build_ode_lcp(N, t_end=5.0, x0=-4.0, dx0=5.0):
    """LCP in w = x^- with F(w) = N1^{-1}(N2 w + q) = x^+."""
    spec = ode_lcp_matrices(N, t_end, x0, dx0)
    M = scipy.linalg.solve_triangular(spec.N1, spec.N2, lower=True)
    c = scipy.linalg.solve_triangular(spec.N1, spec.q, lower=True)

    def F(w):
        return M @ w + c

    def J(w):
        return M.copy()

    problem = NcpProblem("ode-lcp", N, F, J, _ones_start(N), metadata={"spec": spec})
    return spec, problem


def rk4_reference(x0, dx0, t_end, steps):
    """Classical RK4 for x'' = |x| - 2 - t.  Returns (t, x, dx)."""
    if t_end == 0:
        return np.zeros(1), np.array([float(x0)]), np.array([float(dx0)])
    if steps < 10:
        raise ValueError("at least 10 steps are required")
    h = t_end / steps

    def f(t, y):
        return np.array([y[1], abs(y[0]) - 2.0 - t])

    ts = h * np.arange(steps + 1)
    ys = np.empty((steps + 1, 2))
    y = np.array([x0, dx0], dtype=float)
    ys[0] = y
    for k in range(steps):
        t = ts[k]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k + 1] = y
    return ts, ys[:, 0], ys[:, 1]


# -- catalog ---------------------------------------------------------------------

PROBLEM_IDS = ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8",
               "geochem", "ode-lcp", "random-monotone")
SIZED_IDS = ("P1", "P2", "P3", "ode-lcp", "random-monotone")
FIXED_SIZES = {"P4": 4, "P5": 4, "P6": 7, "P7": 5, "P8": 10, "geochem": 5}


def get_problem(problem_id, size=None, seed=0):
    """Build a catalog instance by string id."""
    if problem_id not in PROBLEM_IDS:
        raise KeyError(f"unknown problem id {problem_id!r}")
    if problem_id in SIZED_IDS:
        if size is None:
            size = 100 if problem_id == "ode-lcp" else 10
        if problem_id in ("P1", "P2"):
            return build_p1_p2(problem_id, size)
        if problem_id == "P3":
            return build_p3(size)
        if problem_id == "ode-lcp":
            return build_ode_lcp(size)[1]
        return build_random_monotone(RandomMonotoneSpec(size, seed))
    if size is not None and size != FIXED_SIZES[problem_id]:
        raise ValueError(f"{problem_id} has fixed size {FIXED_SIZES[problem_id]}")
    if problem_id in ("P4", "P5"):
        return build_kojima_shindo(problem_id)
    if problem_id == "P6":
        return build_p6()
    if problem_id in ("P7", "P8"):
        return build_nash_cournot(problem_id)
    return build_geochem()
