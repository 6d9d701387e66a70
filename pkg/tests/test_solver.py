import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncpsmooth import smoothing
from ncpsmooth.problems import NcpProblem, geochem_exact_solution, get_problem
from ncpsmooth.smoothing import ThetaKernel
from ncpsmooth.solver import (EnlargedState, LinearSolveFailure, SolverConfig, SolveStatus,
                              StepTooSmall, armijo_search, backtrack, initial_state, jacobian,
                              lu_solve, newton_direction, reduced_jacobian, residual, solve)

KERNELS = list(ThetaKernel)


def lcp(M, q, name="lcp"):
    M = np.asarray(M, dtype=float)
    q = np.asarray(q, dtype=float)
    return NcpProblem(name, q.size, lambda x: M @ x + q, lambda x: M, np.ones(q.size))


def random_interior_state(rng, problem):
    x = rng.uniform(0.1, 3.0, problem.n)
    z = rng.uniform(0.1, 3.0, problem.n_comp)
    return EnlargedState(x, z, float(rng.uniform(0.05, 2.0)))


def fd_jacobian(problem, state, cfg, h=1e-7):
    v = state.as_vector()
    cols = []
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h * max(1.0, abs(v[j]))
        plus = residual(problem, EnlargedState.from_vector(v + e, problem.n), cfg)
        minus = residual(problem, EnlargedState.from_vector(v - e, problem.n), cfg)
        cols.append((plus - minus) / (2 * e[j]))
    return np.column_stack(cols)


class TestResidual:
    def test_last_row_r_only(self):
        p = lcp(np.eye(2), [1.0, 1.0])
        state = EnlargedState(np.zeros(2), np.zeros(2), 1.0)
        H = residual(p, state, SolverConfig(eps_reg=1e-300))
        assert H[-1] == pytest.approx(1.0)

    def test_last_row_negative_parts(self):
        p = lcp(np.eye(2), [1.0, 1.0])
        # r = 0 is outside the solver's domain, so evaluate the row directly
        state = EnlargedState(np.array([-1.0, 0.0]), np.array([0.0, -2.0]), 1e-300)
        H = residual(p, state, SolverConfig(kernel=ThetaKernel.EXPONENTIAL))
        assert H[-1] == pytest.approx(2.5)

    def test_geochem_initial_residual(self):
        p = get_problem("geochem")
        state = initial_state(p)
        assert state.r == pytest.approx(5.5)
        H = residual(p, state, SolverConfig())
        assert np.max(np.abs(H[:-1])) == pytest.approx(24.5837, abs=1e-3)

    def test_non_finite_f(self):
        p = NcpProblem("nan", 1, lambda x: np.array([np.nan]), lambda x: np.eye(1), np.ones(1))
        with pytest.raises(ArithmeticError):
            residual(p, EnlargedState(np.ones(1), np.ones(1), 1.0), SolverConfig())

    def test_state_round_trip(self):
        state = EnlargedState(np.arange(3.0), np.array([4.0, 5.0]), 0.5)
        back = EnlargedState.from_vector(state.as_vector(), 3)
        assert np.array_equal(back.x, state.x) and np.array_equal(back.z, state.z)
        assert back.r == 0.5


class TestJacobian:
    @pytest.mark.parametrize("kernel", KERNELS)
    @pytest.mark.parametrize("pid", ["P1", "P4", "P5", "P7", "geochem"])
    def test_matches_fd(self, kernel, pid):
        p = get_problem(pid, 6 if pid == "P1" else None)
        rng = np.random.default_rng(3)
        cfg = SolverConfig(kernel=kernel)
        for _ in range(3):
            state = random_interior_state(rng, p)
            assert np.allclose(jacobian(p, state, cfg), fd_jacobian(p, state, cfg),
                               atol=1e-5, rtol=1e-5)

    def test_fd_with_negative_parts(self):
        p = lcp([[2.0, 1.0], [1.0, 3.0]], [-1.0, 2.0])
        state = EnlargedState(np.array([-0.5, 1.0]), np.array([0.7, -0.3]), 0.4)
        cfg = SolverConfig()
        assert np.allclose(jacobian(p, state, cfg), fd_jacobian(p, state, cfg), atol=1e-6)

    def test_interior_last_row(self):
        p = get_problem("P4")
        state = random_interior_state(np.random.default_rng(0), p)
        cfg = SolverConfig(eps_reg=1e-3)
        row = jacobian(p, state, cfg)[-1]
        assert np.all(row[:-1] == 0.0)
        assert row[-1] == pytest.approx(2 * state.r + 1e-3)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_determinant_identity(self, kernel):
        rng = np.random.default_rng(11)
        cfg = SolverConfig(kernel=kernel)
        for k in range(50):
            n = int(rng.integers(1, 6))
            p = get_problem("random-monotone", n, seed=k)
            state = random_interior_state(rng, p)
            full = np.linalg.det(jacobian(p, state, cfg))
            reduced = np.linalg.det(reduced_jacobian(p, state.x, state.z, state.r, kernel))
            expected = (cfg.eps_reg + 2 * state.r) * reduced
            assert full == pytest.approx(expected, rel=1e-8, abs=1e-300)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_limit_jacobian(self, kernel):
        r = 1e-8
        for (s, t), expected in [((0.0, 1.0), (1.0, 0.0)), ((1.0, 0.0), (0.0, 1.0)),
                                 ((0.0, 0.0), (0.25, 0.25))]:
            d = smoothing.kernel_derivatives(kernel, np.array([s]), np.array([t]), r)
            if s == t == 0.0 and kernel is ThetaKernel.EXPONENTIAL:
                # exponential weights split evenly at the origin: (1/2, 1/2)
                assert (d.d_s[0], d.d_t[0]) == pytest.approx((0.5, 0.5), abs=1e-6)
                continue
            assert (d.d_s[0], d.d_t[0]) == pytest.approx(expected, abs=1e-6)


class TestLinearAlgebra:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.5])
        assert np.array_equal(lu_solve(np.eye(3), b), b)

    def test_diagonal(self):
        assert lu_solve(np.diag([2.0, 4.0]), np.array([2.0, 8.0])) == pytest.approx([1.0, 2.0])

    def test_random_residual(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(10, 10)) + 10 * np.eye(10)
        b = rng.normal(size=10)
        d = lu_solve(A, b)
        assert np.max(np.abs(A @ d - b)) <= 1e-10 * np.max(np.abs(b))

    def test_singular(self):
        with pytest.raises(LinearSolveFailure) as info:
            lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
        assert info.value.pivot_index == 1

    def test_non_finite(self):
        with pytest.raises(LinearSolveFailure):
            lu_solve(np.array([[np.inf, 0.0], [0.0, 1.0]]), np.ones(2))

    def test_not_square(self):
        with pytest.raises(ValueError):
            lu_solve(np.ones((2, 3)), np.ones(2))


class TestNewtonDirection:
    def test_dr_at_unit_r(self):
        p = get_problem("P4")
        state = EnlargedState(np.ones(4), np.ones(4), 1.0)
        d = newton_direction(p, state, SolverConfig(eps_reg=1e-6))
        assert d[-1] == pytest.approx(-(1e-6 + 1.0) / (2.0 + 1e-6), rel=1e-12)

    @given(r=st.floats(1e-6, 1e3), eps=st.floats(1e-9, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_full_step_r(self, r, eps):
        p = lcp([[2.0]], [-1.0])
        state = EnlargedState(np.ones(1), np.ones(1), r)
        d = newton_direction(p, state, SolverConfig(eps_reg=eps))
        r_new = r + d[-1]
        assert r_new == pytest.approx(r * r / (eps + 2 * r), rel=1e-9)
        assert r_new > 0

    @given(r=st.floats(1e-8, 1e3), eps=st.floats(1e-9, 1.0), zeta=st.floats(1e-5, 1.0))
    def test_r_positivity(self, r, eps, zeta):
        dr = -(eps * r + r * r) / (eps + 2 * r)
        assert r + zeta * dr > 0


class TestArmijo:
    def test_linear_model_full_step(self):
        result = backtrack(lambda p, d, s: (p + s * d, np.array([p + s * d])), 1.0, -1.0,
                           0.5, -1.0, 1e-4, 0.5, 1e-5)
        assert result.step == 1.0 and result.merit == 0.0

    def test_rejection_raises(self):
        with pytest.raises(StepTooSmall):
            backtrack(lambda p, d, s: (p + s * d, np.array([p + s * d])), 1.0, 1.0,
                      0.5, -1.0, 1e-4, 0.5, 1e-5)

    def test_admissible_filter(self):
        result = backtrack(lambda p, d, s: (p + s * d, np.array([p + s * d])), 1.0, -1.0,
                           0.5, -1.0, 1e-4, 0.5, 1e-5, admissible=lambda p: p > 0.4)
        assert result.step == 0.5

    def test_accepted_step_decreases_merit(self):
        p = get_problem("P1", 10)
        cfg = SolverConfig()
        state = initial_state(p)
        H = residual(p, state, cfg)
        ls = armijo_search(p, state, newton_direction(p, state, cfg, H), cfg, H)
        assert ls.merit < 0.5 * H @ H
        assert ls.point.r > 0


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(tau=0.0), dict(tau=0.5), dict(rho=1.0),
                                        dict(rho=0.0), dict(eps_reg=0.0), dict(tol=-1.0),
                                        dict(min_step=0.0), dict(max_iter=-1)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_kernel_by_name(self):
        assert SolverConfig(kernel="theta1").kernel is ThetaKernel.RATIONAL


class TestSolve:
    def test_non_interior_start(self):
        with pytest.raises(ValueError):
            solve(get_problem("P4"), start=np.array([1.0, 0.0, 1.0, 1.0]))

    def test_initial_r(self):
        p = get_problem("P1", 10)
        state = initial_state(p)
        assert state.r == pytest.approx(float(state.x @ state.z) / 10)

    def test_p1_rational(self):
        report = solve(get_problem("P1", 10), SolverConfig(kernel="theta1"))
        assert report.solved
        assert report.opt <= 1e-6 and report.feas <= 1e-5

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_geochem(self, kernel):
        report = solve(get_problem("geochem"), SolverConfig(kernel=kernel))
        assert report.solved
        x, p = geochem_exact_solution()
        assert np.allclose(report.x, np.concatenate([x, p]), atol=1e-6)

    def test_kojima_shindo(self):
        report = solve(get_problem("P5"), SolverConfig(kernel="theta1"))
        assert report.solved
        assert np.allclose(report.x, [np.sqrt(6) / 2, 0, 0, 0.5], atol=1e-5)

    def test_max_iter(self):
        report = solve(get_problem("P1", 10), SolverConfig(max_iter=2))
        assert report.status is SolveStatus.MAX_ITER
        assert report.iterations == 2

    def test_zero_budget(self):
        report = solve(get_problem("P1", 10), SolverConfig(max_iter=0))
        assert report.status is SolveStatus.MAX_ITER and report.iterations == 0

    def test_linear_solve_failure(self):
        # the equation row has a zero gradient, so every Newton matrix is singular
        p = NcpProblem("flat", 2, lambda x: x[:1], lambda x: np.array([[1.0, 0.0]]),
                       np.ones(2), comp_index=np.array([0]),
                       eval_H=lambda x: np.array([1.0]), eval_JH=lambda x: np.zeros((1, 2)))
        report = solve(p, SolverConfig(kernel="theta1"))
        assert report.status is SolveStatus.LINEAR_SOLVE_FAILURE
        assert report.iterations == 0 and "pivot" in report.message

    @pytest.mark.parametrize("kernel", KERNELS)
    @pytest.mark.parametrize("cell", [("P1", 10), ("P2", 10), ("P3", 10), ("P4", None),
                                      ("P6", None), ("P7", None), ("P8", None),
                                      ("geochem", None)])
    def test_run_invariants(self, kernel, cell):
        report = solve(get_problem(*cell), SolverConfig(kernel=kernel))
        assert report.solved
        assert all(r > 0 for r in report.r_history)
        merits = np.array(report.merit_history)
        assert np.all(np.diff(merits) < 0)
        assert len(report.step_history) == report.iterations
        assert all(0 < s <= 1 for s in report.step_history)
        assert report.opt <= 1e-6 and report.feas <= 1e-5
        assert report.status.value == "Solved"

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_mixed_problem_uses_h(self, kernel):
        p = get_problem("geochem")
        assert p.n_eq == 3
        report = solve(p, SolverConfig(kernel=kernel))
        assert np.max(np.abs(p.H(report.x))) <= 1e-8
