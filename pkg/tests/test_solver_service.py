import itertools

import cvxpy as cp
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import NonConvexError, SolverError
from models import ConvexProgram
from services import solver_service


def test_scalar_qp_with_lower_bound():
    prog = ConvexProgram(q=np.zeros(1), P=np.array([[2.0]]), lb=np.array([3.0]))
    result = solver_service.solve(prog)
    assert result.optimal
    assert result.x[0] == pytest.approx(3.0, abs=1e-6)
    assert result.objective == pytest.approx(9.0, abs=1e-5)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=6))
def test_lp_over_unit_box_takes_sign_solution(c):
    c = np.asarray(c)
    n = c.size
    result = solver_service.solve(ConvexProgram(q=c, lb=-np.ones(n), ub=np.ones(n)))
    assert result.optimal
    np.testing.assert_allclose(result.x, -np.sign(c), atol=1e-8)
    assert result.objective == pytest.approx(-np.abs(c).sum(), abs=1e-8)


def _enumerate_active_sets(P, q, A, b):
    """Smallest objective over KKT points of every active set (inequality rows only)."""
    best = np.inf
    m, n = A.shape
    for k in range(m + 1):
        for active in itertools.combinations(range(m), k):
            rows = list(active)
            K = np.block([[P, A[rows].T], [A[rows], np.zeros((k, k))]]) if k else P
            rhs = np.r_[-q, b[rows]] if k else -q
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, lam = sol[:n], sol[n:]
            if np.all(A @ x <= b + 1e-9) and np.all(lam >= -1e-9):
                best = min(best, 0.5 * x @ P @ x + q @ x)
    return best


@pytest.mark.parametrize("seed", range(10))
def test_random_qp_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = 3, 5
    L = rng.normal(size=(n, n))
    P = L @ L.T + 0.5 * np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, size=m)
    result = solver_service.solve(ConvexProgram(q=q, P=P, A_ub=A, b_ub=b))
    assert result.optimal
    assert result.objective == pytest.approx(_enumerate_active_sets(P, q, A, b), abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_random_lp_kkt_residuals_are_small(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 6
    A = sp.csr_matrix(rng.normal(size=(m, n)))
    b = rng.uniform(0.5, 2.0, size=m)
    prog = ConvexProgram(q=rng.normal(size=n), A_ub=A, b_ub=b, lb=-2 * np.ones(n), ub=2 * np.ones(n))
    result = solver_service.solve(prog)
    assert result.optimal
    assert max(result.residuals.values()) <= 1e-7


def test_infeasible_lp_reports_status():
    prog = ConvexProgram(q=np.ones(1), A_ub=np.array([[1.0], [-1.0]]), b_ub=np.array([-1.0, -1.0]))
    assert solver_service.solve(prog).status == solver_service.INFEASIBLE


def test_unbounded_lp_is_not_optimal():
    prog = ConvexProgram(q=-np.ones(1), lb=np.zeros(1))
    assert solver_service.solve(prog).status in (solver_service.UNBOUNDED, solver_service.INFEASIBLE)


def test_solving_twice_is_deterministic():
    prog = ConvexProgram(q=np.array([1.0, -1.0]), P=np.array([[2.0, 0.5], [0.5, 1.0]]), lb=-np.ones(2), ub=np.ones(2))
    first, second = solver_service.solve(prog), solver_service.solve(prog)
    np.testing.assert_array_equal(first.x, second.x)


def test_non_psd_cost_is_rejected():
    prog = ConvexProgram(q=np.zeros(2), P=np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(NonConvexError):
        solver_service.solve(prog)


def test_asymmetric_cost_is_rejected():
    prog = ConvexProgram(q=np.zeros(2), P=np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(NonConvexError):
        solver_service.validate_program(prog)


def test_dimension_mismatch_is_rejected():
    prog = ConvexProgram(q=np.zeros(2), A_ub=np.ones((1, 3)), b_ub=np.ones(1))
    with pytest.raises(SolverError):
        solver_service.solve(prog)


def test_weighted_solves_reuse_one_model():
    prog = ConvexProgram(q=np.array([-1.0]), P=np.array([[1.0]]), lb=np.array([-10.0]), ub=np.array([10.0]))
    results = solver_service.solve_weighted(prog, [(1.0, 1.0), (2.0, 1.0), (1.0, 4.0)])
    np.testing.assert_allclose([r.x[0] for r in results], [1.0, 0.5, 4.0], atol=1e-6)


def test_require_optimal_raises_on_other_status():
    with pytest.raises(SolverError):
        solver_service.require_optimal(solver_service.SolveResult(status="infeasible"), "toy program")


def _box_qp() -> ConvexProgram:
    return ConvexProgram(q=np.array([-1.0]), P=np.array([[1.0]]), lb=np.array([-10.0]), ub=np.array([10.0]))


def _breaking_solve(monkeypatch, failures: int) -> list:
    """Makes the first ``failures`` Clarabel calls break down; returns the tolerances tried."""
    original = cp.Problem.solve
    tried = []

    def solve(self, *args, **kwargs):
        tried.append(kwargs["tol_feas"])
        if len(tried) <= failures:
            raise cp.error.SolverError("numerical breakdown")
        return original(self, *args, **kwargs)

    monkeypatch.setattr(cp.Problem, "solve", solve)
    return tried


def test_breakdown_is_retried_at_looser_tolerance(monkeypatch):
    tried = _breaking_solve(monkeypatch, failures=1)
    result = solver_service.solve(_box_qp())
    assert result.optimal
    assert result.x[0] == pytest.approx(1.0, abs=1e-5)
    assert tried == [solver_service.DEFAULT_TOLERANCE, solver_service.QP_RETRY_TOLERANCES[0]]


def test_persistent_breakdown_returns_failed_status(monkeypatch):
    tried = _breaking_solve(monkeypatch, failures=10)
    results = solver_service.solve_weighted(_box_qp(), [(1.0, 1.0), (2.0, 1.0)])
    assert [r.status for r in results] == [solver_service.FAILED, solver_service.FAILED]
    assert all(r.x is None for r in results)
    assert len(tried) == 2 * (1 + len(solver_service.QP_RETRY_TOLERANCES))


def test_weights_are_rescaled_back_into_objective():
    # min 1e-6 * x^2 / 2 - 1e-6 * x over [-10, 10]: minimizer 1, objective -5e-7
    result = solver_service.solve_weighted(_box_qp(), [(1e-6, 1e-6)])[0]
    assert result.x[0] == pytest.approx(1.0, abs=1e-5)
    assert result.objective == pytest.approx(-5e-7, abs=1e-11)
    assert max(result.residuals.values()) <= 1e-8


def test_zero_weights_are_rejected():
    with pytest.raises(SolverError):
        solver_service.solve_weighted(_box_qp(), [(0.0, 0.0)])
