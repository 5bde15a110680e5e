import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockopt.bcd import (
    BcdConfig,
    BcdProblem,
    BcdTrace,
    CallableCoupling,
    QuadraticCoupling,
    check_finite_length,
    check_limit_criticality,
    check_step_vanishing,
    check_subdiff_bound,
    check_sufficient_descent,
    compute_subgrad_witness,
    run_bcd,
)
from blockopt.errors import InfeasibleError, ParameterError, SolverError
from blockopt.prox import L1, IndNonneg, Zero
from blockopt.reference import solve_lasso
from blockopt.subdiff import StructuredFn, distance_to_subdiff

X0 = np.array([0.5, -1.0, 2.0])
Y0 = np.array([1.5, -0.25])


def half_norm_problem(n=3, m=2):
    A = np.vstack([np.eye(n), np.zeros((m, n))])
    B = np.vstack([np.zeros((n, m)), np.eye(m)])
    return BcdProblem(Zero(), Zero(), QuadraticCoupling(A, B, np.zeros(n + m), lipschitz=1.0), n, m)


def coupled_problem(seed=3, f=None, g=None):
    rng = np.random.default_rng(seed)
    A, B = rng.uniform(-1, 1, (8, 4)), rng.uniform(-1, 1, (8, 3))
    c = rng.uniform(-1, 1, 8)
    return BcdProblem(f or Zero(), g or Zero(), QuadraticCoupling(A, B, c), 4, 3)


def small_lasso(seed=5, lam=0.1):
    rng = np.random.default_rng(seed)
    A, B = rng.uniform(-1, 1, (30, 12)), rng.uniform(-1, 1, (30, 8))
    c = rng.uniform(-1, 1, 30)
    return BcdProblem(L1(lam), L1(lam), QuadraticCoupling(A, B, c), 12, 8), np.hstack([A, B]), c, lam


def run(p, gamma=2.0, iters=200, x0=X0, y0=Y0, **kw):
    return run_bcd(p, BcdConfig(gamma=gamma, max_iters=iters, stop_tol=None, x0=x0, y0=y0, **kw))


@pytest.mark.parametrize("gamma", [1.1, 2.0, 10.0])
def test_quadratic_contracts_by_one_minus_inverse_gamma(gamma):
    tr = run(half_norm_problem(), gamma, 100)
    q = 1.0 - 1.0 / gamma
    for k in range(len(tr)):
        np.testing.assert_allclose(tr.X[k], q**k * X0, rtol=0, atol=1e-12)
        np.testing.assert_allclose(tr.Y[k], q**k * Y0, rtol=0, atol=1e-12)


def test_record_count_is_iterations_plus_one():
    tr = run(half_norm_problem(), 2.0, 17)
    assert len(tr) == 18 and tr.iterations == 17


def test_fixed_point_stays_put():
    tr = run(half_norm_problem(), 2.0, 20, np.zeros(3), np.zeros(2))
    assert np.all(tr.X == 0) and np.all(tr.Y == 0)


def test_gamma_at_most_one_is_rejected():
    for g in (1.0, 0.5, -2.0):
        with pytest.raises(ParameterError, match="gamma"):
            BcdConfig(gamma=g)


def test_infeasible_start_raises_before_iterating():
    p = BcdProblem(IndNonneg(), Zero(), half_norm_problem().H, 3, 2)
    with pytest.raises(InfeasibleError):
        run(p, x0=np.array([-1.0, 0.0, 0.0]))


def test_unbounded_iterates_abort():
    H = CallableCoupling(
        lambda x, y: -0.5 * (x @ x), lambda x, y: -x, lambda x, y: np.zeros_like(y), lipschitz=1.0
    )
    p = BcdProblem(Zero(), Zero(), H, 1, 1)
    with pytest.raises(SolverError, match="unbounded"):
        run(p, 2.0, 500, np.array([1.0]), np.array([0.0]), bound_factor=100.0)


def test_default_start_is_deterministic_and_in_unit_ball():
    p = BcdProblem(IndNonneg(), Zero(), half_norm_problem().H, 3, 2)
    a = run_bcd(p, BcdConfig(max_iters=1, seed=4))
    b = run_bcd(p, BcdConfig(max_iters=1, seed=4))
    assert np.array_equal(a.X, b.X)
    assert np.hypot(np.linalg.norm(a.X[0]), np.linalg.norm(a.Y[0])) <= 1.0
    assert np.all(a.X[0] >= 0)


def test_stop_rule_uses_witness_bound():
    tr = run_bcd(half_norm_problem(), BcdConfig(gamma=2.0, max_iters=10000, stop_tol=1e-9, x0=X0, y0=Y0))
    assert tr.converged and tr.stop_reason == "stop_tol"
    assert 6.0 * tr.steps[-1] <= 1e-9
    assert tr.steps[-1] < 1e-8


def test_gauss_seidel_differs_from_jacobi():
    p = coupled_problem()
    x, y = np.ones(4), np.ones(3)
    tr = run(p, 2.0, 1, x, y)
    c = 1.0 / (2.0 * p.lipschitz)
    y_jacobi = y - c * p.H.grad_y(x, y)
    y_seidel = y - c * p.H.grad_y(tr.X[1], y)
    np.testing.assert_allclose(tr.Y[1], y_seidel, atol=1e-15)
    assert np.linalg.norm(tr.Y[1] - y_jacobi) > 1e-3


def test_descent_holds_on_quadratic_and_swap_is_caught():
    p = half_norm_problem()
    tr = run(p, 2.0, 50)
    assert check_sufficient_descent(tr, 2.0, 1.0).status == "pass"
    X, Y = tr.X.copy(), tr.Y.copy()
    X[[10, 20]], Y[[10, 20]] = X[[20, 10]], Y[[20, 10]]
    bad = check_sufficient_descent(BcdTrace.from_points(p, X, Y, 2.0, 1.0), 2.0, 1.0)
    assert bad.status == "fail"
    assert 19 in bad.violations or 20 in bad.violations
    assert min(bad.violations) >= 9


def test_single_record_trace_is_vacuous():
    tr = run(half_norm_problem(), 2.0, 1)
    one = BcdTrace.from_points(half_norm_problem(), tr.X[:1], tr.Y[:1], 2.0, 1.0)
    assert check_sufficient_descent(one, 2.0, 1.0).status == "vacuous"
    assert check_subdiff_bound(half_norm_problem(), one, 2.0, 1.0).status == "vacuous"


def test_mismatched_parameters_raise():
    tr = run(half_norm_problem(), 2.0, 5)
    with pytest.raises(ParameterError):
        check_sufficient_descent(tr, 3.0, 1.0)
    with pytest.raises(ParameterError):
        check_subdiff_bound(half_norm_problem(), tr, 2.0, 2.0)


def test_steps_vanish_geometrically():
    rep = check_step_vanishing(run(half_norm_problem(), 2.0, 200))
    assert rep.status == "pass"
    assert rep.details["tail_fraction"] < 1e-6


def test_constant_steps_fail_vanishing_and_length():
    p = half_norm_problem(1, 1)
    X = 0.1 * np.arange(40.0)[:, None]
    tr = BcdTrace.from_points(p, X, np.zeros((40, 1)), 2.0, 1.0)
    assert check_step_vanishing(tr).status == "fail"
    assert check_finite_length(tr).status == "fail"


def test_harmonic_steps_fail_finite_length():
    p = half_norm_problem(1, 1)
    X = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 400))])[:, None]
    rep = check_finite_length(BcdTrace.from_points(p, X, np.zeros((400, 1)), 2.0, 1.0))
    assert rep.status == "fail"


def test_short_traces_are_inconclusive():
    tr = run(half_norm_problem(), 2.0, 3)
    assert check_step_vanishing(tr).status == "inconclusive"
    assert check_finite_length(tr).status == "inconclusive"
    assert check_limit_criticality(half_norm_problem(), tr, 1e-6).status == "inconclusive"


def test_quadratic_length_and_criticality():
    p = half_norm_problem()
    tr = run(p, 2.0, 200)
    fl = check_finite_length(tr)
    assert fl.status == "pass"
    # geometric series with ratio 1/2 starting from ||z0||/2
    assert fl.details["total_length"] == pytest.approx(np.hypot(*map(np.linalg.norm, (X0, Y0))), rel=1e-12)
    cr = check_limit_criticality(p, tr, 1e-8)
    assert cr.status == "pass"


def test_witness_is_the_gradient_in_the_smooth_case():
    p = coupled_problem()
    tr = run(p, 2.0, 30, np.ones(4), -np.ones(3))
    for k in range(1, len(tr)):
        Ax, Ay = compute_subgrad_witness(p, tr, k, 2.0)
        x, y = tr.X[k], tr.Y[k]
        np.testing.assert_allclose(Ax, p.H.grad_x(x, y), atol=1e-10)
        np.testing.assert_allclose(Ay, p.H.grad_y(x, y), atol=1e-10)


def test_literal_witness_variant_is_not_a_subgradient():
    # x-term linearized at (x_{k-1}, y_k) instead of (x_{k-1}, y_{k-1})
    p = coupled_problem()
    tr = run(p, 2.0, 5, np.ones(4), -np.ones(3))
    k = 1
    xp, x, y = tr.X[k - 1], tr.X[k], tr.Y[k]
    Ax = 2.0 * p.lipschitz * (xp - x) + p.H.grad_x(x, y) - p.H.grad_x(xp, y)
    d = distance_to_subdiff(StructuredFn(Zero(), p.H.partial_x(y)), x, Ax)
    assert d > 1e-3
    Ax_ok, _ = compute_subgrad_witness(p, tr, k, 2.0)
    assert distance_to_subdiff(StructuredFn(Zero(), p.H.partial_x(y)), x, Ax_ok) <= 1e-12


def test_witness_vanishes_at_a_fixed_point():
    p = half_norm_problem()
    tr = run(p, 2.0, 3, np.zeros(3), np.zeros(2))
    Ax, Ay = compute_subgrad_witness(p, tr, 2, 2.0)
    assert np.linalg.norm(Ax) <= 1e-12 and np.linalg.norm(Ay) <= 1e-12


def test_witness_needs_positive_index():
    tr = run(half_norm_problem(), 2.0, 3)
    with pytest.raises(ParameterError):
        compute_subgrad_witness(half_norm_problem(), tr, 0, 2.0)


@pytest.mark.parametrize("gamma", [1.1, 2.0, 10.0])
def test_subdiff_bound_ratio_stays_below_constant(gamma):
    p = half_norm_problem()
    rep = check_subdiff_bound(p, run(p, gamma, 100), gamma, 1.0)
    assert rep.status == "pass"
    assert rep.details["max_ratio"] <= (2 * gamma + 2) * (1 + 1e-9)


def test_lasso_certificates_and_reference_gap():
    p, M, c, lam = small_lasso()
    tr = run_bcd(p, BcdConfig(gamma=1.5, max_iters=10000, stop_tol=1e-10, seed=1))
    l = p.lipschitz
    assert check_sufficient_descent(tr, 1.5, l).status == "pass"
    assert check_step_vanishing(tr).status == "pass"
    sb = check_subdiff_bound(p, tr, 1.5, l)
    assert sb.status == "pass" and sb.details["max_membership_distance"] <= 1e-8
    assert check_finite_length(tr).status == "pass"
    assert check_limit_criticality(p, tr, 1e-6).status == "pass"
    assert tr.dist[-1] <= 1e-6
    z = solve_lasso(M, c, lam, tol=1e-11)
    ref = 0.5 * np.sum((M @ z - c) ** 2) + lam * np.abs(z).sum()
    assert abs(tr.psi[-1] - ref) <= 1e-8


def test_early_stopped_lasso_is_inconclusive():
    p, *_ = small_lasso()
    tr = run_bcd(p, BcdConfig(gamma=2.0, max_iters=3, seed=1))
    assert check_limit_criticality(p, tr, 1e-6).status == "inconclusive"


def test_coupling_gradient_is_lipschitz_on_random_pairs():
    p = coupled_problem(7)
    H, l = p.H, p.lipschitz
    rng = np.random.default_rng(0)
    for _ in range(200):
        x1, x2 = rng.standard_normal((2, 4))
        y1, y2 = rng.standard_normal((2, 3))
        g = np.concatenate([H.grad_x(x1, y1) - H.grad_x(x2, y2), H.grad_y(x1, y1) - H.grad_y(x2, y2)])
        dz = np.linalg.norm(np.concatenate([x1 - x2, y1 - y2]))
        assert np.linalg.norm(g) <= l * dz * (1 + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.05, 20.0), st.integers(0, 1000))
def test_all_certificates_hold_for_any_gamma(gamma, seed):
    p = coupled_problem(seed % 7, f=L1(0.05), g=IndNonneg())
    tr = run_bcd(p, BcdConfig(gamma=gamma, max_iters=60, stop_tol=None, seed=seed))
    l = p.lipschitz
    assert np.all(np.diff(tr.psi) <= 1e-9 * (1 + abs(tr.psi[0])))
    assert check_sufficient_descent(tr, gamma, l).status == "pass"
    assert check_subdiff_bound(p, tr, gamma, l).status == "pass"


@pytest.mark.parametrize("gamma", [1.1, 2.0, 10.0])
def test_quadratic_ratio_matches_closed_form(gamma):
    # witness = z_k and dz = |z_k|/(gamma - 1), so the ratio is (|x_k| + |y_k|)(gamma - 1)/|z_k|
    p = half_norm_problem()
    rep = check_subdiff_bound(p, run(p, gamma, 60), gamma, 1.0)
    expected = (np.linalg.norm(X0) + np.linalg.norm(Y0)) / np.hypot(np.linalg.norm(X0), np.linalg.norm(Y0))
    assert rep.details["max_ratio"] == pytest.approx(expected * (gamma - 1), rel=1e-9)
