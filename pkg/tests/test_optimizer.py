import numpy as np
import pytest

from turnpike_hyp import solvers as S
from turnpike_hyp.errors import LambdaOutOfRange, NoConvergence, NonSPD, SPDViolation
from turnpike_hyp.operators import apply_FT, inner_product_H, norm_H
from turnpike_hyp.optimizer import (
    QuadraticCost,
    conjugate_gradient,
    cost_from_tracking,
    estimate_kappa,
    eval_J,
    eval_J0,
    grad_dynamic,
    hessian_apply,
    one_sided_residual,
    quadratic_form,
    solve_dynamic,
    solve_one_sided,
    solve_static,
    write_cg_log,
    write_solution_csv,
)
from turnpike_hyp.system import build_system
from turnpike_hyp.turnpike import example1_oracle


def test_tracking_blocks():
    c = cost_from_tracking(0.5, (1, 2))
    assert np.allclose(c.A0, np.eye(2)) and np.allclose(c.AL, np.eye(2))
    assert np.allclose(c.c0, [0, -2]) and np.allclose(c.cL, [0, -1])
    z = cost_from_tracking(0.3, (0, 0))
    assert not np.any(z.c0) and not np.any(z.cL)


def test_derived_blocks():
    c = QuadraticCost(np.array([[1.0, 2], [2, 5]]), np.array([[3.0, 1], [1, 4]]), np.zeros(2), np.zeros(2))
    assert np.array_equal(c.M1, np.diag([1.0, 3]))
    assert np.array_equal(c.M2, [[0, 2], [1, 0]])
    assert np.array_equal(c.M3, [[0, 1], [2, 0]])
    assert np.array_equal(c.M4, np.diag([4.0, 5]))
    assert np.array_equal(c.M3, c.M2.T)


def test_cost_validation():
    with pytest.raises(NonSPD):
        QuadraticCost(np.array([[1.0, 2], [0, 1]]), np.eye(2), np.zeros(2), np.zeros(2))
    with pytest.raises(NonSPD):
        QuadraticCost(np.diag([1.0, -1]), np.eye(2), np.zeros(2), np.zeros(2))
    with pytest.raises(LambdaOutOfRange):
        cost_from_tracking(1.5, (1, 1))
    with pytest.raises(LambdaOutOfRange):
        cost_from_tracking(0.0, (1, 1))


def test_eval_J_zero_control(example1):
    g = S.grid_for_cfl(example1, 10.0, 20)
    c = cost_from_tracking(0.4, (1.0, 2.0))
    zero = np.zeros((g.n_t, 2))
    assert eval_J(c, g, zero, zero) == pytest.approx(0.6 * 10.0 * 5.0)
    assert eval_J0(c, np.zeros(2), np.zeros((g.n_x + 1, 2))) == pytest.approx(0.6 * 5.0)


def test_eval_J_at_static_plateau(example1):
    g = S.grid_for_cfl(example1, 10.0, 20)
    c = cost_from_tracking(0.5, (1.0, 1.0))
    st = solve_static(c, example1, g)
    u = np.tile(st.control, (g.n_t, 1))
    y = np.tile(st.F_sigma @ st.control, (g.n_t, 1))
    assert eval_J(c, g, u, y) == pytest.approx(g.T * st.objective, rel=1e-12)


def test_eval_J_homogeneity(example1, rng):
    g = S.grid_for_cfl(example1, 4.0, 20)
    c = QuadraticCost(np.diag([1.0, 2.0]), np.diag([3.0, 1.0]), np.zeros(2), np.zeros(2))
    u = rng.standard_normal((g.n_t, 2))
    y = apply_FT(example1, g, u)
    assert eval_J(c, g, 2 * u, 2 * y) == pytest.approx(4 * eval_J(c, g, u, y), rel=1e-12)


def test_single_channel_minimum():
    sys = build_system(1.0, 0.0, 1.0, -1.0)
    g = S.grid_for_cfl(sys, 1.0, 10)
    c = cost_from_tracking(0.5, (1.0, 0.0))
    st = solve_static(c, sys, g)
    assert np.allclose(st.control, [0.5, 0.0])
    assert st.objective == pytest.approx(0.25)


def test_static_oracle_and_residual():
    sys = build_system(1.0, 0.0, 1.0, -1.0)
    g = S.grid_for_cfl(sys, 1.0, 10)
    st = solve_static(cost_from_tracking(0.5, (1.0, 2.0)), sys, g)
    assert np.allclose(st.control, [0.5, 1.0], atol=1e-14)
    assert st.residual <= 1e-12
    zero = solve_static(cost_from_tracking(0.5, (0.0, 0.0)), sys, g)
    assert not np.any(zero.control)


def test_static_multiplier_closure(variable):
    g = S.grid_for_cfl(variable, 4.0, 64, 0.8)
    st = solve_static(cost_from_tracking(0.3, (1.0, -0.5)), variable, g)
    assert st.residual <= 1e-12


@pytest.mark.parametrize("rule", ["rectangle", "trapezoid"])
def test_gradient_matches_finite_differences(variable, rng, rule):
    g = S.grid_for_cfl(variable, 4.0, 32, 0.8, rule)
    c = cost_from_tracking(0.3, (1.0, -0.5))
    u = rng.standard_normal((g.n_t, 2))
    J = lambda v: eval_J(c, g, v, apply_FT(variable, g, v))  # noqa: E731
    grad = grad_dynamic(c, variable, g, u)
    h = 1e-4
    for _ in range(20):
        d = rng.standard_normal((g.n_t, 2))
        fd = (J(u + h * d) - J(u - h * d)) / (2 * h)
        an = inner_product_H(grad, d, g)
        assert abs(fd - an) <= 1e-6 * abs(an)


def test_zero_data_zero_gradient(variable):
    g = S.grid_for_cfl(variable, 2.0, 16, 0.8)
    c = cost_from_tracking(0.5, (0.0, 0.0))
    assert not np.any(grad_dynamic(c, variable, g, np.zeros((g.n_t, 2))))


def test_quadratic_expansion_identity(variable, rng):
    g = S.grid_for_cfl(variable, 4.0, 32, 0.8)
    c = cost_from_tracking(0.3, (1.0, -0.5))
    J = lambda v: eval_J(c, g, v, apply_FT(variable, g, v))  # noqa: E731
    for _ in range(5):
        u, ub = rng.standard_normal((2, g.n_t, 2))
        lhs = J(u) - J(ub) - inner_product_H(grad_dynamic(c, variable, g, ub), u - ub, g)
        assert lhs == pytest.approx(quadratic_form(c, variable, g, u - ub), rel=1e-9)


def test_hessian_symmetry(variable, rng):
    g = S.grid_for_cfl(variable, 4.0, 32, 0.8, "trapezoid")
    c = cost_from_tracking(0.3, (1.0, -0.5))
    for _ in range(5):
        a, b = rng.standard_normal((2, g.n_t, 2))
        x = inner_product_H(hessian_apply(c, variable, g, a), b, g)
        y = inner_product_H(a, hessian_apply(c, variable, g, b), g)
        assert abs(x - y) <= 1e-10 * abs(x)


def test_dynamic_zero_data(variable):
    g = S.grid_for_cfl(variable, 4.0, 16, 0.8)
    sol = solve_dynamic(cost_from_tracking(0.5, (0.0, 0.0)), variable, g)
    assert not np.any(sol.control) and sol.objective == 0.0


def test_dynamic_optimality_and_objective(variable):
    g = S.grid_for_cfl(variable, 6.0, 32, 0.8)
    c = cost_from_tracking(0.3, (1.0, -0.5))
    sol = solve_dynamic(c, variable, g, tol=1e-10)
    g0 = grad_dynamic(c, variable, g, np.zeros((g.n_t, 2)))
    assert norm_H(grad_dynamic(c, variable, g, sol.control), g) <= 1e-8 * norm_H(g0, g)
    assert sol.objective == pytest.approx(eval_J(c, g, sol.control, sol.trace), rel=1e-10)
    assert sol.residual <= 1e-10


def test_warm_and_cold_start_agree(variable):
    g = S.grid_for_cfl(variable, 6.0, 32, 0.8)
    c = cost_from_tracking(0.3, (1.0, -0.5))
    a = solve_dynamic(c, variable, g, warm_start=True).control
    b = solve_dynamic(c, variable, g, warm_start=False).control
    assert norm_H(a - b, g) <= 1e-7 * norm_H(a, g)


def test_example1_control_structure(example1):
    g = S.grid_for_cfl(example1, 10.0, 100)
    sol = solve_dynamic(cost_from_tracking(0.5, (1.0, 1.0)), example1, g)
    orc = example1_oracle(example1, 0.5, (1.0, 1.0), 10.0)
    t = g.t[1:]
    early = t < 9.0 - 0.05
    late = t > 9.0 + 0.05
    assert np.allclose(sol.control[early], orc.u_static, atol=1e-2)
    assert np.allclose(sol.control[late], 0.0, atol=1e-2)
    a = np.exp(-1.0)
    assert np.allclose(orc.u_static, 0.5 * a / (0.5 + 0.5 * a * a))


def test_one_sided_zero_data(variable):
    g = S.grid_for_cfl(variable, 4.0, 16, 0.8)
    sol = solve_one_sided(cost_from_tracking(0.5, (0.0, 0.0)), variable, g, 0.0)
    assert np.abs(sol.control).max() == 0.0


def test_one_sided_matches_free_solve_when_decoupled(example1):
    g = S.grid_for_cfl(example1, 6.0, 40)
    c = cost_from_tracking(0.5, (1.0, 0.7))
    full = solve_dynamic(c, example1, g)
    one = solve_one_sided(c, example1, g, full.control[:, 0])
    assert np.abs(one.control[:, 1] - full.control[:, 1]).max() <= 1e-8
    res = one_sided_residual(0.5, (1.0, 0.7), example1, g, one.control)
    rhs = one_sided_residual(0.5, (1.0, 0.7), example1, g, np.zeros((g.n_t, 2)))
    assert np.sqrt(np.sum(g.signal_weights() * res**2)) <= 1e-9 * np.sqrt(np.sum(g.signal_weights() * rhs**2))


def test_kappa_properties(example1, rng):
    g = S.grid_for_cfl(example1, 6.0, 20)
    c = cost_from_tracking(0.5, (1.0, 1.0))
    k_inv = estimate_kappa(c, example1, g, method="inverse")
    k_lan = estimate_kappa(c, example1, g, method="lanczos")
    assert k_inv > 0 and k_lan == pytest.approx(k_inv, rel=1e-5)
    # lambda blocks give the reduced Hessian a floor of min eig(M1) = 2 lambda
    assert k_lan >= 1.0 - 1e-8
    assert estimate_kappa(c.scaled(2.0), example1, g, method="lanczos") == pytest.approx(2 * k_lan, rel=1e-6)
    for _ in range(100):
        d = rng.standard_normal((g.n_t, 2))
        assert 2 * quadratic_form(c, example1, g, d) >= k_lan * norm_H(d, g) ** 2 * (1 - 1e-9)


def test_kappa_rejects_unknown_method(example1):
    g = S.grid_for_cfl(example1, 2.0, 10)
    with pytest.raises(ValueError):
        estimate_kappa(cost_from_tracking(0.5, (1, 1)), example1, g, method="qr")


def test_cg_errors():
    inner = lambda a, b: float(a @ b)  # noqa: E731
    with pytest.raises(SPDViolation):
        conjugate_gradient(lambda x: -x, np.ones(3), inner)
    A = np.diag(np.logspace(0, 6, 50))
    with pytest.raises(NoConvergence):
        conjugate_gradient(lambda x: A @ x, np.ones(50), inner, tol=1e-14, max_iter=3)
    r = conjugate_gradient(lambda x: A @ x, np.zeros(50), inner)
    assert r.iterations == 0 and not np.any(r.x)


def test_solution_csv(tmp_path, example1):
    g = S.grid_for_cfl(example1, 2.0, 10)
    sol = solve_dynamic(cost_from_tracking(0.5, (1.0, 1.0)), example1, g)
    write_solution_csv(tmp_path / "s.csv", g, sol)
    write_cg_log(tmp_path / "c.csv", sol)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,u_plus,u_minus,trace_plus,trace_minus" and len(lines) == g.n_t + 1
    assert (tmp_path / "c.csv").read_text().startswith("iteration,residual")
