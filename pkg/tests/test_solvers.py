import math

import numpy as np
import pytest

from turnpike_hyp import solvers as S
from turnpike_hyp.errors import CflViolation, ShapeMismatch, SingularSystem
from turnpike_hyp.system import build_system


def test_pipeline_grid_cfl_exactly_one():
    sys = build_system(10_000.0, -1.0, 340.0, -340.0)
    g = S.build_grid(sys, 600.0, 40, 816)
    assert S.cfl_of(sys, g) == pytest.approx(1.0, abs=1e-12)
    half = S.SpaceTimeGrid(10_000.0, 600.0, 40, 408)
    assert S.cfl_of(sys, half) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(CflViolation):
        S.build_grid(sys, 600.0, 40, 408)


def test_unit_cfl_when_dx_equals_dt(transport):
    g = S.build_grid(transport, 1.0, 10, 10)
    assert S.cfl_of(transport, g) == pytest.approx(1.0)


def test_source_limit_enforced():
    sys = build_system(1.0, -50.0, 1.0, -1.0, M=np.eye(2))
    with pytest.raises(CflViolation):
        S.build_grid(sys, 1.0, 10, 10)


def test_quadrature_weights():
    g = S.SpaceTimeGrid(1.0, 2.0, 4, 8, "rectangle")
    w = g.time_weights()
    assert np.allclose(w[:-1], 0.25) and w[-1] == 0
    gt = S.SpaceTimeGrid(1.0, 2.0, 4, 8, "trapezoid")
    wt = gt.time_weights()
    assert wt[0] == wt[-1] == 0.125 and np.allclose(wt[1:-1], 0.25)
    assert g.signal_weights().sum() == pytest.approx(2.0)
    assert gt.signal_weights().sum() == pytest.approx(2.0)
    assert g.space_weights().sum() == pytest.approx(1.0)


def test_grid_validation():
    with pytest.raises(ShapeMismatch):
        S.SpaceTimeGrid(1.0, 1.0, 0, 5)
    with pytest.raises(ValueError):
        S.SpaceTimeGrid(1.0, 1.0, 5, 5, "simpson")


def test_exact_transport_step_response(transport):
    g = S.build_grid(transport, 3.0, 20, 60)
    u = np.column_stack([np.ones(g.n_t), np.zeros(g.n_t)])
    y = S.forward_traces(transport, g, u)
    t = g.t[1:]
    assert np.all(y[t <= 1.0 + 1e-12, 0] == 0.0)
    assert np.all(y[t > 1.0 + 1e-12, 0] == 1.0)
    assert np.all(y[:, 1] == 0.0)


def test_transport_trace_is_delayed_shift(transport, rng):
    g = S.build_grid(transport, 2.0, 16, 32)
    u = rng.standard_normal((g.n_t, 2))
    y = S.forward_traces(transport, g, u)
    assert np.allclose(y[g.n_x :], u[: -g.n_x], rtol=0, atol=1e-14)
    assert np.all(y[: g.n_x] == 0)


def test_damped_steady_trace(example1):
    g = S.grid_for_cfl(example1, 5.0, 100)
    u = np.column_stack([np.ones(g.n_t), np.zeros(g.n_t)])
    y = S.forward_traces(example1, g, u)
    assert abs(y[-1, 0] - math.exp(-1)) <= 1.0 / g.n_x


def test_zero_data_zero_trajectory(variable):
    g = S.grid_for_cfl(variable, 3.0, 32, 0.8)
    st = S.forward_solve(variable, g, np.zeros((g.n_t, 2)))
    assert st.shape == (g.n_t + 1, g.n_x + 1, 2)
    assert not np.any(st)


def test_shape_checks(variable):
    g = S.grid_for_cfl(variable, 3.0, 32, 0.8)
    with pytest.raises(ShapeMismatch):
        S.forward_solve(variable, g, np.zeros((g.n_t + 1, 2)))
    with pytest.raises(ShapeMismatch):
        S.forward_solve(variable, g, np.zeros((g.n_t, 2)), np.zeros((g.n_x, 2)))


def test_adjoint_zero_data(variable):
    g = S.grid_for_cfl(variable, 3.0, 32, 0.8)
    assert not np.any(S.adjoint_backward_solve(variable, g, np.zeros((g.n_t, 2))))


def test_adjoint_reverse_transport(transport):
    g = S.build_grid(transport, 3.0, 20, 60)
    zT = np.column_stack([np.ones(g.n_t), np.zeros(g.n_t)])
    z = S.adjoint_backward_solve(transport, g, zT)
    T, L = g.T, g.L
    for n in range(g.n_t):
        for i in range(g.n_x + 1):
            reach = g.t[n] + (L - g.x[i])
            if reach < T - 1e-9:
                assert z[n, i, 0] == pytest.approx(1.0)
            elif reach > T + g.dt + 1e-9:
                assert z[n, i, 0] == 0.0
    assert not np.any(z[..., 1])


def test_steady_decoupled(transport):
    g = S.build_grid(transport, 1.0, 10, 10)
    R = S.steady_solve(transport, g, np.array([0.7, -0.3]))
    assert np.allclose(R[:, 0], 0.7) and np.allclose(R[:, 1], -0.3)
    assert not np.any(S.steady_solve(transport, g, np.zeros(2)))


def test_steady_rotation_oracle():
    sys = build_system(1.0, -1.0, 1.0, -1.0, M=np.array([[0.0, 1.0], [1.0, 0.0]]))
    exact = np.array([1 / math.cos(1.0), -math.tan(1.0)])
    errs = []
    for nx in (50, 100, 200, 400):
        g = S.grid_for_cfl(sys, 1.0, nx)
        R = S.steady_solve(sys, g, np.array([1.0, 0.0]))
        errs.append(np.abs(np.array([R[-1, 0], R[0, 1]]) - exact).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert errs[-1] < 1e-2
    assert np.all((orders > 0.8) & (orders < 1.2))


def test_steady_adjoint_decoupled():
    sys = build_system(1.0, 0.0, 2.0, -0.5)
    g = S.grid_for_cfl(sys, 1.0, 20)
    Z = S.steady_adjoint_solve(sys, g, np.array([1.0, 3.0]))
    assert np.allclose(Z[:, 0], 0.5) and np.allclose(Z[:, 1], 6.0)
    assert not np.any(S.steady_adjoint_solve(sys, g, np.zeros(2)))


@pytest.mark.parametrize("rule", ["rectangle", "trapezoid"])
def test_steady_compatibility(variable, rule):
    g = S.grid_for_cfl(variable, 4.0, 64, 0.8, rule)
    us = np.array([0.7, -0.3])
    R = S.steady_solve(variable, g, us)
    st = S.forward_solve(variable, g, np.tile(us, (g.n_t, 1)), R)
    per_step = np.abs(np.diff(st, axis=0)).max(axis=(1, 2))
    assert per_step.max() <= 1e-12 * np.abs(R).max()


def test_energy_saturates_in_horizon(example1):
    def energy(T):
        g = S.grid_for_cfl(example1, T, 50)
        t = g.t[1:]
        u = np.where(t < 1.0, 1.0, 0.0)[:, None] * np.array([1.0, 0.5])
        h0 = np.column_stack([np.sin(np.pi * g.x)] * 2)
        st = S.forward_solve(example1, g, u, h0)
        return g.time_weights() @ (np.sum(st**2, axis=2) @ g.space_weights())

    e10, e20 = energy(10.0), energy(20.0)
    assert e10 <= e20 <= e10 * (1 + 1e-3)


def test_trace_refinement_order(variable):
    traces = []
    for nx in (40, 80, 160, 320):
        g = S.build_grid(variable, 8.0, nx, int(round(8.0 * 2.4 * nx / 4.0)))
        t = g.t[1:]
        u = np.column_stack([np.sin(t) ** 2, 0.5 * np.sin(0.7 * t) ** 2])
        traces.append(S.forward_traces(variable, g, u))
    diffs = [np.sqrt(np.mean((a - b[1::2]) ** 2)) for a, b in zip(traces, traces[1:])]
    orders = np.log2(np.array(diffs[:-1]) / diffs[1:])
    assert np.all((orders >= 0.8) & (orders <= 1.2)), orders


def test_singular_steady_system_reported():
    # with eta0 M chosen so that the discrete steady map hits a pole
    sys = build_system(1.0, -1.0, 1.0, -1.0, M=np.array([[0.0, 1.0], [-1.0, 0.0]]) * (math.pi / 2))
    g = S.grid_for_cfl(sys, 1.0, 10)
    try:
        R = S.steady_solve(sys, g, np.array([1.0, 0.0]))
    except SingularSystem:
        return
    assert np.all(np.isfinite(R))


def test_csv_writers(tmp_path, transport):
    g = S.build_grid(transport, 1.0, 4, 4)
    st = S.forward_solve(transport, g, np.ones((4, 2)))
    S.write_trajectory_csv(tmp_path / "a.csv", g, st)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "t,x,r_plus,r_minus" and len(lines) == 1 + 5 * 5
    S.write_profile_csv(tmp_path / "b.csv", g, st[-1])
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "x,R_plus,R_minus"
