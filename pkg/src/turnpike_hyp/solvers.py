"""Upwind discretization of the forward, adjoint and steady problems.

Signals (boundary controls, traces) are arrays of shape ``(n_t, 2)`` with
columns ``(plus, minus)``. Trajectories are ``(n_t + 1, n_x + 1, 2)`` and
steady profiles ``(n_x + 1, 2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from . import _kernels
from .errors import CflViolation, ShapeMismatch, SingularSystem
from .system import SystemSpec

# the source is treated at the new time level; dt * |eta0| * max ||M(x)||_2 < 1
# keeps every node-local system I - dt eta0 M invertible
SOURCE_LIMIT = 1.0
_CFL_SLACK = 1e-12


@dataclass(frozen=True)
class SpaceTimeGrid:
    L: float
    T: float
    n_x: int
    n_t: int
    quad_rule: str = "rectangle"

    def __post_init__(self):
        if self.n_x < 1 or self.n_t < 1:
            raise ShapeMismatch("grid needs n_x >= 1 and n_t >= 1")
        if self.quad_rule not in ("rectangle", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.quad_rule!r}")

    @property
    def dx(self) -> float:
        return self.L / self.n_x

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x + 1) * self.dx

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    def time_weights(self) -> np.ndarray:
        """Quadrature weights on the ``n_t + 1`` time nodes."""
        w = np.full(self.n_t + 1, self.dt)
        if self.quad_rule == "rectangle":
            w[-1] = 0.0
        else:
            w[0] = w[-1] = 0.5 * self.dt
        return w

    def signal_weights(self) -> np.ndarray:
        """Weights for length-``n_t`` signals.

        Sample ``n`` is the value at node ``t_{n+1}``; under the trapezoid rule
        the ``t_0`` node weight is lumped onto sample 0.
        """
        if self.quad_rule == "rectangle":
            return np.full(self.n_t, self.dt)
        w = self.time_weights()
        out = w[1:].copy()
        out[0] += w[0]
        return out

    def space_weights(self) -> np.ndarray:
        w = np.full(self.n_x + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def with_horizon(self, T: float, n_t: int) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.L, T, self.n_x, n_t, self.quad_rule)


def cfl_of(sys: SystemSpec, grid: SpaceTimeGrid) -> float:
    x = grid.x
    speed = np.maximum(sys.d_plus(x), -sys.d_minus(x))
    return float(np.max(speed) * grid.dt / grid.dx)


def source_number(sys: SystemSpec, grid: SpaceTimeGrid) -> float:
    norms = np.linalg.norm(sys.M(grid.x), ord=2, axis=(-2, -1))
    return float(grid.dt * abs(sys.eta0) * np.max(norms))


def check_grid(sys: SystemSpec, grid: SpaceTimeGrid) -> None:
    if abs(grid.L - sys.L) > 1e-12 * sys.L:
        raise ShapeMismatch(f"grid length {grid.L} != system length {sys.L}")
    cfl = cfl_of(sys, grid)
    if cfl > 1.0 + _CFL_SLACK:
        raise CflViolation(f"CFL number {cfl:.6g} exceeds 1")
    src = source_number(sys, grid)
    if src >= SOURCE_LIMIT:
        raise CflViolation(f"dt*|eta0|*max||M|| = {src:.4g} is not below {SOURCE_LIMIT}")


def build_grid(sys: SystemSpec, T: float, n_x: int, n_t: int, quad_rule: str = "rectangle") -> SpaceTimeGrid:
    grid = SpaceTimeGrid(sys.L, float(T), int(n_x), int(n_t), quad_rule)
    check_grid(sys, grid)
    return grid


def grid_for_cfl(sys: SystemSpec, T: float, n_x: int, cfl: float = 1.0, quad_rule: str = "rectangle") -> SpaceTimeGrid:
    """Smallest ``n_t`` keeping the CFL number at or below ``cfl``."""
    dx = sys.L / n_x
    n_t = int(np.ceil(T * sys.max_speed() / (cfl * dx) - 1e-9))
    return build_grid(sys, T, n_x, max(n_t, 1), quad_rule)


@dataclass(frozen=True)
class _Coefficients:
    cp: np.ndarray
    cm: np.ndarray
    S: np.ndarray
    Sa: np.ndarray
    P: np.ndarray
    Pa: np.ndarray
    d_plus_0: float
    d_plus_L: float
    d_minus_0: float
    d_minus_L: float


@lru_cache(maxsize=128)
def coefficients(sys: SystemSpec, grid: SpaceTimeGrid) -> _Coefficients:
    check_grid(sys, grid)
    x = grid.x
    lam = grid.dt / grid.dx
    dp, dm = sys.speeds(x)
    M = sys.M(x)
    S = grid.dt * sys.eta0 * M
    Dp = np.zeros_like(M)
    Dp[:, 0, 0] = sys.d_plus_prime(x)
    Dp[:, 1, 1] = sys.d_minus_prime(x)
    Sa = np.ascontiguousarray(grid.dt * (sys.eta0 * np.swapaxes(M, -1, -2) + Dp))
    S = np.ascontiguousarray(S)
    if np.max(np.linalg.norm(Sa, ord=2, axis=(-2, -1))) >= SOURCE_LIMIT:
        raise CflViolation("adjoint source term too large for this time step")
    return _Coefficients(
        np.ascontiguousarray(dp * lam),
        np.ascontiguousarray(dm * lam),
        S,
        Sa,
        _kernels.source_inverse(S),
        _kernels.source_inverse(Sa),
        float(dp[0]),
        float(dp[-1]),
        float(dm[0]),
        float(dm[-1]),
    )


def _signal(u, grid: SpaceTimeGrid, name: str = "signal") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_t, 2):
        raise ShapeMismatch(f"{name} has shape {u.shape}, expected {(grid.n_t, 2)}")
    return np.ascontiguousarray(u)


def _profile(h, grid: SpaceTimeGrid, name: str = "profile") -> np.ndarray:
    if h is None:
        return np.zeros((grid.n_x + 1, 2))
    h = np.asarray(h, dtype=float)
    if h.shape != (grid.n_x + 1, 2):
        raise ShapeMismatch(f"{name} has shape {h.shape}, expected {(grid.n_x + 1, 2)}")
    return np.ascontiguousarray(h)


def forward_solve(sys: SystemSpec, grid: SpaceTimeGrid, u, h0=None) -> np.ndarray:
    """State trajectory of the boundary-controlled problem, shape ``(n_t+1, n_x+1, 2)``."""
    c = coefficients(sys, grid)
    states = np.empty((grid.n_t + 1, grid.n_x + 1, 2))
    _kernels.forward_sweep(c.cp, c.cm, c.S, c.P, _signal(u, grid, "control"), _profile(h0, grid, "h0"), states)
    return states


def forward_traces(sys: SystemSpec, grid: SpaceTimeGrid, u, h0=None) -> np.ndarray:
    c = coefficients(sys, grid)
    return _kernels.forward_sweep(
        c.cp, c.cm, c.S, c.P, _signal(u, grid, "control"), _profile(h0, grid, "h0"), np.empty((0, 0, 2))
    )


def transpose_traces(sys: SystemSpec, grid: SpaceTimeGrid, z) -> np.ndarray:
    c = coefficients(sys, grid)
    return _kernels.transpose_sweep(c.cp, c.cm, c.S, c.P, _signal(z, grid, "trace"), grid.signal_weights())


def adjoint_backward_solve(sys: SystemSpec, grid: SpaceTimeGrid, zT) -> np.ndarray:
    """Backward solve of the continuous adjoint system with zero terminal state.

    Boundary data: ``z_plus(t, L) = zT_plus / d_plus(L)`` and
    ``z_minus(t, 0) = zT_minus / |d_minus(0)|``, imposed at ``t_{n+1}``.
    """
    c = coefficients(sys, grid)
    zb = _signal(zT, grid, "adjoint data").copy()
    zb[:, 0] /= c.d_plus_L
    zb[:, 1] /= abs(c.d_minus_0)
    states = np.empty((grid.n_t + 1, grid.n_x + 1, 2))
    _kernels.backward_adjoint_sweep(c.cp, c.cm, c.Sa, c.Pa, zb, states)
    return states


def _banded(rows, n):
    ab = np.zeros((5, n))
    for i, j, v in rows:
        ab[2 + i - j, j] += v
    return ab


def _solve(ab, rhs):
    try:
        sol = solve_banded((2, 2), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise SingularSystem(f"banded factorization failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("steady system is singular at this grid")
    return sol


def _steady_matrix(sys: SystemSpec, grid: SpaceTimeGrid) -> np.ndarray:
    # unknown ordering: (R_plus^i, R_minus^i) -> (2i, 2i+1)
    nx, dx = grid.n_x, grid.dx
    x = grid.x
    dp, dm = sys.speeds(x)
    M = sys.eta0 * sys.M(x)
    rows = [(0, 0, 1.0), (2 * nx + 1, 2 * nx + 1, 1.0)]
    for i in range(1, nx + 1):
        r = 2 * i
        rows += [(r, r, dp[i] / dx - M[i, 0, 0]), (r, r - 2, -dp[i] / dx), (r, r + 1, -M[i, 0, 1])]
    for i in range(nx):
        r = 2 * i + 1
        rows += [(r, r, -dm[i] / dx - M[i, 1, 1]), (r, r + 2, dm[i] / dx), (r, r - 1, -M[i, 1, 0])]
    return _banded(rows, 2 * nx + 2)


def steady_solve(sys: SystemSpec, grid: SpaceTimeGrid, u_static) -> np.ndarray:
    """Steady state of the discrete forward scheme for constant controls.

    ``u_static`` is a 2-vector, or an array ``(2, k)`` of ``k`` control
    columns (returning ``(k, n_x+1, 2)``).
    """
    u = np.asarray(u_static, dtype=float)
    n = 2 * grid.n_x + 2
    cols = u.reshape(2, -1)
    rhs = np.zeros((n, cols.shape[1]))
    rhs[0] = cols[0]
    rhs[-1] = cols[1]
    sol = _solve(_steady_matrix(sys, grid), rhs)
    prof = sol.T.reshape(-1, grid.n_x + 1, 2)
    return prof[0] if u.ndim == 1 else prof


def _steady_adjoint_matrix(sys: SystemSpec, grid: SpaceTimeGrid) -> np.ndarray:
    nx, dx = grid.n_x, grid.dx
    x = grid.x
    dp, dm = sys.speeds(x)
    Mt = sys.eta0 * np.swapaxes(sys.M(x), -1, -2)
    dpp, dmp = sys.d_plus_prime(x), sys.d_minus_prime(x)
    rows = [(2 * nx, 2 * nx, 1.0), (1, 1, 1.0)]
    for i in range(nx):
        r = 2 * i
        rows += [(r, r, -dp[i] / dx + Mt[i, 0, 0] + dpp[i]), (r, r + 2, dp[i] / dx), (r, r + 1, Mt[i, 0, 1])]
    for i in range(1, nx + 1):
        r = 2 * i + 1
        rows += [(r, r, dm[i] / dx + Mt[i, 1, 1] + dmp[i]), (r, r - 2, -dm[i] / dx), (r, r - 1, Mt[i, 1, 0])]
    return _banded(rows, 2 * nx + 2)


def steady_adjoint_solve(sys: SystemSpec, grid: SpaceTimeGrid, z) -> np.ndarray:
    """Steady adjoint profile with ``z_plus(L) = z[0]/d_plus(L)``, ``z_minus(0) = z[1]/|d_minus(0)|``."""
    z = np.asarray(z, dtype=float)
    cols = z.reshape(2, -1)
    n = 2 * grid.n_x + 2
    dpL = float(sys.d_plus(grid.L))
    dm0 = float(sys.d_minus(0.0))
    rhs = np.zeros((n, cols.shape[1]))
    rhs[2 * grid.n_x] = cols[0] / dpL
    rhs[1] = cols[1] / abs(dm0)
    sol = _solve(_steady_adjoint_matrix(sys, grid), rhs)
    prof = sol.T.reshape(-1, grid.n_x + 1, 2)
    return prof[0] if z.ndim == 1 else prof


def write_trajectory_csv(path, grid: SpaceTimeGrid, states: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "r_plus", "r_minus"])
        for n, t in enumerate(grid.t):
            for i, x in enumerate(grid.x):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(states[n, i, 0])), repr(float(states[n, i, 1]))])


def write_profile_csv(path, grid: SpaceTimeGrid, profile: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "R_plus", "R_minus"])
        for i, x in enumerate(grid.x):
            w.writerow([repr(float(x)), repr(float(profile[i, 0])), repr(float(profile[i, 1]))])
