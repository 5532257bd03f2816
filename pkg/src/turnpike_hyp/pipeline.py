"""Gas pipeline transition: isothermal Euler model linearized at a stationary state.

Physical variables are density ``rho`` and mass flux ``q``; the diagonal
(Riemann) variables are ``R = (c rho + q, -c rho + q)`` travelling with
speeds ``+c`` and ``-c``. The linear model in ``r = R - R_bar`` is
``r_t + D r_x = -M r`` with ``M = -F'(R_bar)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DegenerateDensity, ValidationError, VacuumReached
from .optimizer import DEFAULT_TOL, QuadraticCost, solve_dynamic, solve_static
from .solvers import SpaceTimeGrid, build_grid
from .system import SystemSpec, build_system


@dataclass(frozen=True)
class PipelineParams:
    theta: float = 0.05
    g: float = 9.81
    h_prime: float = 0.025
    c: float = 340.0
    L: float = 10_000.0
    T: float = 600.0
    rho_L_0: float = 35.0
    q_L_0: float = 400.0
    rho_L_T: float = 40.0
    q_L_T: float = 400.0
    alpha: float = 0.01
    beta: float = 0.01
    lam: float = 0.1111
    # penalize rho(t,0), q(t,0) themselves instead of their deviation from the initial state
    literal_f0: bool = False

    def __post_init__(self):
        problems = []
        for name in ("theta", "c", "L", "T", "rho_L_0", "rho_L_T", "alpha", "beta", "lam"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                problems.append(f"{name} must be positive, got {v}")
        if self.theta < 0:
            problems.append("theta must be nonnegative")
        if problems:
            raise ValidationError(problems)

    def replace(self, **kw) -> "PipelineParams":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return PipelineParams(**vals)


def to_diagonal(rho, q, c):
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.stack([c * rho + q, -c * rho + q], axis=-1)


def from_diagonal(R, c):
    R = np.asarray(R, dtype=float)
    return (R[..., 0] - R[..., 1]) / (2 * c), (R[..., 0] + R[..., 1]) / 2


@dataclass(frozen=True)
class StationaryState:
    q_bar: float
    x: np.ndarray
    rho_bar: np.ndarray
    R_bar: np.ndarray = field(repr=False)


def _rho_rhs(params: PipelineParams, q: float):
    c2 = params.c**2

    def f(rho):
        if rho <= 0:
            raise VacuumReached(f"density reached {rho:.6g} while integrating the stationary profile")
        return (-params.theta * q * abs(q) / rho - params.g * params.h_prime * rho) / c2

    return f


def stationary_profile(
    params: PipelineParams, q_L: float, rho_L: float, n_x: int, substeps: int = 10
) -> StationaryState:
    """Stationary density from the exit value, classical RK4 marching from ``x = L`` towards ``x = 0``."""
    if not rho_L > 0:
        raise VacuumReached(f"exit density must be positive, got {rho_L}")
    f = _rho_rhs(params, q_L)
    x = np.linspace(0.0, params.L, n_x + 1)
    h = -params.L / (n_x * substeps)
    rho = np.empty(n_x + 1)
    rho[-1] = r = float(rho_L)
    for i in range(n_x, 0, -1):
        for _ in range(substeps):
            k1 = f(r)
            k2 = f(r + 0.5 * h * k1)
            k3 = f(r + 0.5 * h * k2)
            k4 = f(r + h * k3)
            r = r + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            if r <= 0:
                raise VacuumReached(f"density reached {r:.6g} near x = {x[i]:.6g}")
        rho[i - 1] = r
    return StationaryState(float(q_L), x, rho, to_diagonal(rho, np.full_like(rho, q_L), params.c))


def source_and_jacobian(R, params: PipelineParams) -> tuple[np.ndarray, np.ndarray]:
    """Source ``F(R)`` of the diagonal system and its Jacobian."""
    Rp, Rm = (float(v) for v in np.asarray(R, dtype=float).reshape(2))
    s, d = Rp + Rm, Rp - Rm
    if d <= 0:
        raise DegenerateDensity(f"R_plus - R_minus = {d:.6g} is not positive")
    tc, gh = params.theta * params.c, params.g * params.h_prime / (2 * params.c)
    phi = 0.5 * tc * s * abs(s) / d + gh * d
    fric_s = tc * abs(s) / d  # d/ds of 0.5 tc s|s|/d
    fric_d = -0.5 * tc * s * abs(s) / d**2
    dp = fric_s + fric_d + gh
    dm = fric_s - fric_d - gh
    return -phi * np.ones(2), -np.array([[dp, dm], [dp, dm]])


def _source_field(R: np.ndarray, params: PipelineParams) -> np.ndarray:
    s, d = R[..., 0] + R[..., 1], R[..., 0] - R[..., 1]
    if np.any(d <= 0):
        raise DegenerateDensity("nonpositive density in the diagonal state")
    phi = 0.5 * params.theta * params.c * s * np.abs(s) / d + params.g * params.h_prime * d / (2 * params.c)
    return -np.stack([phi, phi], axis=-1)


def linearized_system(params: PipelineParams, st: StationaryState) -> SystemSpec:
    """Linearization at the stationary state: speeds ``+-c``, ``eta0 = -1``, ``M = -F'(R_bar)`` nodewise."""
    Mn = np.stack([-source_and_jacobian(R, params)[1] for R in st.R_bar])
    xn = st.x

    def M(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = np.interp(x, xn, Mn[:, i, j])
        return out

    return build_system(params.L, -1.0, params.c, -params.c, M=M, d_plus_prime=0.0, d_minus_prime=0.0)


def nonlinear_step(params: PipelineParams, R: np.ndarray, grid: SpaceTimeGrid, bc=None) -> np.ndarray:
    """One explicit upwind step of ``R_t + D R_x = F(R)``; ``bc`` overrides the inflow values."""
    lam = params.c * grid.dt / grid.dx
    F = _source_field(R, params)
    out = R.copy()
    out[1:, 0] = R[1:, 0] - lam * (R[1:, 0] - R[:-1, 0]) + grid.dt * F[1:, 0]
    out[:-1, 1] = R[:-1, 1] + lam * (R[1:, 1] - R[:-1, 1]) + grid.dt * F[:-1, 1]
    if bc is not None:
        out[0, 0], out[-1, 1] = bc
    return out


def build_pipeline_cost(params: PipelineParams, st: StationaryState) -> QuadraticCost:
    """The tracking cost in linearized boundary variables.

    At ``x = L`` the cost acts on ``(u_minus, r_plus(L))``, at ``x = 0`` on
    ``(u_plus, r_minus(0))``, with ``rho = rho_bar + (r_plus - r_minus)/2c``
    and ``q = q_bar + (r_plus + r_minus)/2``.
    """
    c, lam, alpha, beta = params.c, params.lam, params.alpha, params.beta
    b = np.array([0.5, 0.5])
    a_L = np.array([-1.0, 1.0]) / (2 * c)  # z = (u_minus, r_plus)
    e_rho = st.rho_bar[-1] - params.rho_L_T
    e_q = st.q_bar - params.q_L_T
    AL = 2 * (np.outer(a_L, a_L) + alpha * np.outer(b, b))
    cL = 2 * (e_rho * a_L + alpha * e_q * b)
    kL = e_rho**2 + alpha * e_q**2
    a_0 = np.array([1.0, -1.0]) / (2 * c)  # z = (u_plus, r_minus)
    A0 = 2 * lam * (np.outer(a_0, a_0) + beta * np.outer(b, b))
    if params.literal_f0:
        rho0, q0 = st.rho_bar[0], st.q_bar
        c0 = 2 * lam * (rho0 * a_0 + beta * q0 * b)
        k0 = lam * (rho0**2 + beta * q0**2)
    else:
        c0, k0 = np.zeros(2), 0.0
    return QuadraticCost(A0, AL, c0, cL, k0, kL)


def boundary_physical(params: PipelineParams, st: StationaryState, u, trace):
    """Physical ``(rho, q)`` at ``x = 0`` and ``x = L`` from controls and traces."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(trace, dtype=float)
    c = params.c
    rho0 = st.rho_bar[0] + (u[:, 0] - y[:, 1]) / (2 * c)
    q0 = st.q_bar + (u[:, 0] + y[:, 1]) / 2
    rhoL = st.rho_bar[-1] + (y[:, 0] - u[:, 1]) / (2 * c)
    qL = st.q_bar + (y[:, 0] + u[:, 1]) / 2
    return rho0, q0, rhoL, qL


def direct_cost(params: PipelineParams, st: StationaryState, grid: SpaceTimeGrid, u, trace) -> float:
    """Quadrature of the physical tracking cost (the ``x = 0`` term per ``literal_f0``)."""
    rho0, q0, rhoL, qL = boundary_physical(params, st, u, trace)
    exit_term = (rhoL - params.rho_L_T) ** 2 + params.alpha * (qL - params.q_L_T) ** 2
    if params.literal_f0:
        entry = rho0**2 + params.beta * q0**2
    else:
        entry = (rho0 - st.rho_bar[0]) ** 2 + params.beta * (q0 - st.q_bar) ** 2
    return float(grid.signal_weights() @ (exit_term + params.lam * entry))


@dataclass(frozen=True)
class Plateau:
    start: float
    end: float
    fraction: float
    ends_larger: bool


def find_plateau(t, e_rho, e_q, threshold: float = 1e-2) -> Plateau:
    """Longest contiguous window where both relative errors stay below ``threshold``."""
    t = np.asarray(t, dtype=float)
    ok = (np.asarray(e_rho) < threshold) & (np.asarray(e_q) < threshold)
    best, k = (0, -1), 0
    while k < len(ok):
        if ok[k]:
            j = k
            while j + 1 < len(ok) and ok[j + 1]:
                j += 1
            if j - k > best[1] - best[0]:
                best = (k, j)
            k = j + 1
        else:
            k += 1
    if best[1] < best[0]:
        return Plateau(np.nan, np.nan, 0.0, False)
    i, j = best
    span = t[-1] - t[0]
    ends = i > 0 and j < len(ok) - 1
    return Plateau(float(t[i]), float(t[j]), float((t[j] - t[i]) / span), bool(ends))


@dataclass
class ScenarioReport:
    params: PipelineParams
    grid: SpaceTimeGrid
    initial: StationaryState
    system: SystemSpec = field(repr=False)
    cost: QuadraticCost = field(repr=False)
    u_static: np.ndarray = None
    static_objective: float = 0.0
    dynamic_objective: float = 0.0
    rho: np.ndarray = field(default=None, repr=False)  # (n_t+1, n_x+1)
    q: np.ndarray = field(default=None, repr=False)
    rho_static: np.ndarray = field(default=None, repr=False)  # (n_x+1,)
    q_static: np.ndarray = field(default=None, repr=False)
    e_rho: np.ndarray = field(default=None, repr=False)  # (n_t+1,)
    e_q: np.ndarray = field(default=None, repr=False)
    plateau: Plateau = None
    control: np.ndarray = field(default=None, repr=False)
    trace: np.ndarray = field(default=None, repr=False)
    cg_iters: int = 0


def run_transition_scenario(
    params: PipelineParams,
    n_x: int = 40,
    n_t: int = 816,
    quad_rule: str = "trapezoid",
    tol: float = DEFAULT_TOL,
    threshold: float = 1e-2,
) -> ScenarioReport:
    """Steer from the stationary state through ``(q_L_0, rho_L_0)`` towards the exit targets."""
    st = stationary_profile(params, params.q_L_0, params.rho_L_0, n_x)
    sys = linearized_system(params, st)
    grid = build_grid(sys, params.T, n_x, n_t, quad_rule)
    cost = build_pipeline_cost(params, st)
    stat = solve_static(cost, sys, grid)
    dyn = solve_dynamic(cost, sys, grid, tol=tol)
    c = params.c
    R = st.R_bar[None] + dyn.state
    rho, q = from_diagonal(R, c)
    rho_s, q_s = from_diagonal(st.R_bar + stat.profile, c)
    e_rho = np.abs(rho[:, 0] - rho_s[0]) / abs(rho_s[0])
    e_q = np.abs(q[:, 0] - q_s[0]) / max(abs(q_s[0]), 1e-300)
    return ScenarioReport(
        params,
        grid,
        st,
        sys,
        cost,
        stat.control,
        stat.objective,
        dyn.objective,
        rho,
        q,
        rho_s,
        q_s,
        e_rho,
        e_q,
        find_plateau(grid.t, e_rho, e_q, threshold),
        dyn.control,
        dyn.trace,
        dyn.cg_iters,
    )


def write_field_csv(path, rep: ScenarioReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "rho", "q"])
        for n, t in enumerate(rep.grid.t):
            for i, x in enumerate(rep.grid.x):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(rep.rho[n, i])), repr(float(rep.q[n, i]))])


def write_error_csv(path, rep: ScenarioReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "e_rho", "e_q"])
        for n, t in enumerate(rep.grid.t):
            w.writerow([repr(float(t)), repr(float(rep.e_rho[n])), repr(float(rep.e_q[n]))])
