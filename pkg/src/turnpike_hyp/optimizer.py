"""Linear-quadratic boundary control: objective, gradient and CG solves.

The running cost is ``f0(u_plus, y_minus) + fL(u_minus, y_plus)`` with
``f(z) = 0.5 z^T A z + c^T z + k`` where ``y = F_T u`` is the boundary trace.
The first-order condition is the linear system

    (M1 + M2 F + F* M3 + F* M4 F) u = -(v1 + F* v2)

which is symmetric positive definite in the weighted inner product, so it
is solved with conjugate gradients, matrix-free.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import solvers
from .errors import LambdaOutOfRange, NoConvergence, NonSPD, ShapeMismatch, SingularSystem, SPDViolation
from .operators import apply_FT, apply_FT_star, assemble_static_maps, inner_product_H
from .solvers import SpaceTimeGrid
from .system import SystemSpec

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticCost:
    """Boundary cost blocks. ``k0``/``kL`` are additive constants kept for reporting only."""

    A0: np.ndarray
    AL: np.ndarray
    c0: np.ndarray
    cL: np.ndarray
    k0: float = 0.0
    kL: float = 0.0

    def __post_init__(self):
        for name in ("A0", "AL"):
            A = np.asarray(getattr(self, name), dtype=float).reshape(2, 2)
            if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
                raise NonSPD(f"{name} is not symmetric")
            if np.linalg.eigvalsh(A)[0] <= 0:
                raise NonSPD(f"{name} is not positive definite")
            object.__setattr__(self, name, A)
        for name in ("c0", "cL"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))

    @property
    def M1(self):
        return np.diag([self.A0[0, 0], self.AL[0, 0]])

    @property
    def M2(self):
        return np.array([[0.0, self.A0[0, 1]], [self.AL[0, 1], 0.0]])

    @property
    def M3(self):
        return np.array([[0.0, self.AL[0, 1]], [self.A0[0, 1], 0.0]])

    @property
    def M4(self):
        return np.diag([self.AL[1, 1], self.A0[1, 1]])

    @property
    def v1(self):
        return np.array([self.c0[0], self.cL[0]])

    @property
    def v2(self):
        return np.array([self.cL[1], self.c0[1]])

    def scaled(self, s: float) -> "QuadraticCost":
        return QuadraticCost(s * self.A0, s * self.AL, s * self.c0, s * self.cL, s * self.k0, s * self.kL)


def cost_from_tracking(lam: float, R_b) -> QuadraticCost:
    """``lam |u|^2 + (1 - lam) |y - R_b|^2`` split into the two boundary terms."""
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise LambdaOutOfRange(f"lambda must lie in (0, 1), got {lam}")
    Rp, Rm = (float(v) for v in R_b)
    A = np.diag([2 * lam, 2 * (1 - lam)])
    return QuadraticCost(
        A,
        A.copy(),
        np.array([0.0, -2 * (1 - lam) * Rm]),
        np.array([0.0, -2 * (1 - lam) * Rp]),
        k0=(1 - lam) * Rm**2,
        kL=(1 - lam) * Rp**2,
    )


def _quad(A, c, k, a, b):
    return 0.5 * (A[0, 0] * a * a + 2 * A[0, 1] * a * b + A[1, 1] * b * b) + c[0] * a + c[1] * b + k


def running_cost(cost: QuadraticCost, u, trace) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    y = np.asarray(trace, dtype=float)
    return _quad(cost.A0, cost.c0, cost.k0, u[..., 0], y[..., 1]) + _quad(
        cost.AL, cost.cL, cost.kL, u[..., 1], y[..., 0]
    )


def eval_J(cost: QuadraticCost, grid: SpaceTimeGrid, u, trace) -> float:
    u = np.asarray(u, dtype=float)
    y = np.asarray(trace, dtype=float)
    if u.shape != (grid.n_t, 2) or y.shape != u.shape:
        raise ShapeMismatch(f"control {u.shape} / trace {y.shape} do not match n_t={grid.n_t}")
    return float(np.sum(grid.signal_weights() * running_cost(cost, u, y)))


def eval_J0(cost: QuadraticCost, u_static, profile) -> float:
    u = np.asarray(u_static, dtype=float)
    prof = np.asarray(profile, dtype=float)
    y = np.array([prof[-1, 0], prof[0, 1]])
    return float(running_cost(cost, u, y))


def _blocks(M, s):
    return s @ M.T


def grad_dynamic(cost: QuadraticCost, sys: SystemSpec, grid: SpaceTimeGrid, u) -> np.ndarray:
    """H-gradient of the reduced objective ``u -> J(u, F_T u)``."""
    u = np.asarray(u, dtype=float)
    y = apply_FT(sys, grid, u)
    inner = _blocks(cost.M3, u) + _blocks(cost.M4, y) + cost.v2
    return _blocks(cost.M1, u) + _blocks(cost.M2, y) + cost.v1 + apply_FT_star(sys, grid, inner)


def hessian_apply(cost: QuadraticCost, sys: SystemSpec, grid: SpaceTimeGrid, d) -> np.ndarray:
    y = apply_FT(sys, grid, d)
    inner = _blocks(cost.M3, d) + _blocks(cost.M4, y)
    return _blocks(cost.M1, d) + _blocks(cost.M2, y) + apply_FT_star(sys, grid, inner)


def quadratic_form(cost: QuadraticCost, sys: SystemSpec, grid: SpaceTimeGrid, d) -> float:
    """``q(d)``: the purely quadratic part of the objective, from A0, AL and one forward solve."""
    d = np.asarray(d, dtype=float)
    y = apply_FT(sys, grid, d)
    zero = np.zeros(2)
    per_t = _quad(cost.A0, zero, 0.0, d[:, 0], y[:, 1]) + _quad(cost.AL, zero, 0.0, d[:, 1], y[:, 0])
    return float(np.sum(grid.signal_weights() * per_t))


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    inner: Callable[[np.ndarray, np.ndarray], float],
    x0: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = 1000,
) -> CGResult:
    """CG for a self-adjoint positive operator under the inner product ``inner``.

    Stops on ``||r|| <= tol ||b||``; the final residual is recomputed from
    scratch and CG restarts if recursion drift left it above tolerance.
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.sqrt(inner(b, b))
    history = []
    if bnorm == 0.0:
        x[...] = 0.0
        return CGResult(x, 0, 0.0, history)
    target = tol * bnorm
    it = 0
    for _restart in range(4):
        r = b - apply(x)
        rr = inner(r, r)
        history.append(np.sqrt(rr) / bnorm)
        if np.sqrt(rr) <= target:
            return CGResult(x, it, np.sqrt(rr) / bnorm, history)
        p = r.copy()
        while it < max_iter:
            Ap = apply(p)
            curv = inner(p, Ap)
            if curv <= 0:
                raise SPDViolation(f"nonpositive curvature {curv:.3e} at CG iteration {it}")
            alpha = rr / curv
            x += alpha * p
            r -= alpha * Ap
            rr_new = inner(r, r)
            it += 1
            history.append(np.sqrt(rr_new) / bnorm)
            if np.sqrt(rr_new) <= target:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        else:
            raise NoConvergence(f"CG stalled at relative residual {history[-1]:.3e} after {it} iterations")
    r = b - apply(x)
    res = np.sqrt(inner(r, r)) / bnorm
    if res > tol:
        raise NoConvergence(f"CG residual {res:.3e} above tolerance after restarts")
    return CGResult(x, it, res, history)


@dataclass
class StaticSolution:
    control: np.ndarray
    profile: np.ndarray
    objective: float
    multiplier: np.ndarray
    multiplier_profile: np.ndarray
    F_sigma: np.ndarray
    residual: float


@dataclass
class DynamicSolution:
    control: np.ndarray
    trace: np.ndarray
    state: np.ndarray | None
    objective: float
    multiplier_trace: np.ndarray
    cg_iters: int
    residual: float
    history: list = field(default_factory=list)


def static_system(cost: QuadraticCost, F: np.ndarray):
    H = cost.M1 + cost.M2 @ F + F.T @ cost.M3 + F.T @ cost.M4 @ F
    g = cost.v1 + F.T @ cost.v2
    return H, g


def solve_static(cost: QuadraticCost, sys: SystemSpec, grid: SpaceTimeGrid) -> StaticSolution:
    """Optimal constant control for the steady problem (direct 2x2 solve)."""
    F = assemble_static_maps(sys, grid).F_sigma
    H, g = static_system(cost, F)
    try:
        u = np.linalg.solve(H, -g)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    prof = solvers.steady_solve(sys, grid, u)
    y = F @ u
    p0 = cost.M3 @ u + cost.M4 @ y + cost.v2
    mult = np.array([p0[0] / float(sys.d_plus(grid.L)), p0[1] / abs(float(sys.d_minus(0.0)))])
    mprof = solvers.steady_adjoint_solve(sys, grid, p0)
    resid = cost.M1 @ u + cost.M2 @ y + cost.v1 + F.T @ p0
    scale = max(np.linalg.norm(g), np.linalg.norm(H) * np.linalg.norm(u), 1e-300)
    return StaticSolution(u, prof, eval_J0(cost, u, prof), mult, mprof, F, float(np.linalg.norm(resid) / scale))


def _multiplier_trace(cost, sys, grid, u, y):
    data = _blocks(cost.M3, u) + _blocks(cost.M4, y) + cost.v2
    c = solvers.coefficients(sys, grid)
    return np.column_stack([data[:, 0] / c.d_plus_L, data[:, 1] / abs(c.d_minus_0)])


def _finish(cost, sys, grid, u, res: CGResult, keep_state: bool) -> DynamicSolution:
    y = apply_FT(sys, grid, u)
    state = solvers.forward_solve(sys, grid, u) if keep_state else None
    return DynamicSolution(
        u,
        y,
        state,
        eval_J(cost, grid, u, y),
        _multiplier_trace(cost, sys, grid, u, y),
        res.iterations,
        res.residual,
        res.history,
    )


def solve_dynamic(
    cost: QuadraticCost,
    sys: SystemSpec,
    grid: SpaceTimeGrid,
    tol: float = DEFAULT_TOL,
    warm_start: bool = True,
    max_iter: int | None = None,
    keep_state: bool = True,
) -> DynamicSolution:
    """Optimal boundary control on ``[0, T]`` by CG on the optimality system."""
    g0 = cost.v1 + apply_FT_star(sys, grid, np.broadcast_to(cost.v2, (grid.n_t, 2)).copy())
    x0 = None
    if warm_start:
        x0 = np.tile(solve_static(cost, sys, grid).control, (grid.n_t, 1))
    res = conjugate_gradient(
        lambda d: hessian_apply(cost, sys, grid, d),
        -g0,
        lambda a, b: inner_product_H(a, b, grid),
        x0=x0,
        tol=tol,
        max_iter=max_iter or 10 * grid.n_t,
    )
    log.debug("solve_dynamic: %d CG iterations, residual %.3e", res.iterations, res.residual)
    return _finish(cost, sys, grid, res.x, res, keep_state)


def _minus_inner(grid):
    w = grid.signal_weights()
    return lambda a, b: float(np.sum(w * a * b))


def solve_one_sided(
    cost: QuadraticCost,
    sys: SystemSpec,
    grid: SpaceTimeGrid,
    u_plus_fixed,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    keep_state: bool = False,
) -> DynamicSolution:
    """Optimize the minus-channel control with the plus-channel control frozen."""
    up = np.broadcast_to(np.asarray(u_plus_fixed, dtype=float), (grid.n_t,)).copy()

    def embed(um, upv=None):
        u = np.zeros((grid.n_t, 2))
        if upv is not None:
            u[:, 0] = upv
        u[:, 1] = um
        return u

    rhs = -grad_dynamic(cost, sys, grid, embed(np.zeros(grid.n_t), up))[:, 1]
    F = assemble_static_maps(sys, grid).F_sigma
    H, g = static_system(cost, F)
    um0 = -(H[1, 0] * up.mean() + g[1]) / H[1, 1]
    res = conjugate_gradient(
        lambda d: hessian_apply(cost, sys, grid, embed(d))[:, 1],
        rhs,
        _minus_inner(grid),
        x0=np.full(grid.n_t, um0),
        tol=tol,
        max_iter=max_iter or 10 * grid.n_t,
    )
    return _finish(cost, sys, grid, embed(res.x, up), res, keep_state)


def one_sided_residual(lam: float, R_b, sys: SystemSpec, grid: SpaceTimeGrid, u) -> np.ndarray:
    """``lam u_minus + (1 - lam) (F_T^*(F_T u - R_b))_minus`` for the tracking cost."""
    y = apply_FT(sys, grid, u) - np.asarray(R_b, dtype=float)
    return lam * np.asarray(u)[:, 1] + (1 - lam) * apply_FT_star(sys, grid, y)[:, 1]


def estimate_kappa(
    cost: QuadraticCost,
    sys: SystemSpec,
    grid: SpaceTimeGrid,
    iterations: int = 200,
    rtol: float = 1e-9,
    seed: int = 0,
    method: str = "inverse",
) -> float:
    """Smallest eigenvalue of the reduced Hessian.

    ``method="inverse"`` runs inverse power iteration (one CG solve per step)
    and returns the Rayleigh quotient of the last iterate. ``"lanczos"`` hands
    the symmetrized operator ``W^(1/2) H W^(-1/2)`` to ARPACK, which is much
    faster when the bottom of the spectrum is clustered.
    """
    rng = np.random.default_rng(seed)
    apply = lambda d: hessian_apply(cost, sys, grid, d)  # noqa: E731
    if method == "lanczos":
        sw = np.sqrt(grid.signal_weights())[:, None]
        n = 2 * grid.n_t
        op = LinearOperator(
            (n, n), matvec=lambda x: (sw * apply(x.reshape(grid.n_t, 2) / sw)).ravel(), dtype=float
        )
        try:
            lam = eigsh(op, k=1, which="SA", tol=rtol, maxiter=iterations * n, v0=rng.standard_normal(n),
                        return_eigenvectors=False)[0]
        except ArpackNoConvergence as exc:
            raise NoConvergence(f"Lanczos did not converge: {exc}") from exc
        if lam <= 0:
            raise SPDViolation(f"smallest Ritz value {lam:.3e} is not positive")
        return float(lam)
    if method != "inverse":
        raise ValueError(f"unknown method {method!r}")
    inner = lambda a, b: inner_product_H(a, b, grid)  # noqa: E731
    v = rng.standard_normal((grid.n_t, 2))
    v /= np.sqrt(inner(v, v))
    lam_old = inner(v, apply(v))
    for _ in range(iterations):
        w = conjugate_gradient(apply, v, inner, tol=1e-12, max_iter=10 * grid.n_t).x
        v = w / np.sqrt(inner(w, w))
        lam = inner(v, apply(v))
        if lam <= 0:
            raise SPDViolation(f"Rayleigh quotient {lam:.3e} is not positive")
        if abs(lam - lam_old) <= rtol * lam:
            return float(lam)
        lam_old = lam
    raise NoConvergence(f"inverse iteration did not settle within {iterations} steps")


def write_solution_csv(path, grid: SpaceTimeGrid, sol: DynamicSolution) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u_plus", "u_minus", "trace_plus", "trace_minus"])
        for n, t in enumerate(grid.t[1:]):
            w.writerow([repr(float(v)) for v in (t, *sol.control[n], *sol.trace[n])])


def write_cg_log(path, sol: DynamicSolution) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual"])
        for k, r in enumerate(sol.history):
            w.writerow([k, repr(float(r))])
