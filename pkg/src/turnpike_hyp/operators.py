"""Control-to-trace maps and their adjoints.

``apply_FT`` maps boundary controls to boundary traces. ``apply_FT_star``
is its exact discrete transpose in the quadrature-weighted inner product
and is what the optimizer uses; ``continuous_adjoint_trace`` discretizes
the adjoint PDE instead and agrees with it only up to O(dx).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import solvers
from .errors import ShapeMismatch
from .solvers import SpaceTimeGrid
from .system import SystemSpec


def inner_product_H(a, b, grid: SpaceTimeGrid) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape != (grid.n_t, 2):
        raise ShapeMismatch(f"signals of shape {a.shape} and {b.shape} on a grid with n_t={grid.n_t}")
    return float(np.sum(grid.signal_weights()[:, None] * a * b))


def norm_H(a, grid: SpaceTimeGrid) -> float:
    return float(np.sqrt(inner_product_H(a, a, grid)))


def apply_FT(sys: SystemSpec, grid: SpaceTimeGrid, u) -> np.ndarray:
    return solvers.forward_traces(sys, grid, u)


def apply_FT_star(sys: SystemSpec, grid: SpaceTimeGrid, z) -> np.ndarray:
    return solvers.transpose_traces(sys, grid, z)


def continuous_adjoint_trace(sys: SystemSpec, grid: SpaceTimeGrid, z) -> np.ndarray:
    """``(d_plus(0) z_plus(., 0), |d_minus(L)| z_minus(., L))`` from the backward adjoint solve."""
    states = solvers.adjoint_backward_solve(sys, grid, z)
    c = solvers.coefficients(sys, grid)
    out = np.empty((grid.n_t, 2))
    out[:, 0] = c.d_plus_0 * states[1:, 0, 0]
    out[:, 1] = abs(c.d_minus_L) * states[1:, -1, 1]
    return out


@dataclass(frozen=True)
class StaticMaps:
    F_sigma: np.ndarray
    F_sigma_star: np.ndarray
    F_sigma_star_adjoint_path: np.ndarray
    adjoint_path_deviation: float


def assemble_static_maps(sys: SystemSpec, grid: SpaceTimeGrid) -> StaticMaps:
    """2x2 steady control-to-trace matrix, its transpose, and the adjoint-ODE estimate of it."""
    prof = solvers.steady_solve(sys, grid, np.eye(2))
    F = np.column_stack([[p[-1, 0], p[0, 1]] for p in prof])
    zprof = solvers.steady_adjoint_solve(sys, grid, np.eye(2))
    dp0 = float(sys.d_plus(0.0))
    dmL = abs(float(sys.d_minus(grid.L)))
    Fs_path = np.column_stack([[dp0 * zp[0, 0], dmL * zp[-1, 1]] for zp in zprof])
    dev = float(np.linalg.norm(Fs_path - F.T) / max(np.linalg.norm(F), 1e-300))
    return StaticMaps(F, F.T.copy(), Fs_path, dev)


def operator_norm(sys: SystemSpec, grid: SpaceTimeGrid, iterations: int = 50, seed: int = 0) -> float:
    """Power iteration on ``F_T^* F_T`` from a fixed-seed start; returns the estimate of ``||F_T||``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((grid.n_t, 2))
    v /= norm_H(v, grid)
    est = 0.0
    for _ in range(iterations):
        w = apply_FT_star(sys, grid, apply_FT(sys, grid, v))
        nrm = norm_H(w, grid)
        if nrm == 0.0:
            return 0.0
        est = np.sqrt(nrm)
        v = w / nrm
    return float(est)


def write_signal_csv(path, grid: SpaceTimeGrid, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        t = grid.t[1:]
        for n in range(grid.n_t):
            w.writerow([repr(float(t[n]))] + [repr(float(columns[k][n])) for k in names])
