"""Integer-valued plus-channel control with a total-variation switching cost.

When the switching weight exceeds ``(1 - lam) |R_b|^2`` an optimal plus
control never switches, so the problem reduces to enumerating the constant
value ``alpha`` in the admissible set and solving a one-sided LQ problem
for each.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import LambdaOutOfRange, ShapeMismatch, ThresholdNotMet, ValidationError
from .operators import assemble_static_maps
from .optimizer import (
    DEFAULT_TOL,
    DynamicSolution,
    QuadraticCost,
    static_system,
    cost_from_tracking,
    running_cost,
    solve_one_sided,
)
from .solvers import SpaceTimeGrid
from .system import SystemSpec


@dataclass(frozen=True)
class IntegerSpec:
    F: tuple
    nu: float
    lam: float
    R_b: tuple

    def __post_init__(self):
        vals = tuple(sorted({int(v) for v in self.F}))
        problems = []
        if not vals or 0 not in vals:
            problems.append("F must be a nonempty finite set of integers containing 0")
        if not self.nu > 0:
            problems.append(f"nu must be positive, got {self.nu}")
        if not 0 < self.lam < 1:
            raise LambdaOutOfRange(f"lambda must lie in (0, 1), got {self.lam}")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "F", vals)
        object.__setattr__(self, "R_b", tuple(float(v) for v in self.R_b))

    def cost(self) -> QuadraticCost:
        return cost_from_tracking(self.lam, self.R_b)

    def ordered(self):
        """Admissible values in tie-breaking order: smaller |alpha| first, then smaller alpha."""
        return sorted(self.F, key=lambda a: (abs(a), a))


def total_variation(u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sum(np.abs(np.diff(u)))) if u.size > 1 else 0.0


@dataclass(frozen=True)
class ThresholdCheck:
    threshold: float
    passes: bool
    variation_bound: float


def switching_threshold_check(spec: IntegerSpec) -> ThresholdCheck:
    thr = (1 - spec.lam) * float(np.dot(spec.R_b, spec.R_b))
    return ThresholdCheck(thr, spec.nu > thr, thr / spec.nu)


@dataclass
class StaticIntegerSolution:
    alpha: int
    u_minus: float
    value: float
    per_alpha: dict = field(default_factory=dict)  # alpha -> (u_minus, value)


def _argmin(table: dict, order) -> int:
    best = None
    for a in order:
        if best is None or table[a] < table[best]:
            best = a
    return best


def solve_integer_static(
    spec: IntegerSpec, cost: QuadraticCost | None, sys: SystemSpec, grid: SpaceTimeGrid
) -> StaticIntegerSolution:
    """Exact enumeration of the steady problem over ``alpha``.

    With ``u_plus = alpha`` fixed the steady objective is a scalar quadratic
    in ``u_minus``, minimized in closed form. ``cost`` defaults to the
    tracking cost of ``spec``.
    """
    cost = spec.cost() if cost is None else cost
    F = assemble_static_maps(sys, grid).F_sigma
    H, g = static_system(cost, F)
    per = {}
    for a in spec.F:
        v = -(H[1, 0] * a + g[1]) / H[1, 1]
        u = np.array([a, v], dtype=float)
        per[a] = (float(v), float(running_cost(cost, u, F @ u)))
    best = _argmin({a: per[a][1] for a in per}, spec.ordered())
    return StaticIntegerSolution(best, per[best][0], per[best][1], per)


@dataclass
class IntegerSolution:
    alpha: int
    minus_solution: DynamicSolution
    omega: float
    per_alpha_objectives: dict
    static_alpha: int
    static_minimizers: tuple
    agreement: bool
    per_alpha_solutions: dict = field(default_factory=dict, repr=False)


def solve_integer_dynamic(
    spec: IntegerSpec,
    cost: QuadraticCost | None,
    sys: SystemSpec,
    grid: SpaceTimeGrid,
    tol: float = DEFAULT_TOL,
    workers: int | None = None,
) -> IntegerSolution:
    """Enumerate constant plus-controls and solve the one-sided problem for each.

    Refuses to run when the switching weight is below the threshold, since
    the optimal plus control is then not known to be constant.
    """
    check = switching_threshold_check(spec)
    if not check.passes:
        raise ThresholdNotMet(
            f"nu = {spec.nu} does not exceed (1 - lambda)|R_b|^2 = {check.threshold}; "
            "the constant-control reduction does not apply"
        )
    cost = spec.cost() if cost is None else cost

    def run(a):
        return solve_one_sided(cost, sys, grid, float(a), tol=tol)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        sols = dict(zip(spec.F, pool.map(run, spec.F)))
    table = {a: sols[a].objective for a in spec.F}
    alpha = _argmin(table, spec.ordered())
    static = solve_integer_static(spec, cost, sys, grid)
    vmin = static.value
    scale = max(abs(vmin), 1.0)
    minimizers = tuple(a for a in spec.F if static.per_alpha[a][1] - vmin <= 1e-12 * scale)
    return IntegerSolution(
        alpha,
        sols[alpha],
        table[alpha],
        table,
        static.alpha,
        minimizers,
        alpha in minimizers,
        sols,
    )


def integer_turnpike_metric(sol: IntegerSolution, static: StaticIntegerSolution, grid: SpaceTimeGrid) -> float:
    """``(1/T) int |u(t) - u_sigma|^2`` against the static solution with the same alpha."""
    u = sol.minus_solution.control
    if u.shape != (grid.n_t, 2):
        raise ShapeMismatch(f"control shape {u.shape} does not match grid")
    v = static.per_alpha[sol.alpha][0]
    ref = np.array([sol.alpha, v], dtype=float)
    w = grid.signal_weights()
    return float(np.sum(w * np.sum((u - ref) ** 2, axis=1)) / grid.T)


def write_alpha_table(path, sol: IntegerSolution, grid: SpaceTimeGrid) -> None:
    w = grid.signal_weights()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["alpha", "J_alpha", "u_minus_norm"])
        for a in sorted(sol.per_alpha_objectives):
            um = sol.per_alpha_solutions[a].control[:, 1] if a in sol.per_alpha_solutions else np.zeros(1)
            out.writerow([a, repr(float(sol.per_alpha_objectives[a])), repr(float(np.sqrt(np.sum(w * um**2))))])
        out.writerow(["agreement", str(sol.agreement).lower(), ""])
