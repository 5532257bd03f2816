"""Turnpike diagnostics: metrics, horizon sweeps, the Example-1 oracle, Lyapunov energies."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NotDiagonal, RegimeMismatch, ShapeMismatch
from .operators import norm_H, operator_norm
from .optimizer import DEFAULT_TOL, QuadraticCost, estimate_kappa, grad_dynamic, solve_dynamic, solve_static
from .solvers import SpaceTimeGrid, grid_for_cfl
from .system import Certificate, ExpWeight, Regime, SystemSpec


def control_metric(u_dyn, u_static, grid: SpaceTimeGrid) -> float:
    """``(1/T) int_0^T |u(t) - u_sigma|^2 dt``."""
    u = np.asarray(u_dyn, dtype=float)
    if u.shape != (grid.n_t, 2):
        raise ShapeMismatch(f"control shape {u.shape}, expected {(grid.n_t, 2)}")
    d = u - np.asarray(u_static, dtype=float).reshape(2)
    return float(np.sum(grid.signal_weights() * np.sum(d * d, axis=1)) / grid.T)


def state_metric(r_dyn, R_static, grid: SpaceTimeGrid) -> float:
    """Space-time quadrature of ``|r(t, x) - R_sigma(x)|^2``."""
    r = np.asarray(r_dyn, dtype=float)
    R = np.asarray(R_static, dtype=float)
    if r.shape != (grid.n_t + 1, grid.n_x + 1, 2) or R.shape != (grid.n_x + 1, 2):
        raise ShapeMismatch(f"trajectory {r.shape} / profile {R.shape} do not match the grid")
    sq = np.sum((r - R) ** 2, axis=2) @ grid.space_weights()
    return float(grid.time_weights() @ sq)


@dataclass(frozen=True)
class Example1Oracle:
    u_static: np.ndarray
    t_switch: tuple
    metric_exact: float
    T: float

    def __call__(self, t) -> np.ndarray:
        """Piecewise control: ``u_static`` before the switch time of each channel, zero after."""
        t = np.asarray(t, dtype=float)
        on = np.stack([t < self.t_switch[0], t < self.t_switch[1]], axis=-1)
        return np.where(on, self.u_static, 0.0)

    def sample(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Values on the control samples, evaluated at cell midpoints."""
        tm = 0.5 * (grid.t[:-1] + grid.t[1:])
        return self(tm)


def example1_oracle(sys: SystemSpec, lam: float, R_b, T: float) -> Example1Oracle:
    """Closed-form static control, switch-off times and turnpike metric for a constant diagonal system."""
    if not sys.constant:
        raise NotDiagonal("coefficients vary in x")
    M = np.asarray(sys.M(np.array(0.0)), dtype=float)
    if M[0, 1] != 0.0 or M[1, 0] != 0.0:
        raise NotDiagonal("M has off-diagonal entries")
    L = sys.L
    speeds = np.array([float(sys.d_plus(0.0)), abs(float(sys.d_minus(0.0)))])
    a = np.exp(sys.eta0 * np.diag(M) * L / speeds)
    Rb = np.asarray(R_b, dtype=float)
    u = (1 - lam) * a * Rb / (lam + (1 - lam) * a * a)
    transit = L / speeds
    metric = float(np.sum(transit * u * u) / T)
    return Example1Oracle(u, (float(T - transit[0]), float(T - transit[1])), metric, float(T))


def fit_exponent(horizons, values, floor: float = 0.0) -> tuple[float, bool]:
    """Least-squares slope of ``log(values)`` against ``log(horizons)``; NaN when any value is at or below ``floor``."""
    T = np.asarray(horizons, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(T) < 2 or np.any(v <= floor) or not np.all(np.isfinite(v)):
        return math.nan, False
    slope = np.polyfit(np.log(T), np.log(v), 1)[0]
    return float(slope), True


@dataclass
class SweepEntry:
    T: float
    n_t: int
    control_metric: float
    state_metric: float
    grad_norm_at_static: float
    operator_norm: float
    distance: float
    kappa: float
    dynamic_objective: float
    cg_iters: int

    @property
    def bound(self) -> float:
        """Right-hand side of the coercivity estimate ``|u_delta - u_sigma|_H <= |DJ(u_sigma)|_H / kappa``."""
        return self.grad_norm_at_static / self.kappa if self.kappa > 0 else math.inf


@dataclass
class TurnpikeReport:
    horizons: list
    control_metric: list
    state_metric: list
    fitted_exponent: float
    exponent_applicable: bool
    grad_norm_at_static: list
    kappa: float
    operator_norms: list
    distances: list
    u_static: np.ndarray
    static_objective: float
    entries: list = field(default_factory=list, repr=False)

    def saturation(self, name: str) -> float:
        """max/min of a per-horizon series over the upper half of the horizons."""
        vals = np.asarray(getattr(self, name), dtype=float)
        top = vals[len(vals) // 2 :]
        lo = top.min()
        return float(top.max() / lo) if lo > 0 else (1.0 if top.max() == 0 else math.inf)

    def coercivity_holds(self, rtol: float = 1e-8) -> list:
        return [e.distance <= e.bound * (1 + rtol) for e in self.entries]


def _sweep_one(cost, sys, T, n_x, cfl, quad_rule, tol, u_static, prof, with_kappa, seed):
    grid = grid_for_cfl(sys, T, n_x, cfl, quad_rule)
    dyn = solve_dynamic(cost, sys, grid, tol=tol)
    us = np.tile(u_static, (grid.n_t, 1))
    g = grad_dynamic(cost, sys, grid, us)
    kappa = estimate_kappa(cost, sys, grid, method="lanczos", seed=seed) if with_kappa else math.nan
    return SweepEntry(
        float(T),
        grid.n_t,
        control_metric(dyn.control, u_static, grid),
        state_metric(dyn.state, prof, grid),
        norm_H(g, grid),
        operator_norm(sys, grid, seed=seed),
        norm_H(dyn.control - us, grid),
        kappa,
        dyn.objective,
        dyn.cg_iters,
    )


def sweep_and_fit(
    cost: QuadraticCost,
    sys: SystemSpec,
    horizons,
    n_x: int,
    cfl: float = 1.0,
    quad_rule: str = "rectangle",
    tol: float = DEFAULT_TOL,
    with_kappa: bool = True,
    workers: int | None = None,
    seed: int = 0,
) -> TurnpikeReport:
    """Solve static and dynamic problems over a list of horizons at a fixed spatial grid and CFL number."""
    Ts = [float(T) for T in horizons]
    if len(Ts) < 3:
        raise ValueError("need at least three horizons")
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("horizons must be strictly increasing")
    g0 = grid_for_cfl(sys, Ts[0], n_x, cfl, quad_rule)
    st = solve_static(cost, sys, g0)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(
            pool.map(
                lambda T: _sweep_one(cost, sys, T, n_x, cfl, quad_rule, tol, st.control, st.profile, with_kappa, seed),
                Ts,
            )
        )
    cm = [e.control_metric for e in entries]
    floor = 1e-14 * max(1.0, float(st.control @ st.control))
    slope, ok = fit_exponent(Ts, cm, floor)
    kappas = [e.kappa for e in entries if np.isfinite(e.kappa)]
    return TurnpikeReport(
        Ts,
        cm,
        [e.state_metric for e in entries],
        slope,
        ok,
        [e.grad_norm_at_static for e in entries],
        float(min(kappas)) if kappas else math.nan,
        [e.operator_norm for e in entries],
        [e.distance for e in entries],
        st.control,
        st.objective,
        entries,
    )


def write_report_csv(path, report: TurnpikeReport) -> None:
    exp = repr(report.fitted_exponent) if report.exponent_applicable else "not-applicable"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "control_metric", "state_metric", "grad_norm", "exponent"])
        for k, T in enumerate(report.horizons):
            w.writerow(
                [
                    repr(T),
                    repr(report.control_metric[k]),
                    repr(report.state_metric[k]),
                    repr(report.grad_norm_at_static[k]),
                    exp,
                ]
            )


class EnergyKind(str, Enum):
    E_A = "E_a"
    E_0 = "E_0"
    E_1 = "E_1"


@dataclass
class EnergySeries:
    kind: EnergyKind
    weight: ExpWeight
    t: np.ndarray
    values: np.ndarray
    fitted_rate: float


def _fit_rate(t: np.ndarray, v: np.ndarray) -> float:
    """Log-linear slope over the middle 60% of the segment where the energy is still resolvable."""
    if v.size < 2 or v.max() <= 0:
        return math.nan
    alive = np.nonzero(v > 1e-13 * v.max())[0]
    end = alive[-1] + 1
    lo, hi = int(0.2 * end), int(math.ceil(0.8 * end))
    if hi - lo < 2:
        return math.nan
    return float(np.polyfit(t[lo:hi], np.log(v[lo:hi]), 1)[0])


def lyapunov_energy(
    kind, weight: ExpWeight, trajectory, reference, grid: SpaceTimeGrid
) -> EnergySeries:
    """``0.5 int (r - ref)^T E(x) (r - ref) dx`` in time; ``E_a`` is additionally integrated over a sliding window."""
    kind = EnergyKind(kind)
    need = Regime.GROWTH if kind is EnergyKind.E_0 else Regime.DECAY
    if weight.regime is not need and not (weight.mu_plus == 0 and weight.mu_minus == 0):
        raise RegimeMismatch(f"{kind.value} needs a {need.value} weight")
    r = np.asarray(trajectory, dtype=float)
    if r.shape != (grid.n_t + 1, grid.n_x + 1, 2):
        raise ShapeMismatch(f"trajectory shape {r.shape} does not match the grid")
    ref = np.zeros((grid.n_x + 1, 2)) if reference is None else np.asarray(reference, dtype=float)
    if ref.shape != (grid.n_x + 1, 2):
        raise ShapeMismatch(f"reference shape {ref.shape} does not match the grid")
    e = weight.diag(grid.x)
    d = r - ref
    vals = 0.5 * (np.sum(e * d * d, axis=2) @ grid.space_weights())
    t = grid.t
    if kind is EnergyKind.E_A:
        k = max(1, int(round(min(1.0, grid.T) / grid.dt)))
        cum = cumulative_trapezoid(vals, t, initial=0.0)
        vals = cum[k:] - cum[:-k]
        t = t[: len(vals)]
    vals = np.maximum(vals, 0.0)
    return EnergySeries(kind, weight, t, vals, _fit_rate(t, vals))


@dataclass(frozen=True)
class DecayVerdict:
    applicable: bool
    passed: bool
    worst_margin: float
    reason: str = ""


def decay_check(series: EnergySeries, certificate: Certificate, tol: float = 1e-3) -> DecayVerdict:
    """Pointwise check of ``E(t) <= E(t0) exp(nu (t - t0)) (1 + tol)`` for the certified rate ``nu``.

    For growth certificates (backward adjoint energies) the comparison runs
    from the final time backwards.
    """
    if not certificate.valid:
        return DecayVerdict(False, False, math.nan, "certificate not valid")
    if certificate.weight != series.weight:
        return DecayVerdict(False, False, math.nan, "weight mismatch")
    v, t = series.values, series.t
    if certificate.regime is Regime.GROWTH:
        v, t = v[::-1], t[-1] - t[::-1]
        rate = -certificate.bound
    else:
        t = t - t[0]
        rate = certificate.bound
    if v[0] <= 0:
        ok = bool(np.all(v <= 0))
        return DecayVerdict(True, ok, 0.0 if ok else math.inf)
    with np.errstate(divide="ignore"):
        margin = np.log(v) - math.log(v[0]) - rate * t
    worst = float(np.max(margin))
    return DecayVerdict(True, worst <= math.log1p(tol), math.expm1(worst))
