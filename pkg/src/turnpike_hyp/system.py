"""Coefficients of the diagonal 2x2 hyperbolic system and its Lyapunov weight certificates.

The system is ``r_t + D(x) r_x = eta0 M(x) r`` on ``[0, L]`` with
``D = diag(d_plus, d_minus)``. A certificate checks, on a sample of ``x``,
that an exponential weight ``E(x) = diag(exp(-mu_plus x), exp(mu_minus x))``
makes the weighted energy decay (``mu > 0``) or grow (``mu < 0``).
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import (
    EmptyGrid,
    NonSPD,
    OutOfDomain,
    PositivityViolation,
    RegimeMismatch,
    SignViolation,
)

Field = Callable[[np.ndarray], np.ndarray]

DEFAULT_SAMPLES = 1024


def _scalar_field(value) -> Field:
    if callable(value):
        def f(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(np.asarray(value(x), dtype=float), x.shape).copy()
        return f
    value = float(value)
    return lambda x: np.full(np.shape(x), value)


def _matrix_field(value) -> Field:
    if value is None:
        value = np.zeros((2, 2))
    if callable(value):
        def f(x):
            x = np.asarray(x, dtype=float)
            out = np.asarray(value(x), dtype=float)
            return np.broadcast_to(out, x.shape + (2, 2)).copy()
        return f
    mat = np.asarray(value, dtype=float).reshape(2, 2)
    return lambda x: np.broadcast_to(mat, np.shape(x) + (2, 2)).copy()


def _fd_derivative(f: Field, L: float) -> Field:
    h = L / 1e4

    def df(x):
        x = np.asarray(x, dtype=float)
        lo = np.maximum(x - h, 0.0)
        hi = np.minimum(x + h, L)
        return (f(hi) - f(lo)) / (hi - lo)

    return df


@dataclass(frozen=True)
class SystemSpec:
    """Validated coefficients of ``r_t + D r_x = eta0 M r``.

    All coefficient attributes are vectorized callables of ``x``; ``M``
    returns arrays of shape ``x.shape + (2, 2)``.
    """

    L: float
    eta0: float
    d_plus: Field
    d_minus: Field
    d_plus_prime: Field
    d_minus_prime: Field
    M: Field
    constant: bool = False
    diagonal_M: bool = False

    def nodes(self, n: int) -> np.ndarray:
        return np.linspace(0.0, self.L, n)

    def speeds(self, x) -> tuple[np.ndarray, np.ndarray]:
        return self.d_plus(x), self.d_minus(x)

    def max_speed(self, n_samples: int = DEFAULT_SAMPLES) -> float:
        x = self.nodes(n_samples)
        return float(max(np.max(self.d_plus(x)), np.max(-self.d_minus(x))))

    def min_speed(self, n_samples: int = DEFAULT_SAMPLES) -> float:
        x = self.nodes(n_samples)
        return float(min(np.min(self.d_plus(x)), np.min(-self.d_minus(x))))


def build_system(
    L,
    eta0,
    d_plus,
    d_minus,
    M=None,
    d_plus_prime=None,
    d_minus_prime=None,
    n_samples: int = DEFAULT_SAMPLES,
) -> SystemSpec:
    """Build and validate a :class:`SystemSpec`.

    Coefficients may be scalars (constant), callables of ``x``, or for ``M`` a
    2x2 array. Missing speed derivatives fall back to central differences
    with step ``L / 1e4`` (one-sided at the ends).
    """
    L = float(L)
    eta0 = float(eta0)
    if not L > 0:
        raise PositivityViolation(f"L must be positive, got {L}")
    if eta0 > 0:
        raise PositivityViolation(f"eta0 must be <= 0, got {eta0}")

    constant = not any(callable(v) for v in (d_plus, d_minus, M))
    diagonal = False
    if M is None:
        diagonal = True
    elif not callable(M):
        m = np.asarray(M, dtype=float).reshape(2, 2)
        diagonal = m[0, 1] == 0 and m[1, 0] == 0

    dp = _scalar_field(d_plus)
    dm = _scalar_field(d_minus)
    Mf = _matrix_field(M)
    if d_plus_prime is None:
        dpp = (lambda x: np.zeros(np.shape(x))) if not callable(d_plus) else _fd_derivative(dp, L)
    else:
        dpp = _scalar_field(d_plus_prime)
    if d_minus_prime is None:
        dmp = (lambda x: np.zeros(np.shape(x))) if not callable(d_minus) else _fd_derivative(dm, L)
    else:
        dmp = _scalar_field(d_minus_prime)

    x = np.linspace(0.0, L, n_samples)
    bad_plus = dp(x) <= 0
    bad_minus = dm(x) >= 0
    if bad_plus.any():
        raise SignViolation(f"d_plus <= 0 at x = {x[bad_plus][0]:.6g}")
    if bad_minus.any():
        raise SignViolation(f"d_minus >= 0 at x = {x[bad_minus][0]:.6g}")
    if not np.all(np.isfinite(Mf(x))):
        raise SignViolation("M has non-finite entries")

    return SystemSpec(L, eta0, dp, dm, dpp, dmp, Mf, constant=constant, diagonal_M=diagonal)


def read_coefficient_table(path) -> dict[str, np.ndarray]:
    """Read a CSV with columns ``x,d_plus,d_minus,m11,m12,m21,m22``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = ("x", "d_plus", "d_minus", "m11", "m12", "m21", "m22")
    missing = [c for c in cols if rows and c not in rows[0]]
    if not rows or missing:
        raise ValueError(f"coefficient table {path} lacks columns {missing or list(cols)}")
    return {c: np.array([float(r[c]) for r in rows]) for c in cols}


def system_from_table(table: dict[str, np.ndarray], eta0: float, L: float | None = None, **kw) -> SystemSpec:
    """Piecewise-linear interpolation of a sampled coefficient table."""
    xs = np.asarray(table["x"], dtype=float)
    if L is None:
        L = float(xs[-1])

    def interp(col):
        vals = np.asarray(table[col], dtype=float)
        return lambda x: np.interp(x, xs, vals)

    entries = [interp(c) for c in ("m11", "m12", "m21", "m22")]

    def M(x):
        x = np.asarray(x, dtype=float)
        return np.stack([e(x) for e in entries], axis=-1).reshape(x.shape + (2, 2))

    return build_system(L, eta0, interp("d_plus"), interp("d_minus"), M, **kw)


class Regime(str, Enum):
    DECAY = "decay"
    GROWTH = "growth"


@dataclass(frozen=True)
class ExpWeight:
    mu_plus: float
    mu_minus: float

    @property
    def regime(self) -> Regime | None:
        if self.mu_plus > 0 and self.mu_minus > 0:
            return Regime.DECAY
        if self.mu_plus < 0 and self.mu_minus < 0:
            return Regime.GROWTH
        return None

    def diag(self, x) -> np.ndarray:
        """Diagonal of E(x), shape ``x.shape + (2,)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.exp(-self.mu_plus * x), np.exp(self.mu_minus * x)], axis=-1)

    def diag_prime(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack(
            [-self.mu_plus * np.exp(-self.mu_plus * x), self.mu_minus * np.exp(self.mu_minus * x)],
            axis=-1,
        )


def eval_E(weight: ExpWeight, x: float, L: float | None = None) -> np.ndarray:
    if x < 0 or (L is not None and x > L):
        raise OutOfDomain(f"x = {x} outside [0, {L}]")
    return np.diag(weight.diag(x))


def gen_eig_pair_2x2(S, E) -> tuple[float, float]:
    """Extreme values of ``v^T S v`` on ``{v^T E v = 1}``, i.e. the roots of ``det(S - lam E)``.

    ``S`` symmetric 2x2, ``E`` diagonal with positive entries.
    """
    S = np.asarray(S, dtype=float).reshape(2, 2)
    E = np.asarray(E, dtype=float).reshape(2, 2)
    lo, hi = _gen_eig_diag(S, np.diagonal(E))
    return float(lo), float(hi)


def _gen_eig_diag(S: np.ndarray, e: np.ndarray):
    # batched over leading axes; e holds the diagonal of E
    if np.any(e <= 0):
        raise NonSPD("weight matrix must have positive diagonal")
    # symmetric congruence E^{-1/2} S E^{-1/2}
    s = 0.5 * (S + np.swapaxes(S, -1, -2))
    a = s[..., 0, 0] / e[..., 0]
    c = s[..., 1, 1] / e[..., 1]
    b = s[..., 0, 1] / np.sqrt(e[..., 0] * e[..., 1])
    mid = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return mid - rad, mid + rad


@dataclass(frozen=True)
class Certificate:
    weight: ExpWeight
    regime: Regime
    bound: float
    argmax_x: float
    valid: bool
    samples: int
    profile: np.ndarray = field(repr=False, compare=False, default=None)


def _coupling(sys: SystemSpec, e: np.ndarray, x: np.ndarray) -> np.ndarray:
    M = sys.M(x)
    EM = e[..., :, None] * M
    return EM + np.swapaxes(EM, -1, -2)


def _diag_matrix(d: np.ndarray) -> np.ndarray:
    out = np.zeros(d.shape[:-1] + (2, 2))
    out[..., 0, 0] = d[..., 0]
    out[..., 1, 1] = d[..., 1]
    return out


def certify_decay(sys: SystemSpec, weight: ExpWeight, n_samples: int = DEFAULT_SAMPLES) -> Certificate:
    """Largest generalized eigenvalue of ``(ED)' - |eta0|(EM + M^T E)`` w.r.t. ``E``.

    Valid (a decay certificate ``nu_a``) when the maximum over ``x`` is negative.
    """
    if weight.mu_plus < 0 or weight.mu_minus < 0:
        raise RegimeMismatch("decay certificate needs mu_plus > 0 and mu_minus > 0")
    x = sys.nodes(n_samples)
    e, ep = weight.diag(x), weight.diag_prime(x)
    d = np.stack(sys.speeds(x), axis=-1)
    dprime = np.stack([sys.d_plus_prime(x), sys.d_minus_prime(x)], axis=-1)
    S = _diag_matrix(ep * d + e * dprime) - abs(sys.eta0) * _coupling(sys, e, x)
    _, hi = _gen_eig_diag(S, e)
    k = int(np.argmax(hi))
    bound = float(hi[k])
    valid = bound < 0 and weight.regime is Regime.DECAY
    return Certificate(weight, Regime.DECAY, bound, float(x[k]), valid, n_samples, hi)


def certify_growth(sys: SystemSpec, weight: ExpWeight, n_samples: int = DEFAULT_SAMPLES) -> Certificate:
    """Smallest generalized eigenvalue of ``E'D - ED' + |eta0|(EM + M^T E)``; valid when positive."""
    if weight.mu_plus > 0 or weight.mu_minus > 0:
        raise RegimeMismatch("growth certificate needs mu_plus < 0 and mu_minus < 0")
    x = sys.nodes(n_samples)
    e, ep = weight.diag(x), weight.diag_prime(x)
    d = np.stack(sys.speeds(x), axis=-1)
    dprime = np.stack([sys.d_plus_prime(x), sys.d_minus_prime(x)], axis=-1)
    S = _diag_matrix(ep * d - e * dprime) + abs(sys.eta0) * _coupling(sys, e, x)
    lo, _ = _gen_eig_diag(S, e)
    k = int(np.argmin(lo))
    bound = float(lo[k])
    valid = bound > 0 and weight.regime is Regime.GROWTH
    return Certificate(weight, Regime.GROWTH, bound, float(x[k]), valid, n_samples, lo)


def search_weight(sys: SystemSpec, regime, mu_grid, n_samples: int = DEFAULT_SAMPLES) -> Certificate:
    """Grid search over ``(mu_plus, mu_minus)`` pairs drawn from ``mu_grid``.

    Returns the strictest certificate; if none is valid, the least violating
    one (still with ``valid=False``).
    """
    regime = Regime(regime)
    mus = [float(m) for m in mu_grid]
    if not mus:
        raise EmptyGrid("mu_grid is empty")
    sign = 1.0 if regime is Regime.DECAY else -1.0
    if any(sign * m <= 0 for m in mus):
        raise RegimeMismatch(f"mu_grid signs inconsistent with {regime.value} regime")
    certify = certify_decay if regime is Regime.DECAY else certify_growth
    best = None
    for mp, mm in itertools.product(mus, mus):
        cert = certify(sys, ExpWeight(mp, mm), n_samples)
        if best is None or sign * cert.bound < sign * best.bound:
            best = cert
    return best
