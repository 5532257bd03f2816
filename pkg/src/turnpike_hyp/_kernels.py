"""Compiled time-marching loops for the upwind scheme.

Conventions shared by all kernels (``nx`` intervals, ``nt`` steps):

* ``cp[i] = d_plus(x_i) dt/dx`` (>0), ``cm[i] = d_minus(x_i) dt/dx`` (<0)
* ``S[i] = dt * eta0 * M(x_i)``; transport is explicit, the source is taken
  at the new time level, so each node solves ``(I - S[i]) r_new = r_transported``
  (``P[i]`` holds the inverse)
* control ``u[n]`` is written into the boundary node at ``t_{n+1}``; trace
  ``y[n] = (r_plus(t_{n+1}, L), r_minus(t_{n+1}, 0))``.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def source_inverse(S):
    """``(I - S[i])^{-1}`` per node."""
    n = S.shape[0]
    P = np.empty_like(S)
    for i in range(n):
        a = 1.0 - S[i, 0, 0]
        b = -S[i, 0, 1]
        c = -S[i, 1, 0]
        d = 1.0 - S[i, 1, 1]
        det = a * d - b * c
        P[i, 0, 0] = d / det
        P[i, 0, 1] = -b / det
        P[i, 1, 0] = -c / det
        P[i, 1, 1] = a / det
    return P


@njit(cache=True, nogil=True)
def _step(p, m, cp, cm, S, P, up, um, newp, newm):
    nx = p.shape[0] - 1
    for i in range(1, nx):
        tp = p[i] - cp[i] * (p[i] - p[i - 1])
        tm = m[i] - cm[i] * (m[i + 1] - m[i])
        newp[i] = P[i, 0, 0] * tp + P[i, 0, 1] * tm
        newm[i] = P[i, 1, 0] * tp + P[i, 1, 1] * tm
    newp[0] = up
    newm[0] = (m[0] - cm[0] * (m[1] - m[0]) + S[0, 1, 0] * up) / (1.0 - S[0, 1, 1])
    newm[nx] = um
    newp[nx] = (p[nx] - cp[nx] * (p[nx] - p[nx - 1]) + S[nx, 0, 1] * um) / (1.0 - S[nx, 0, 0])


@njit(cache=True, nogil=True)
def forward_sweep(cp, cm, S, P, u, h0, states):
    """March the scheme; fills ``states`` (nt+1, nx+1, 2) if it is non-empty. Returns traces."""
    nt = u.shape[0]
    nx = h0.shape[0] - 1
    keep = states.shape[0] > 0
    p = h0[:, 0].copy()
    m = h0[:, 1].copy()
    newp = np.empty_like(p)
    newm = np.empty_like(m)
    y = np.empty((nt, 2))
    if keep:
        states[0, :, 0] = p
        states[0, :, 1] = m
    for n in range(nt):
        _step(p, m, cp, cm, S, P, u[n, 0], u[n, 1], newp, newm)
        p, newp = newp, p
        m, newm = newm, m
        y[n, 0] = p[nx]
        y[n, 1] = m[0]
        if keep:
            states[n + 1, :, 0] = p
            states[n + 1, :, 1] = m
    return y


@njit(cache=True, nogil=True)
def transpose_sweep(cp, cm, S, P, z, w):
    """Exact transpose of ``forward_sweep`` (zero initial state) in the w-weighted inner product."""
    nt = z.shape[0]
    nx = cp.shape[0] - 1
    ap = np.zeros(nx + 1)
    am = np.zeros(nx + 1)
    tp = np.empty(nx + 1)
    tm = np.empty(nx + 1)
    g = np.empty((nt, 2))
    for n in range(nt - 1, -1, -1):
        ap[nx] += w[n] * z[n, 0]
        am[0] += w[n] * z[n, 1]
        # node-local source solves, transposed
        for i in range(1, nx):
            tp[i] = P[i, 0, 0] * ap[i] + P[i, 1, 0] * am[i]
            tm[i] = P[i, 0, 1] * ap[i] + P[i, 1, 1] * am[i]
        beta0 = am[0] / (1.0 - S[0, 1, 1])
        betaL = ap[nx] / (1.0 - S[nx, 0, 0])
        tp[0] = 0.0
        tm[0] = beta0
        tp[nx] = betaL
        tm[nx] = 0.0
        g[n, 0] = (ap[0] + S[0, 1, 0] * beta0) / w[n]
        g[n, 1] = (am[nx] + S[nx, 0, 1] * betaL) / w[n]
        # transport, transposed
        for j in range(nx + 1):
            ap[j] = 0.0
            am[j] = 0.0
        for i in range(1, nx + 1):
            ap[i] += (1.0 - cp[i]) * tp[i]
            ap[i - 1] += cp[i] * tp[i]
        for i in range(0, nx):
            am[i] += (1.0 + cm[i]) * tm[i]
            am[i + 1] += -cm[i] * tm[i]
    return g


@njit(cache=True, nogil=True)
def backward_adjoint_sweep(cp, cm, Sa, Pa, zb, states):
    """Time-reversed upwind scheme for the continuous adjoint system.

    ``Sa[i] = dt (eta0 M(x_i)^T + D'(x_i))`` enters at the new (earlier) time
    level, ``Pa = (I - Sa)^{-1}``. ``zb[n]`` holds the already scaled
    boundary values (z_plus at x=L, z_minus at x=0) imposed at ``t_{n+1}``.
    ``states`` (nt+1, nx+1, 2) receives the solution.
    """
    nt = zb.shape[0]
    nx = cp.shape[0] - 1
    p = np.zeros(nx + 1)
    m = np.zeros(nx + 1)
    newp = np.empty(nx + 1)
    newm = np.empty(nx + 1)
    p[nx] = zb[nt - 1, 0]
    m[0] = zb[nt - 1, 1]
    states[nt, :, 0] = p
    states[nt, :, 1] = m
    for k in range(nt - 1, -1, -1):
        kb = k - 1 if k >= 1 else 0
        for i in range(1, nx):
            tp = p[i] + cp[i] * (p[i + 1] - p[i])
            tm = m[i] + cm[i] * (m[i] - m[i - 1])
            newp[i] = Pa[i, 0, 0] * tp + Pa[i, 0, 1] * tm
            newm[i] = Pa[i, 1, 0] * tp + Pa[i, 1, 1] * tm
        newp[nx] = zb[kb, 0]
        newm[0] = zb[kb, 1]
        newp[0] = (p[0] + cp[0] * (p[1] - p[0]) + Sa[0, 0, 1] * newm[0]) / (1.0 - Sa[0, 0, 0])
        newm[nx] = (m[nx] + cm[nx] * (m[nx] - m[nx - 1]) + Sa[nx, 1, 0] * newp[nx]) / (1.0 - Sa[nx, 1, 1])
        p, newp = newp, p
        m, newm = newm, m
        states[k, :, 0] = p
        states[k, :, 1] = m
