"""Compiled per-trajectory half-return: DOP853 steps, projection, crossing.

Mirrors the vectorised path in flow.py/section.py operation for operation,
so results agree with it to rounding and stay exactly odd under
(q, v) -> (-q, -v).  No fastmath: reassociation would break that symmetry.
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

A = np.ascontiguousarray(_dop.A[:12, :12], dtype=float)
B = np.ascontiguousarray(_dop.B, dtype=float)


@numba.njit(cache=True)
def _rhs(y, D, table, out):
    x0, x1, x2 = y[0], y[1], y[2]
    v0, v1, v2 = y[3], y[4], y[5]
    d0, d1, d2 = D[0] * x0, D[1] * x1, D[2] * x2
    nn = d0 * d0 + d1 * d1 + d2 * d2
    mu = -(D[0] * v0 * v0 + D[1] * v1 * v1 + D[2] * v2 * v2) / nn
    out[0], out[1], out[2] = v0, v1, v2
    if table.shape[0] == 0:
        out[3] = mu * d0
        out[4] = mu * d1
        out[5] = mu * d2
        return
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    for t in range(table.shape[0]):
        e0, e1, e2, c = int(table[t, 0]), int(table[t, 1]), int(table[t, 2]), table[t, 3]
        p0, p1, p2 = x0 ** e0, x1 ** e1, x2 ** e2
        if e0:
            g0 += c * e0 * x0 ** (e0 - 1) * p1 * p2
        if e1:
            g1 += c * e1 * x1 ** (e1 - 1) * p0 * p2
        if e2:
            g2 += c * e2 * x2 ** (e2 - 1) * p0 * p1
    gdq = (g0 * d0 + g1 * d1 + g2 * d2) / nn
    guv = g0 * v0 + g1 * v1 + g2 * v2
    vv = v0 * v0 + v1 * v1 + v2 * v2
    out[3] = mu * d0 - 2 * guv * v0 + vv * (g0 - gdq * d0)
    out[4] = mu * d1 - 2 * guv * v1 + vv * (g1 - gdq * d1)
    out[5] = mu * d2 - 2 * guv * v2 + vv * (g2 - gdq * d2)


@numba.njit(cache=True)
def _project(y, D):
    for _ in range(3):
        g = D[0] * y[0] * y[0] + D[1] * y[1] * y[1] + D[2] * y[2] * y[2] - 1.0
        d0, d1, d2 = D[0] * y[0], D[1] * y[1], D[2] * y[2]
        f = g / (2 * (d0 * d0 + d1 * d1 + d2 * d2))
        y[0] -= f * d0
        y[1] -= f * d1
        y[2] -= f * d2
    d0, d1, d2 = D[0] * y[0], D[1] * y[1], D[2] * y[2]
    f = (d0 * y[3] + d1 * y[4] + d2 * y[5]) / (d0 * d0 + d1 * d1 + d2 * d2)
    y[3] -= f * d0
    y[4] -= f * d1
    y[5] -= f * d2


@numba.njit(cache=True)
def _step(y, h, D, table, K, tmp, out):
    for i in range(12):
        for m in range(6):
            acc = 0.0
            for j in range(i):
                if A[i, j] != 0.0:
                    acc = acc + A[i, j] * K[j, m]
            tmp[m] = y[m] + h * acc
        _rhs(tmp, D, table, K[i])
    for m in range(6):
        acc = 0.0
        for i in range(12):
            if B[i] != 0.0:
                acc = acc + B[i] * K[i, m]
        out[m] = y[m] + h * acc
    _project(out, D)


@numba.njit(cache=True)
def half_return_batch(Y0, D, table, h, t_max, crossing_tol, crossing_iters):
    """Flow each row until q3 changes sign against its initial direction.

    Returns (end states, flight times, status) with status 1 for rows that
    did not return within t_max.
    """
    n = Y0.shape[0]
    out = np.empty_like(Y0)
    tau = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    K = np.empty((12, 6))
    tmp = np.empty(6)
    y = np.empty(6)
    yn = np.empty(6)
    yc = np.empty(6)
    for r in range(n):
        for m in range(6):
            y[m] = Y0[r, m]
        sigma = 1.0 if y[5] > 0 else -1.0
        t = 0.0
        while True:
            _step(y, h, D, table, K, tmp, yn)
            if sigma * yn[2] <= 0:
                break
            for m in range(6):
                y[m] = yn[m]
            t += h
            if t > t_max:
                status[r] = 1
                break
        if status[r]:
            for m in range(6):
                out[r, m] = y[m]
            tau[r] = t
            continue
        # Illinois regula falsi on the partial step
        a = 0.0
        b = h
        fa = y[2]
        fb = yn[2]
        tol = crossing_tol * max(abs(fa), abs(fb))
        for _ in range(crossing_iters):
            if abs(fb) <= tol:
                break
            denom = fb - fa
            c = b - fb * (b - a) / denom if denom != 0 else b
            lo, hi = min(a, b), max(a, b)
            c = min(max(c, lo), hi)
            _step(y, c, D, table, K, tmp, yc)
            fc = yc[2]
            if fc * fb < 0:
                a = b
                fa = fb
            else:
                fa = 0.5 * fa
            b = c
            fb = fc
        _step(y, b, D, table, K, tmp, yc)
        for m in range(6):
            out[r, m] = yc[m]
        tau[r] = t + b
    return out, tau, status
