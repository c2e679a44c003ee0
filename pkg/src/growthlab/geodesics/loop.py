"""The shortest non-contractible loop on the projective plane.

Loops on the sphere with gamma(t + 1/2) = -gamma(t) descend to
non-contractible loops on RP^2.  Such a loop is stored through its first half
(M points); the second half is the negated copy.  Points live in R^3 and are
projected radially onto the ellipsoid, so the discrete energy is an
unconstrained function minimised with L-BFGS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .metric import EllipsoidMetric

PLANES = ((0, 1), (0, 2), (1, 2))  # (a,b), (a,c), (b,c) principal ellipses


class LoopConvergenceError(RuntimeError):
    def __init__(self, message, best_residual):
        super().__init__(message)
        self.best_residual = best_residual


def _radial(metric, x):
    r = np.sqrt(np.sum(metric.D * x * x, axis=-1))
    return x / r[..., None], r


def _full_loop(half):
    return np.concatenate([half, -half], axis=0)


def discrete_length(metric: EllipsoidMetric, pts) -> float:
    """Metric length of a closed polygon (conformal weight at chord midpoints)."""
    nxt = np.roll(pts, -1, axis=0)
    w = metric.speed_factor(0.5 * (pts + nxt))
    return float(np.sum(w * np.linalg.norm(nxt - pts, axis=-1)))


def _energy_and_grad(metric: EllipsoidMetric, flat, M):
    """Discrete energy N * sum w^2 |chord|^2 of the full loop and its gradient
    in the free coordinates.  Energy minimisers are evenly spaced, so chords
    cannot bunch up and cut corners the way a bare length minimiser would."""
    x = flat.reshape(M, 3)
    q, r = _radial(metric, x)
    pts = _full_loop(q)
    N = len(pts)
    nxt = np.roll(pts, -1, axis=0)
    d = nxt - pts
    mid = 0.5 * (pts + nxt)
    w2 = metric.speed_factor(mid) ** 2
    sq = np.sum(d * d, axis=-1)
    E = float(N * np.sum(w2 * sq))
    g = np.zeros_like(pts)
    g -= 2 * (w2[:, None] * d)
    g += np.roll(2 * w2[:, None] * d, 1, axis=0)
    if metric.conformal:
        # d(w^2)/d mid = 2 w^2 grad u, and mid depends on both ends with weight 1/2
        gw = (w2 * sq)[:, None] * metric.conformal.grad(mid)
        g += gw + np.roll(gw, 1, axis=0)
    g *= N
    gq = g[:M] - g[M:]
    Dx = metric.D * x
    gx = (gq - (np.sum(gq * x, axis=-1) / r ** 2)[:, None] * Dx) / r[:, None]
    return E, gx.ravel()


def geodesic_defect(metric: EllipsoidMetric, pts) -> float:
    """Discrete geodesic curvature: the length gradient along the in-surface
    normal of the curve, per unit spacing (sliding along the curve is free)."""
    M = len(pts) // 2
    _, g = _energy_and_grad(metric, pts[:M].ravel(), M)
    g = g.reshape(M, 3)
    n = metric.normal(pts[:M])
    t = np.roll(pts, -1, axis=0)[:M] - np.roll(pts, 1, axis=0)[:M]
    b = np.cross(n, t)
    b /= np.linalg.norm(b, axis=-1, keepdims=True)
    spacing = np.mean(np.linalg.norm(np.diff(pts, axis=0), axis=-1))
    # the energy gradient at a vertex scales like 2 N |chord|^2 * curvature
    scale = 2 * len(pts) * spacing ** 2
    return float(np.max(np.abs(np.sum(g * b, axis=-1))) / scale)


def self_intersections(pts, tol: float = 1e-9) -> int:
    """Count vertex pairs (non-adjacent) closer than tol, a discrete simplicity test."""
    n = len(pts)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, n - gap)
    return int(np.sum((d < tol) & (gap > 1)) // 2)


def principal_ellipse(metric: EllipsoidMetric, plane, n: int):
    i, j = plane
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = np.zeros((n, 3))
    pts[:, i] = metric.semi_axes[i] * np.cos(t)
    pts[:, j] = metric.semi_axes[j] * np.sin(t)
    return pts


def ellipse_perimeter(metric: EllipsoidMetric, plane=(0, 1)) -> float:
    """Metric length of a principal ellipse by adaptive quadrature."""
    i, j = plane
    ax = metric.semi_axes

    def speed(t):
        q = np.zeros(3)
        q[i], q[j] = ax[i] * np.cos(t), ax[j] * np.sin(t)
        return float(metric.speed_factor(q)) * np.hypot(ax[i] * np.sin(t), ax[j] * np.cos(t))
    val, _ = integrate.quad(speed, 0, 2 * np.pi, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


@dataclass
class LoopResult:
    plane: tuple
    length: float            # quadrature length of the principal ellipse
    discrete_length: float   # length of the minimising polygon
    residual: float
    points: np.ndarray
    candidates: list

    @property
    def delta(self) -> float:
        return self.length


def shortest_noncontractible(metric: EllipsoidMetric, loop_resolution: int = 256, tol: float = 1e-6,
                             perturbation: float = 1e-3, seed: int = 0, maxiter: int = 5000) -> LoopResult:
    """Minimise the length of antipodally equivariant loops from the three
    principal ellipses (slightly perturbed so descent is not stuck at a saddle).

    The winner is matched to the principal ellipse it converged to; ties go to
    the first initialisation, in the order (a,b), (a,c), (b,c).
    """
    if loop_resolution % 2:
        raise ValueError("loop_resolution must be even")
    M = loop_resolution // 2
    rng = np.random.default_rng(seed)
    candidates = []
    for plane in PLANES:
        start = principal_ellipse(metric, plane, loop_resolution)[:M]
        # an odd-in-t wiggle out of the plane keeps the loop equivariant
        k = np.arange(M)
        off = [c for c in range(3) if c not in plane][0]
        start[:, off] += perturbation * np.sin(2 * np.pi * k / loop_resolution) * rng.uniform(0.5, 1.5)
        res = optimize.minimize(lambda f: _energy_and_grad(metric, f, M), start.ravel(), jac=True,
                                method="L-BFGS-B", options={"maxiter": maxiter, "gtol": 1e-10, "ftol": 1e-16})
        q, _ = _radial(metric, res.x.reshape(M, 3))
        pts = _full_loop(q)
        candidates.append((discrete_length(metric, pts), plane, pts))
    best_len = min(c[0] for c in candidates)
    winner = next(c for c in candidates if c[0] <= best_len * (1 + 1e-9))
    L, _, pts = winner
    residual = geodesic_defect(metric, pts)
    # the first principal ellipse as short as the minimiser (ties on the round
    # sphere, where every great circle is a minimiser, go to the (a,b) plane)
    plane = None
    rel = 4.0 * (np.pi / loop_resolution) ** 2
    for pl in PLANES:
        if abs(ellipse_perimeter(metric, pl) - L) <= rel * L:
            plane = pl
            break
    if residual > tol or plane is None:
        raise LoopConvergenceError(f"loop shortening did not converge to a principal ellipse "
                                   f"(residual {residual:.3g})", residual)
    return LoopResult(plane, ellipse_perimeter(metric, plane), L, residual, pts,
                      [(c[0], c[1]) for c in candidates])
