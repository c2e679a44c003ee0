"""Ellipsoids with an optional antipodally symmetric conformal factor.

The surface is G(q) = q1^2/a^2 + q2^2/b^2 + q3^2/c^2 - 1 = 0 in R^3 with the
metric e^{2u} times the induced Euclidean one.  ``u`` is a polynomial in the
squares of the coordinates, so it is even in every coordinate: q -> -q is an
isometry and the coordinate planes cut out closed geodesics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np


@dataclass(frozen=True)
class EvenPolynomial:
    """u(q) = sum coef * q1^(2i) q2^(2j) q3^(2k) over terms (i, j, k, coef)."""

    terms: tuple = ()

    def __post_init__(self):
        clean = []
        for t in self.terms:
            i, j, k, c = t
            if min(i, j, k) < 0 or int(i) != i or int(j) != j or int(k) != k:
                raise ValueError(f"exponents must be non-negative integers, got {t}")
            clean.append((int(i), int(j), int(k), float(c)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def parse(cls, text: str) -> "EvenPolynomial":
        """Rows of ``i j k coef``; blank lines and ``#`` comments are ignored."""
        terms = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"conformal row needs 'i j k coef', got {line!r}")
            terms.append((int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
        return cls(tuple(terms))

    def __bool__(self):
        return any(c != 0 for *_, c in self.terms)

    @staticmethod
    def _pow(x, n):
        return x ** n if n else np.ones_like(x)

    def value(self, q):
        q = np.asarray(q, float)
        out = np.zeros(q.shape[:-1])
        for i, j, k, c in self.terms:
            out = out + c * self._pow(q[..., 0], 2 * i) * self._pow(q[..., 1], 2 * j) * self._pow(q[..., 2], 2 * k)
        return out

    def grad(self, q):
        q = np.asarray(q, float)
        g = np.zeros_like(q)
        for i, j, k, c in self.terms:
            e = (2 * i, 2 * j, 2 * k)
            for d in range(3):
                if e[d] == 0:
                    continue
                term = c * e[d] * self._pow(q[..., d], e[d] - 1)
                for o in range(3):
                    if o != d:
                        term = term * self._pow(q[..., o], e[o])
                g[..., d] += term
        return g

    def hessian(self, q):
        q = np.asarray(q, float)
        H = np.zeros(q.shape + (3,))
        for i, j, k, c in self.terms:
            e = (2 * i, 2 * j, 2 * k)
            for d1 in range(3):
                for d2 in range(3):
                    ee = list(e)
                    coef = c
                    for d in (d1, d2):
                        if ee[d] == 0:
                            coef = 0.0
                            break
                        coef = coef * ee[d]
                        ee[d] -= 1
                    if coef == 0.0:
                        continue
                    H[..., d1, d2] += coef * self._pow(q[..., 0], ee[0]) * self._pow(q[..., 1], ee[1]) \
                        * self._pow(q[..., 2], ee[2])
        return H

    def table(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, 4))
        return np.array([[2 * i, 2 * j, 2 * k, c] for i, j, k, c in self.terms], float)

    def to_text(self) -> str:
        return "".join(f"{i} {j} {k} {c!r}\n" for i, j, k, c in self.terms)


@numba.njit(cache=True)
def _acceleration_kernel(q, v, D, table):
    n = q.shape[0]
    out = np.empty_like(q)
    gu = np.empty(3)
    for r in range(n):
        x0, x1, x2 = q[r, 0], q[r, 1], q[r, 2]
        v0, v1, v2 = v[r, 0], v[r, 1], v[r, 2]
        d0, d1, d2 = D[0] * x0, D[1] * x1, D[2] * x2
        nn = d0 * d0 + d1 * d1 + d2 * d2
        mu = -(D[0] * v0 * v0 + D[1] * v1 * v1 + D[2] * v2 * v2) / nn
        gu[:] = 0.0
        for t in range(table.shape[0]):
            e0, e1, e2, c = int(table[t, 0]), int(table[t, 1]), int(table[t, 2]), table[t, 3]
            p0, p1, p2 = x0 ** e0, x1 ** e1, x2 ** e2
            if e0:
                gu[0] += c * e0 * x0 ** (e0 - 1) * p1 * p2
            if e1:
                gu[1] += c * e1 * x1 ** (e1 - 1) * p0 * p2
            if e2:
                gu[2] += c * e2 * x2 ** (e2 - 1) * p0 * p1
        gdq = (gu[0] * d0 + gu[1] * d1 + gu[2] * d2) / nn
        guv = gu[0] * v0 + gu[1] * v1 + gu[2] * v2
        vv = v0 * v0 + v1 * v1 + v2 * v2
        out[r, 0] = mu * d0 - 2 * guv * v0 + vv * (gu[0] - gdq * d0)
        out[r, 1] = mu * d1 - 2 * guv * v1 + vv * (gu[1] - gdq * d1)
        out[r, 2] = mu * d2 - 2 * guv * v2 + vv * (gu[2] - gdq * d2)
    return out


@dataclass(frozen=True)
class EllipsoidMetric:
    semi_axes: tuple
    conformal: EvenPolynomial = field(default_factory=EvenPolynomial)

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semi_axes)
        if len(axes) != 3 or min(axes) <= 0:
            raise ValueError(f"need three positive semi-axes, got {self.semi_axes}")
        if not axes[0] <= axes[1] <= axes[2]:
            raise ValueError(f"semi-axes must be ordered a <= b <= c, got {axes}")
        object.__setattr__(self, "semi_axes", axes)

    @property
    def D(self) -> np.ndarray:
        return 1.0 / np.asarray(self.semi_axes) ** 2

    @property
    def conformally_flat(self) -> bool:
        return not self.conformal

    def constraint(self, q):
        return np.sum(self.D * np.asarray(q) ** 2, axis=-1) - 1.0

    def normal(self, q):
        n = self.D * np.asarray(q)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def u(self, q):
        return self.conformal.value(q) if self.conformal else np.zeros(np.shape(q)[:-1])

    def speed_factor(self, q):
        """e^{u}: metric length of a Euclidean unit tangent vector."""
        return np.exp(self.u(q))

    def energy(self, q, v):
        return 0.5 * np.exp(2 * self.u(q)) * np.sum(np.asarray(v) ** 2, axis=-1)

    def acceleration(self, q, v):
        """q'' for the geodesic equation of e^{2u} g constrained to G = 0."""
        if self.conformal and np.ndim(q) == 2 and len(q) >= 8:
            return _acceleration_kernel(np.ascontiguousarray(q, dtype=float), np.ascontiguousarray(v, dtype=float),
                                        self.D, self.conformal.table())
        return self._acceleration(q, v)

    def _acceleration(self, q, v):
        D = self.D
        Dq = D * q
        nn = np.sum(Dq * Dq, axis=-1)
        mu = -np.sum(D * v * v, axis=-1) / nn
        acc = mu[..., None] * Dq
        if self.conformal:
            gu = self.conformal.grad(q)
            vv = np.sum(v * v, axis=-1)
            gt = gu - (np.sum(gu * Dq, axis=-1) / nn)[..., None] * Dq
            acc = acc - 2 * np.sum(gu * v, axis=-1)[..., None] * v + vv[..., None] * gt
        return acc

    def project(self, q, v, iterations: int = 3):
        """Pull q back onto G = 0 (Newton along the gradient) and make v tangent."""
        q = np.array(q, float, copy=True)
        D = self.D
        for _ in range(iterations):
            g = np.sum(D * q * q, axis=-1) - 1.0
            Dq = D * q
            q -= (g / (2 * np.sum(Dq * Dq, axis=-1)))[..., None] * Dq
        Dq = D * q
        v = v - (np.sum(Dq * v, axis=-1) / np.sum(Dq * Dq, axis=-1))[..., None] * Dq
        return q, v

    def gaussian_curvature_embedded(self, q):
        a, b, c = self.semi_axes
        q = np.asarray(q, float)
        s = q[..., 0] ** 2 / a ** 4 + q[..., 1] ** 2 / b ** 4 + q[..., 2] ** 2 / c ** 4
        return 1.0 / ((a * b * c) ** 2 * s ** 2)

    def laplacian_u(self, q):
        """Surface Laplacian of u: tr Hess - n^T Hess n - (div n) du/dn."""
        q = np.asarray(q, float)
        if not self.conformal:
            return np.zeros(q.shape[:-1])
        H = self.conformal.hessian(q)
        gu = self.conformal.grad(q)
        Dq = self.D * q
        r = np.linalg.norm(Dq, axis=-1)
        n = Dq / r[..., None]
        div_n = np.sum(self.D) / r - np.einsum("...i,...i->...", Dq, self.D * Dq) / r ** 3
        return (np.trace(H, axis1=-2, axis2=-1) - np.einsum("...i,...ij,...j->...", n, H, n)
                - div_n * np.sum(gu * n, axis=-1))

    def curvature(self, q):
        """Gaussian curvature of e^{2u} g: e^{-2u} (K - Laplacian u)."""
        return np.exp(-2 * self.u(q)) * (self.gaussian_curvature_embedded(q) - self.laplacian_u(q))

    def sample_points(self, n: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        g = rng.normal(size=(n, 3))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        q = g * np.asarray(self.semi_axes)
        return q

    def curvature_check(self, samples: int = 20_000, rng=None) -> float:
        """Minimum sampled curvature; raises if it is not positive."""
        kmin = float(np.min(self.curvature(self.sample_points(samples, rng))))
        if kmin <= 0:
            raise ValueError(f"curvature is not positive (sampled minimum {kmin})")
        return kmin

    def random_unit_states(self, n: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        q = self.sample_points(n, rng)
        v = rng.normal(size=(n, 3))
        q, v = self.project(q, v)
        v = v / (np.linalg.norm(v, axis=-1, keepdims=True) * self.speed_factor(q)[..., None])
        return q, v

    def describe(self) -> dict:
        return {"semi_axes": list(self.semi_axes), "conformal": [list(t) for t in self.conformal.terms]}
