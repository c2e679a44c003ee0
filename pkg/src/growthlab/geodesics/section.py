"""The Birkhoff annulus over the section curve, the half-return map and f.

The section curve is the principal ellipse in the (a, b)-plane,
sigma(s) = (a cos phi(s), b sin phi(s), 0), parameterised by metric arclength
s in [0, delta).  Along the plane q3 = 0 the in-surface normal of sigma is
e_z, so the chart reads

    (s, theta) -> (sigma(s), e^{-u} (cos theta T(s) + sin theta e_z)),

with theta in [0, pi] on the section Sigma (pointing to q3 > 0) and in
[-pi, 0] on its antipodal image h_*(Sigma).  The half-return map psi flows a
point of Sigma until q3 changes sign from + to -; then f = h_*^{-1} o psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from matplotlib.path import Path
from scipy import integrate, optimize

from ..annulus import LiftedAnnulusMap
from ..config import GeodesicParams
from ._kernels import half_return_batch
from .flow import dop853_step, make_rhs, project_state
from .loop import LoopResult, shortest_noncontractible
from .metric import EllipsoidMetric

E_Z = np.array([0.0, 0.0, 1.0])


class ChartDomainError(ValueError):
    pass


class HalfReturnError(RuntimeError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)


class ConjugatePointError(RuntimeError):
    pass


@dataclass(frozen=True)
class SectionPoint:
    s: float
    theta: float


class _Fourier:
    """Truncated real Fourier series of a smooth periodic function."""

    def __init__(self, samples, period, cutoff=1e-17):
        n = len(samples)
        c = np.fft.rfft(samples) / n
        self.period = period
        self.mean = c[0].real
        scale = max(abs(self.mean), np.max(np.abs(c)))
        keep = np.nonzero(np.abs(c[1:]) > cutoff * scale)[0]
        kmax = (keep.max() + 1) if len(keep) else 0
        if n % 2 == 0 and kmax >= n // 2:
            kmax = n // 2 - 1
        self.k = np.arange(1, kmax + 1)
        self.c = c[1:kmax + 1]

    def __call__(self, t):
        t = np.asarray(t, float)
        if not len(self.k):
            return np.full(t.shape, self.mean)
        z = np.exp(1j * np.multiply.outer(t, self.k) * (2 * np.pi / self.period))
        return self.mean + 2 * (z @ self.c).real

    def integral(self, t):
        """Antiderivative vanishing at 0."""
        t = np.asarray(t, float)
        out = self.mean * t
        if len(self.k):
            w = 2 * np.pi / self.period
            z = np.exp(1j * np.multiply.outer(t, self.k) * w) - 1.0
            out = out + 2 * (z @ (self.c / (1j * self.k * w))).real
        return out


class SectionCurve:
    """The (a, b)-plane ellipse with its metric arclength parameter."""

    def __init__(self, metric: EllipsoidMetric, modes: int = 1024):
        self.metric = metric
        self.a, self.b = metric.semi_axes[0], metric.semi_axes[1]
        phi = 2 * np.pi * np.arange(modes) / modes
        self._speed = _Fourier(self.speed(phi), 2 * np.pi, cutoff=1e-15)
        self.delta = 2 * np.pi * self._speed.mean
        self._modes = modes
        self._K = None

    def point_phi(self, phi):
        phi = np.asarray(phi, float)
        return np.stack([self.a * np.cos(phi), self.b * np.sin(phi), np.zeros_like(phi)], axis=-1)

    def speed(self, phi):
        """ds/dphi."""
        phi = np.asarray(phi, float)
        return self.metric.speed_factor(self.point_phi(phi)) * np.hypot(self.a * np.sin(phi), self.b * np.cos(phi))

    def s_of_phi(self, phi):
        return self._speed.integral(phi)

    def phi_of_s(self, s, iterations: int = 30):
        s = np.asarray(s, float)
        phi = s * (2 * np.pi / self.delta)
        for _ in range(iterations):
            step = (self.s_of_phi(phi) - s) / self._speed(phi)
            phi = phi - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return phi

    def point(self, s):
        return self.point_phi(self.phi_of_s(s))

    def unit_tangent(self, s=None, phi=None):
        """Euclidean unit tangent in the direction of increasing s."""
        if phi is None:
            phi = self.phi_of_s(s)
        t = np.stack([-self.a * np.sin(phi), self.b * np.cos(phi), np.zeros_like(phi)], axis=-1)
        return t / np.linalg.norm(t, axis=-1, keepdims=True)

    def curvature(self, s):
        return self.metric.curvature(self.point(s))

    def curvature_series(self) -> _Fourier:
        """Curvature along the curve as a Fourier series in s."""
        if self._K is None:
            s = self.delta * np.arange(self._modes) / self._modes
            self._K = _Fourier(self.curvature(s), self.delta, cutoff=1e-15)
        return self._K

    # chart ------------------------------------------------------------------
    def to_state(self, s, theta):
        s = np.asarray(s, float)
        theta = np.asarray(theta, float)
        phi = self.phi_of_s(np.mod(s, self.delta))
        q = self.point_phi(phi)
        T = self.unit_tangent(phi=phi)
        v = np.cos(theta)[..., None] * T + np.sin(theta)[..., None] * E_Z
        v = v / self.metric.speed_factor(q)[..., None]
        return q, v

    def from_state(self, q, v, tol: float = 1e-9):
        """(s, theta) of states based on the curve; theta in (-pi, pi]."""
        q = np.asarray(q, float)
        v = np.asarray(v, float)
        if np.max(np.abs(q[..., 2]), initial=0.0) > tol or np.max(np.abs(self.metric.constraint(q)), initial=0.0) > tol:
            raise ChartDomainError("state is not based on the section curve")
        phi = np.arctan2(q[..., 1] / self.b, q[..., 0] / self.a)
        s = np.mod(self.s_of_phi(phi), self.delta)
        T = self.unit_tangent(phi=phi)
        theta = np.arctan2(v[..., 2], np.sum(v * T, axis=-1))
        return s, theta


@dataclass
class ReturnBatch:
    start_s: np.ndarray
    start_theta: np.ndarray
    end_q: np.ndarray
    end_v: np.ndarray
    flight_time: np.ndarray
    energy_drift: np.ndarray
    f_s: np.ndarray          # chart coordinates of h_*^{-1}(psi(x))
    f_theta: np.ndarray

    @property
    def geodesic_length(self):
        return self.flight_time

    def record(self, i: int) -> "ReturnRecord":
        return ReturnRecord(SectionPoint(float(self.start_s[i]), float(self.start_theta[i])),
                            SectionPoint(float(self.f_s[i]), float(self.f_theta[i])),
                            float(self.flight_time[i]), float(self.flight_time[i]), 1)


@dataclass(frozen=True)
class ReturnRecord:
    start: SectionPoint
    end: SectionPoint
    flight_time: float
    geodesic_length: float
    crossings: int


@dataclass(frozen=True)
class FlightBand:
    t_lo: float
    t_hi: float
    samples: int
    seed: int

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t)
        return (t >= self.t_lo) & (t <= self.t_hi)


@dataclass(frozen=True)
class ClaimCheck:
    s0: float
    first_zero: float
    half_period: float

    @property
    def deviation(self) -> float:
        return abs(self.first_zero - self.half_period)

    def holds(self, tol: float = 1e-6) -> bool:
        return self.deviation <= tol


def _principal(d, period):
    """Representative of d modulo period in (-period/2, period/2]."""
    r = np.mod(d + 0.5 * period, period) - 0.5 * period
    return np.where(r == -0.5 * period, 0.5 * period, r)


class BirkhoffSection:
    """Section, half-return map psi and the annulus map f for one metric."""

    def __init__(self, metric: EllipsoidMetric, params: Optional[GeodesicParams] = None,
                 loop: Optional[LoopResult] = None):
        self.metric = metric
        self.params = params or GeodesicParams()
        metric.curvature_check()
        self.loop = loop or shortest_noncontractible(metric, self.params.loop_resolution, self.params.loop_tol)
        if self.loop.plane != (0, 1):
            raise ValueError(f"shortest non-contractible geodesic lies in plane {self.loop.plane}; "
                             "the section needs the (a,b)-plane ellipse")
        self.curve = SectionCurve(metric, self.params.arclength_modes)
        self.delta = self.curve.delta
        self._rhs = make_rhs(metric)
        self._conj_fwd = None
        self._conj_bwd = None
        self.compiled = True

    # half-return ------------------------------------------------------------
    def _flights(self, y0):
        """Flow each row until q3 changes sign against its initial direction."""
        p = self.params
        if np.any(y0[:, 5] == 0):
            raise ValueError("start states must be transverse to the section (theta not 0 or pi)")
        if not self.compiled:
            return self._flights_numpy(y0)
        t_max = p.max_flight_factor * self.delta
        out, tau, status = half_return_batch(np.ascontiguousarray(y0, dtype=float), self.metric.D,
                                             self.metric.conformal.table(), p.step, t_max,
                                             p.crossing_tol, p.crossing_iters)
        if status.any():
            late = np.nonzero(status)[0]
            raise HalfReturnError(f"{len(late)} trajectories did not return within {t_max:.3f}", late)
        return out, tau

    def _flights_numpy(self, y0):
        p = self.params
        n = len(y0)
        sigma = np.sign(y0[:, 5])
        y = y0.copy()
        t = np.zeros(n)
        out = np.empty_like(y0)
        tau = np.empty(n)
        active = np.arange(n)
        t_max = p.max_flight_factor * self.delta
        h = p.step
        while len(active):
            ya = y[active]
            yn = project_state(self.metric, dop853_step(self._rhs, ya, h))
            crossed = sigma[active] * yn[:, 2] <= 0
            if crossed.any():
                idx = active[crossed]
                tc, yc = self._locate(ya[crossed], yn[crossed], h)
                out[idx] = yc
                tau[idx] = t[idx] + tc
            rest = ~crossed
            y[active[rest]] = yn[rest]
            t[active[rest]] += h
            active = active[rest]
            if len(active) and t[active].max() > t_max:
                late = active[t[active] > t_max]
                raise HalfReturnError(f"{len(late)} trajectories did not return within {t_max:.3f}", late)
        return out, tau

    def _locate(self, y_old, y_new, h):
        """Illinois regula falsi for the partial step at which q3 vanishes."""
        p = self.params
        a = np.zeros(len(y_old))
        b = np.full(len(y_old), h)
        fa = y_old[:, 2].copy()
        fb = y_new[:, 2].copy()
        # q3 and its derivatives scale with the initial angle, so the tolerance is relative
        tol = p.crossing_tol * np.maximum(np.abs(fa), np.abs(fb))
        for _ in range(p.crossing_iters):
            done = np.abs(fb) <= tol
            if done.all():
                break
            denom = fb - fa
            c = np.where(denom != 0, b - fb * (b - a) / np.where(denom != 0, denom, 1.0), b)
            c = np.clip(c, np.minimum(a, b), np.maximum(a, b))
            fc = project_state(self.metric, dop853_step(self._rhs, y_old, c))[:, 2]
            fc = np.where(done, fb, fc)
            c = np.where(done, b, c)
            flip = fc * fb < 0
            a = np.where(flip, b, a)
            fa = np.where(flip, fb, np.where(done, fa, 0.5 * fa))
            b, fb = c, fc
        y = project_state(self.metric, dop853_step(self._rhs, y_old, b))
        return b, y

    def half_return(self, s, theta) -> ReturnBatch:
        s = np.atleast_1d(np.asarray(s, float))
        theta = np.atleast_1d(np.asarray(theta, float))
        if np.any((theta <= 0) | (theta >= np.pi)):
            raise ValueError("half_return needs interior points, 0 < theta < pi")
        q, v = self.curve.to_state(s, theta)
        return self._return_from_states(s, theta, q, v)

    def _return_from_states(self, s, theta, q, v) -> ReturnBatch:
        y0 = np.concatenate([q, v], axis=-1)
        end, tau = self._flights(y0)
        eq, ev = end[:, :3], end[:, 3:]
        E0 = self.metric.energy(q, v)
        drift = np.abs(self.metric.energy(eq, ev) - E0) / E0
        # h_*^{-1} of the landing point, read in the chart
        fs, fth = self.curve.from_state(-eq, -ev, self.params.chart_tol)
        return ReturnBatch(s, theta, eq, ev, tau, drift, fs, fth)

    def psi_states(self, q, v):
        """psi on arbitrary transverse states on the curve (either side)."""
        q = np.atleast_2d(q)
        v = np.atleast_2d(v)
        end, tau = self._flights(np.concatenate([q, v], axis=-1))
        return end[:, :3], end[:, 3:], tau

    # boundary extension -----------------------------------------------------
    def _conjugate_table(self, backward: bool):
        p = self.params
        m = p.conjugate_samples
        s0 = self.delta * np.arange(m) / m
        sign = -1.0 if backward else 1.0
        F = self.curve.curvature_series()
        w = 2 * np.pi / self.delta
        E = np.exp(1j * w * np.multiply.outer(s0, F.k))

        def rhs(t, y):
            K = F.mean + 2 * (E @ (F.c * np.exp(1j * w * sign * t * F.k))).real
            return np.concatenate([y[m:], -K * y[:m]])
        y0 = np.concatenate([np.zeros(m), np.ones(m)])
        sol = integrate.solve_ivp(rhs, (0, self.delta), y0, method="DOP853", rtol=p.jacobi_rtol,
                                  atol=1e-14, dense_output=True)
        tt = np.linspace(0, self.delta, 4001)[1:]
        J = sol.sol(tt)[:m]
        zeros = np.empty(m)
        for k in range(m):
            idx = np.nonzero(J[k] <= 0)[0]
            if not len(idx):
                raise ConjugatePointError(f"no conjugate point within one period from s0 = {s0[k]:.6f}")
            i = idx[0]
            lo = tt[i - 1] if i > 0 else 1e-12
            zeros[k] = optimize.brentq(lambda t: sol.sol(t)[k], lo, tt[i], xtol=1e-15, rtol=1e-15)
        return s0, zeros

    def conjugate_distance(self, s0, backward: bool = False):
        """Distance to the first conjugate point of sigma(s0) along +-sigma'."""
        attr = "_conj_bwd" if backward else "_conj_fwd"
        if getattr(self, attr) is None:
            _, zeros = self._conjugate_table(backward)
            setattr(self, attr, _Fourier(zeros, self.delta, cutoff=1e-15))
        return getattr(self, attr)(np.mod(np.asarray(s0, float), self.delta))

    def first_conjugate_exact(self, s0: float, backward: bool = False) -> float:
        """First zero of J'' + K J = 0, J(0)=0, J'(0)=1 along sigma from s0 (single shot)."""
        sign = -1.0 if backward else 1.0

        def rhs(t, y):
            return [y[1], -float(self.curve.curvature(np.mod(s0 + sign * t, self.delta))) * y[0]]

        def hit(t, y):
            return y[0]
        hit.terminal, hit.direction = True, -1
        sol = integrate.solve_ivp(rhs, (0, self.delta), [0.0, 1.0], method="DOP853",
                                  rtol=self.params.jacobi_rtol, atol=1e-14, events=hit)
        if not len(sol.t_events[0]):
            raise ConjugatePointError(f"no conjugate point within one period from s0 = {s0:.6f}")
        return float(sol.t_events[0][0])

    def claim_check(self, s0: float) -> ClaimCheck:
        return ClaimCheck(s0, self.first_conjugate_exact(s0), 0.5 * self.delta)

    def boundary_extension(self, s0, theta):
        """Image of a boundary point under f, from the first conjugate point.

        theta = 0: the limiting geodesic is sigma itself run forward, psi lands
        at sigma(s0 + t1) and h_*^{-1} moves it by half a period.  theta = pi is
        the same backwards.
        """
        s0 = np.asarray(s0, float)
        if theta == 0:
            return np.mod(s0 + self.conjugate_distance(s0) - 0.5 * self.delta, self.delta), 0.0
        if theta == np.pi or theta == math.pi:
            return np.mod(s0 - self.conjugate_distance(s0, backward=True) + 0.5 * self.delta, self.delta), np.pi
        raise ValueError("boundary_extension needs theta in {0, pi}")

    def boundary_displacement(self, s0, theta):
        if theta == 0:
            return self.conjugate_distance(s0) - 0.5 * self.delta
        return 0.5 * self.delta - self.conjugate_distance(s0, backward=True)

    # f ----------------------------------------------------------------------
    def f(self, s, theta):
        """f = h_*^{-1} o psi on interior points, in chart coordinates."""
        r = self.half_return(s, theta)
        return r.f_s, r.f_theta

    def f_displacement(self, s, theta):
        """Lifted displacement of f (principal branch) and the image angle.

        theta = 0 and pi use the boundary extension.  Angles slightly outside
        [0, pi] are handled through the reflection q3 -> -q3, an isometry that
        sends (s, theta) to (s, -theta), so f extends smoothly across both
        boundary circles (finite differences near the edge rely on this).
        """
        s = np.asarray(s, float)
        theta = np.asarray(theta, float)
        below = theta < 0
        above = theta > np.pi
        th = np.where(below, -theta, np.where(above, 2 * np.pi - theta, theta))
        if np.any((th < 0) | (th > np.pi)):
            raise ChartDomainError("angle more than pi outside the section")
        disp = np.empty(s.shape)
        out_theta = np.empty(s.shape)
        b0 = th == 0
        b1 = th == np.pi
        inner = ~(b0 | b1)
        if b0.any():
            disp[b0] = self.boundary_displacement(s[b0], 0)
            out_theta[b0] = 0.0
        if b1.any():
            disp[b1] = self.boundary_displacement(s[b1], np.pi)
            out_theta[b1] = np.pi
        if inner.any():
            r = self.half_return(s[inner], th[inner])
            disp[inner] = _principal(r.f_s - s[inner], self.delta)
            out_theta[inner] = r.f_theta
        out_theta = np.where(below, -out_theta, np.where(above, 2 * np.pi - out_theta, out_theta))
        return disp, out_theta

    def f_inverse_displacement(self, s, theta):
        """f^{-1} = I o f o I with the reversing involution I(s, theta) = (s + delta/2, pi - theta)."""
        s = np.asarray(s, float)
        theta = np.asarray(theta, float)
        d, th = self.f_displacement(np.mod(s + 0.5 * self.delta, self.delta), np.pi - theta)
        return d, np.pi - th

    def annulus_map(self) -> LiftedAnnulusMap:
        """f in annulus coordinates x = s / delta, y = theta / pi."""
        delta = self.delta

        def lift(x, y):
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            shape = np.broadcast(x, y).shape
            x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
            d, th = self.f_displacement(delta * np.mod(x, 1.0), np.pi * y)
            return (x + d / delta).reshape(shape), (th / np.pi).reshape(shape)

        def inverse(x, y):
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            shape = np.broadcast(x, y).shape
            x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
            d, th = self.f_inverse_displacement(delta * np.mod(x, 1.0), np.pi * y)
            return (x + d / delta).reshape(shape), (th / np.pi).reshape(shape)
        return LiftedAnnulusMap(lift, "geodesic_section_map", {"metric": self.metric.describe()}, True, inverse,
                                True, None, self.params.energy_tol)

    def lift_continuity(self, samples: int = 64) -> float:
        """Largest |displacement| / delta over a grid; the principal lift is
        continuous while this stays below max_lift_displacement."""
        s = self.delta * (np.arange(samples) + 0.5) / samples
        th = np.pi * (np.arange(samples) + 0.5) / samples
        S, TH = np.meshgrid(s, th)
        d, _ = self.f_displacement(S.ravel(), TH.ravel())
        worst = float(np.max(np.abs(d)) / self.delta)
        for bound in (0.0, np.pi):
            worst = max(worst, float(np.max(np.abs(self.boundary_displacement(s, bound))) / self.delta))
        if worst > self.params.max_lift_displacement:
            raise ValueError(f"section map displacement reaches {worst:.3f} delta; principal lift not continuous")
        return worst

    # calibration and checks ---------------------------------------------------
    def estimate_flight_band(self, samples: int = 2000, seed: int = 12345) -> FlightBand:
        rng = np.random.default_rng(seed)
        s = rng.uniform(0, self.delta, samples)
        th = np.arccos(rng.uniform(-1, 1, samples))  # the sin(theta) area density
        th = np.clip(th, 1e-9, np.pi - 1e-9)
        tau = self.half_return(s, th).flight_time
        sb = self.delta * np.arange(256) / 256
        lims = np.concatenate([tau, self.conjugate_distance(sb), self.conjugate_distance(sb, backward=True)])
        m = self.params.flight_margin
        return FlightBand(float(lims.min() * (1 - m)), float(lims.max() * (1 + m)), samples, seed)


# ---------------------------------------------------------------------------
# area

@dataclass
class PolygonAreaCheck:
    rectangle: tuple
    exact_area: float
    image_area_mc: float
    standard_error: float
    image_area_green: float
    samples: int

    @property
    def relative_deviation(self) -> float:
        return abs(self.image_area_mc - self.exact_area) / self.exact_area

    @property
    def green_deviation(self) -> float:
        return abs(self.image_area_green - self.exact_area) / self.exact_area


def rectangle_boundary(rect, n: int):
    s0, s1, t0, t1 = rect
    k = max(n // 4, 2)
    u = np.linspace(0, 1, k, endpoint=False)
    s = np.concatenate([s0 + (s1 - s0) * u, np.full(k, s1), s1 - (s1 - s0) * u, np.full(k, s0)])
    t = np.concatenate([np.full(k, t0), t0 + (t1 - t0) * u, np.full(k, t1), t1 - (t1 - t0) * u])
    return s, t


def sin_area(rect) -> float:
    s0, s1, t0, t1 = rect
    return (s1 - s0) * (math.cos(t0) - math.cos(t1))


def polygon_area_check(section: BirkhoffSection, rect, boundary_points: int = 4000, samples: int = 1_000_000,
                       rng=None) -> PolygonAreaCheck:
    """Measure of f(R) under the density sin(theta), by Monte Carlo inside the
    mapped boundary polygon, against the exact measure of R.  A Green's theorem
    value (area = closed integral of cos(theta) ds) is returned alongside."""
    rng = rng if rng is not None else np.random.default_rng(0)
    s, t = rectangle_boundary(rect, boundary_points)
    d, th = section.f_displacement(s, t)
    ps = s + d  # lifted, so the polygon does not wrap
    poly = np.column_stack([ps, th])
    closed = np.vstack([poly, poly[:1]])
    green = float(np.sum(0.5 * (np.cos(closed[1:, 1]) + np.cos(closed[:-1, 1])) * np.diff(closed[:, 0])))
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    box = float(np.prod(hi - lo))
    path = Path(poly)
    acc = acc2 = 0.0
    done = 0
    while done < samples:
        m = min(250_000, samples - done)
        pts = lo + (hi - lo) * rng.uniform(size=(m, 2))
        w = path.contains_points(pts) * np.sin(pts[:, 1])
        acc += w.sum()
        acc2 += (w * w).sum()
        done += m
    mean = acc / samples
    se = box * math.sqrt(max(acc2 / samples - mean * mean, 0.0) / samples)
    return PolygonAreaCheck(tuple(rect), sin_area(rect), box * mean, se, green, samples)


def random_section_rectangles(section: BirkhoffSection, n: int, rng, margin: float = 0.15):
    out = []
    for _ in range(n):
        ws = rng.uniform(0.05, 0.25) * section.delta
        wt = rng.uniform(0.1, 0.35) * np.pi
        s0 = rng.uniform(0, section.delta)
        t0 = rng.uniform(margin, np.pi - margin - wt)
        out.append((s0, s0 + ws, t0, t0 + wt))
    return out
