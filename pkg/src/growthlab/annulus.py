"""Lifted annulus maps, the built-in area-preserving families and rotation numbers.

The annulus is R/Z x [0, 1]; maps are given through a lift acting on
R x [0, 1] that commutes with the deck transformation T(x, y) = (x + 1, y).
Every map here is vectorised: ``lift_eval(x, y)`` accepts arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numba
import numpy as np

from .numtheory import FractionWindow

TWO_PI = 2.0 * math.pi


class FlowEscapeError(RuntimeError):
    pass


class UnsupportedOperation(RuntimeError):
    pass


@dataclass(frozen=True)
class AnnulusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "y", float(self.y))

    def distance(self, other: "AnnulusPoint") -> float:
        return float(annulus_distance(self.x, self.y, other.x, other.y))


@dataclass(frozen=True)
class LiftPoint:
    x_tilde: float
    y: float

    def project(self) -> AnnulusPoint:
        return AnnulusPoint(self.x_tilde, self.y)

    def deck(self, k: int = 1) -> "LiftPoint":
        return LiftPoint(self.x_tilde + k, self.y)


def circle_distance(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def annulus_distance(x1, y1, x2, y2):
    """Max of circle distance in x and absolute distance in y."""
    return np.maximum(circle_distance(x1, x2), np.abs(np.asarray(y1) - np.asarray(y2)))


LiftFn = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass(eq=False)
class LiftedAnnulusMap:
    """An annulus map with a distinguished lift.

    ``lift`` maps arrays (x_tilde, y) to (x_tilde', y').  ``inverse_lift``
    is optional.  ``boundary_rotation`` holds analytic rotation numbers of
    the two boundary circles (y = 0, y = 1) when the family knows them.
    """

    lift: LiftFn
    family: str
    params: dict = field(default_factory=dict)
    closed: bool = True
    inverse_lift: Optional[LiftFn] = None
    area_preserving: bool = True
    boundary_rotation: Optional[tuple] = None
    area_tolerance: float = 0.0

    def lift_eval(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.lift(x, y)

    def eval(self, x, y):
        xn, yn = self.lift_eval(x, y)
        return np.mod(xn, 1.0), yn

    def __call__(self, p):
        if isinstance(p, LiftPoint):
            xn, yn = self.lift_eval(p.x_tilde, p.y)
            return LiftPoint(float(xn), float(yn))
        xn, yn = self.eval(p.x, p.y)
        return AnnulusPoint(float(xn), float(yn))

    @property
    def invertible(self) -> bool:
        return self.inverse_lift is not None

    def inverse(self) -> "LiftedAnnulusMap":
        if self.inverse_lift is None:
            raise UnsupportedOperation(f"{self.family} has no inverse")
        br = None if self.boundary_rotation is None else tuple(-r for r in self.boundary_rotation)
        return LiftedAnnulusMap(self.inverse_lift, self.family + "^-1", self.params, self.closed,
                                self.lift, self.area_preserving, br, self.area_tolerance)

    def iterate(self, x, y, n: int):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for _ in range(n):
            x, y = self.lift(x, y)
        return x, y

    def orbit(self, x, y, n: int):
        """Lifted orbit arrays of shape (n + 1, ...)."""
        xs = [np.asarray(x, dtype=float)]
        ys = [np.asarray(y, dtype=float)]
        for _ in range(n):
            a, b = self.lift(xs[-1], ys[-1])
            xs.append(a)
            ys.append(b)
        return np.stack(xs), np.stack(ys)

    def power(self, q: int) -> "LiftedAnnulusMap":
        if q < 1:
            raise ValueError("power needs q >= 1")
        inv = None
        if self.inverse_lift is not None:
            base_inv = self.inverse_lift

            def inv(x, y):
                for _ in range(q):
                    x, y = base_inv(x, y)
                return x, y
        br = None if self.boundary_rotation is None else tuple(q * r for r in self.boundary_rotation)
        return LiftedAnnulusMap(lambda x, y: self.iterate(x, y, q), f"{self.family}^{q}",
                                dict(self.params, power=q), self.closed, inv, self.area_preserving,
                                br, q * self.area_tolerance)

    def deck_shifted(self, k: int) -> "LiftedAnnulusMap":
        """The lift T^k o f."""
        base = self.lift
        inv = None
        if self.inverse_lift is not None:
            base_inv = self.inverse_lift

            def inv(x, y):
                return base_inv(x - k, y)
        br = None if self.boundary_rotation is None else tuple(r + k for r in self.boundary_rotation)
        return LiftedAnnulusMap(lambda x, y: (base(x, y)[0] + k, base(x, y)[1]), f"T^{k}o{self.family}",
                                dict(self.params, deck=k), self.closed, inv, self.area_preserving, br,
                                self.area_tolerance)

    def conjugated_by(self, c: "LiftedAnnulusMap") -> "LiftedAnnulusMap":
        """c o f o c^-1 (c needs an inverse)."""
        if c.inverse_lift is None:
            raise UnsupportedOperation("conjugating map must be invertible")
        f, cl, ci = self.lift, c.lift, c.inverse_lift

        def lift(x, y):
            return cl(*f(*ci(x, y)))
        inv = None
        if self.inverse_lift is not None:
            fi = self.inverse_lift

            def inv(x, y):
                return cl(*fi(*ci(x, y)))
        return LiftedAnnulusMap(lift, f"conj({self.family})", dict(self.params), self.closed, inv,
                                self.area_preserving, self.boundary_rotation,
                                self.area_tolerance + 2 * c.area_tolerance)


def compose(g: LiftedAnnulusMap, f: LiftedAnnulusMap) -> LiftedAnnulusMap:
    """g o f."""
    inv = None
    if f.inverse_lift is not None and g.inverse_lift is not None:
        fi, gi = f.inverse_lift, g.inverse_lift

        def inv(x, y):
            return fi(*gi(x, y))
    br = None
    if f.boundary_rotation is not None and g.boundary_rotation is not None:
        br = tuple(a + b for a, b in zip(f.boundary_rotation, g.boundary_rotation))
    return LiftedAnnulusMap(lambda x, y: g.lift(*f.lift(x, y)), f"{g.family}o{f.family}",
                            {"outer": g.params, "inner": f.params}, f.closed and g.closed, inv,
                            f.area_preserving and g.area_preserving, br,
                            f.area_tolerance + g.area_tolerance)


# ---------------------------------------------------------------------------
# families

def make_rigid_rotation(alpha) -> LiftedAnnulusMap:
    a = float(alpha)
    return LiftedAnnulusMap(lambda x, y: (x + a, y + 0.0), "rigid", {"alpha": alpha}, True,
                            lambda x, y: (x - a, y + 0.0), True, (alpha, alpha))


class LinearOmega:
    """omega(y) = a + (b - a) y with exact boundary values."""

    def __init__(self, a, b):
        self.a = Fraction(a) if not isinstance(a, float) else a
        self.b = Fraction(b) if not isinstance(b, float) else b
        self._a, self._b = float(a), float(b)

    def __call__(self, y):
        return self._a + (self._b - self._a) * np.asarray(y, dtype=float)

    def inverse(self, r):
        """The level y with omega(y) = r."""
        return (float(r) - self._a) / (self._b - self._a)

    @property
    def boundary_values(self):
        return (self.a, self.b)

    def __repr__(self):
        return f"LinearOmega({self.a}, {self.b})"


def _check_monotone(omega, samples: int = 1001):
    y = np.linspace(0.0, 1.0, samples)
    d = np.diff(omega(y))
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("omega must be strictly monotone on [0, 1]")


def make_integrable_twist(omega) -> LiftedAnnulusMap:
    """The shear (x, y) -> (x + omega(y), y)."""
    _check_monotone(omega)
    br = getattr(omega, "boundary_values", None) or (float(omega(0.0)), float(omega(1.0)))

    def lift(x, y):
        return x + omega(y), y + 0.0

    def inv(x, y):
        return x - omega(y), y + 0.0
    return LiftedAnnulusMap(lift, "integrable_twist", {"omega": repr(omega)}, True, inv, True, tuple(br))


class BumpHamiltonian:
    """H(x, y) = y^2 (1 - y)^2 * sum_m a_m sin(2 pi (m x + phi_m)).

    H and dH/dy vanish on both boundary circles, so the flow fixes them
    pointwise.  ``BumpHamiltonian()`` is the single mode sin(2 pi x) y^2 (1-y)^2;
    pass ``amplitudes`` (for modes 1, 2, ...) for a multi-mode perturbation.
    """

    def __init__(self, mode: int = 1, phase: float = 0.0, amplitude: float = 1.0, amplitudes=None, phases=None):
        if amplitudes is None:
            self.modes = np.array([float(mode)])
            self.amplitudes = np.array([float(amplitude)])
            self.phases = np.array([float(phase)])
        else:
            self.amplitudes = np.asarray(amplitudes, dtype=float)
            self.modes = np.arange(1, len(self.amplitudes) + 1, dtype=float)
            self.phases = np.zeros_like(self.amplitudes) if phases is None else np.asarray(phases, dtype=float)

    def dense(self):
        """Amplitudes and phase cosines/sines on the dense mode range 1..max(mode)."""
        M = int(self.modes.max())
        amps, cph, sph = np.zeros(M), np.ones(M), np.zeros(M)
        for m, a, ph in zip(self.modes.astype(int), self.amplitudes, self.phases):
            amps[m - 1] += a
            cph[m - 1], sph[m - 1] = math.cos(TWO_PI * ph), math.sin(TWO_PI * ph)
        return amps, cph, sph

    @staticmethod
    def _g(y):
        return y * y * (1 - y) * (1 - y)

    @staticmethod
    def _gy(y):
        return 2 * y * (1 - y) * (1 - 2 * y)

    def _trig(self, x):
        arg = TWO_PI * (np.multiply.outer(x, self.modes) + self.phases)
        return np.sin(arg), np.cos(arg)

    def __call__(self, x, y):
        s, _ = self._trig(np.asarray(x, float))
        return (s @ self.amplitudes) * self._g(y)

    def dx(self, x, y):
        _, c = self._trig(np.asarray(x, float))
        return (c @ (TWO_PI * self.modes * self.amplitudes)) * self._g(y)

    def dy(self, x, y):
        s, _ = self._trig(np.asarray(x, float))
        return (s @ self.amplitudes) * self._gy(y)

    def jet(self, x, y):
        """(H_x, H_y, H_xx, H_xy, H_yy)."""
        s, c = self._trig(np.asarray(x, float))
        k = TWO_PI * self.modes
        u = y * (1 - y)
        g = u * u
        gy = 2 * u * (1 - 2 * y)
        gyy = 2 * (1 - 6 * u)
        S, C, S2 = s @ self.amplitudes, c @ (k * self.amplitudes), s @ (k * k * self.amplitudes)
        return C * g, S * gy, -S2 * g, C * gy, S * gyy

    def __repr__(self):
        if len(self.modes) == 1:
            return (f"BumpHamiltonian(mode={int(self.modes[0])}, phase={self.phases[0]}, "
                    f"amplitude={self.amplitudes[0]})")
        return f"BumpHamiltonian(amplitudes={self.amplitudes.tolist()}, phases={self.phases.tolist()})"


@numba.njit(cache=True)
def _bump_midpoint(x, y, h, substeps, amps, cph, sph, tol, max_iter):
    # amps, cos(2 pi phi_m), sin(2 pi phi_m) are dense over modes m = 1..M;
    # sin/cos of m * theta come from the angle-addition recurrence
    twopi = 2.0 * np.pi
    nm = amps.size
    for i in range(x.size):
        xi, yi = x[i], y[i]
        for _ in range(substeps):
            xn, yn = xi, yi
            last = np.inf
            for _ in range(max_iter):
                xm = 0.5 * (xi + xn)
                ym = 0.5 * (yi + yn)
                s1 = np.sin(twopi * xm)
                c1 = np.cos(twopi * xm)
                sm, cm = s1, c1
                S = 0.0
                C = 0.0
                S2 = 0.0
                for m in range(nm):
                    if m > 0:
                        sm, cm = sm * c1 + cm * s1, cm * c1 - sm * s1
                    a = amps[m]
                    if a != 0.0:
                        k = twopi * (m + 1)
                        sv = a * (sm * cph[m] + cm * sph[m])
                        cv = a * (cm * cph[m] - sm * sph[m])
                        S += sv
                        C += k * cv
                        S2 += k * k * sv
                u = ym * (1.0 - ym)
                g = u * u
                gy = 2.0 * u * (1.0 - 2.0 * ym)
                gyy = 2.0 * (1.0 - 6.0 * u)
                rx = xn - xi - h * S * gy
                ry = yn - yi + h * C * g
                hxy = C * gy
                j11 = 1.0 - 0.5 * h * hxy
                j12 = -0.5 * h * S * gyy
                j21 = -0.5 * h * S2 * g
                j22 = 1.0 + 0.5 * h * hxy
                det = j11 * j22 - j12 * j21
                dx = (j22 * rx - j12 * ry) / det
                dy = (j11 * ry - j21 * rx) / det
                xn -= dx
                yn -= dy
                step = max(abs(dx), abs(dy))
                if step <= tol or step >= 0.5 * last:
                    break
                last = step
            xi, yi = xn, yn
        x[i], y[i] = xi, yi
    return x, y


def implicit_midpoint_flow(H, x, y, t: float, substeps: int, tol: float = 1e-15, max_iter: int = 60):
    """Time-t flow of x' = H_y, y' = -H_x by the implicit midpoint rule.

    The rule is symplectic, so the step map preserves area up to the solver
    tolerance; running it with -t undoes it.  H must be 1-periodic in x, which
    lets the integer part of x ride along untouched (exact lift equivariance).
    Hamiltonians exposing ``hessian`` get a Newton solve, others fixed point.
    """
    h = t / substeps
    x = np.asarray(x, dtype=float)
    y = np.array(y, dtype=float, copy=True)
    shift = np.floor(x)
    x = x - shift
    if h == 0:
        return x + shift, y
    if isinstance(H, BumpHamiltonian):
        xf = np.ascontiguousarray(x, dtype=float).ravel()
        yf = np.ascontiguousarray(y, dtype=float).ravel().copy()
        xo, yo = _bump_midpoint(xf.copy(), yf, h, substeps, *H.dense(), tol, max_iter)
        return xo.reshape(x.shape) + shift, yo.reshape(np.shape(y))
    if not hasattr(H, "jet"):
        for _ in range(substeps):
            xn, yn = x + h * H.dy(x, y), y - h * H.dx(x, y)
            for _ in range(max_iter):
                xm, ym = 0.5 * (x + xn), 0.5 * (y + yn)
                xk, yk = x + h * H.dy(xm, ym), y - h * H.dx(xm, ym)
                delta = max(np.max(np.abs(xk - xn), initial=0.0), np.max(np.abs(yk - yn), initial=0.0))
                xn, yn = xk, yk
                if delta <= tol:
                    break
            x, y = xn, yn
        return x + shift, y
    for _ in range(substeps):
        xn, yn = x, y
        last = np.inf
        for _ in range(max_iter):
            xm, ym = 0.5 * (x + xn), 0.5 * (y + yn)
            hx, hy, hxx, hxy, hyy = H.jet(xm, ym)
            rx = xn - x - h * hy
            ry = yn - y + h * hx
            # Jacobian of the residual: I - h/2 [[Hxy, Hyy], [-Hxx, -Hxy]]
            j11 = 1 - 0.5 * h * hxy
            j12 = -0.5 * h * hyy
            j21 = 0.5 * h * hxx
            j22 = 1 + 0.5 * h * hxy
            det = j11 * j22 - j12 * j21
            dx = (j22 * rx - j12 * ry) / det
            dy = (j11 * ry - j21 * rx) / det
            xn, yn = xn - dx, yn - dy
            step = max(np.max(np.abs(dx), initial=0.0), np.max(np.abs(dy), initial=0.0))
            # stop at tolerance or once rounding noise stops the decrease
            if step <= tol or step >= 0.5 * last:
                break
            last = step
        x, y = xn, yn
    return x + shift, y


def make_hamiltonian_flow_map(H, t: float = 1.0, substeps: int = 20) -> LiftedAnnulusMap:
    """Time-t map of a boundary-fixing Hamiltonian, with its inverse."""
    return LiftedAnnulusMap(lambda x, y: implicit_midpoint_flow(H, x, y, t, substeps),
                            "hamiltonian_flow", {"H": repr(H), "t": t, "substeps": substeps}, True,
                            lambda x, y: implicit_midpoint_flow(H, x, y, -t, substeps), True,
                            (Fraction(0), Fraction(0)), 1e-13)


def make_perturbed_twist(omega, hamiltonian=None, epsilon: float = 0.05, substeps: int = 10,
                         probe: int = 64) -> LiftedAnnulusMap:
    """(time-epsilon flow of H) o (x, y) -> (x + omega(y), y)."""
    H = hamiltonian or BumpHamiltonian()
    shear = make_integrable_twist(omega)
    if epsilon == 0:
        return shear
    for yb in (0.0, 1.0):
        xs = np.linspace(0, 1, 17)
        if np.max(np.abs(H(xs, yb))) > 1e-14 or np.max(np.abs(H.dy(xs, yb))) > 1e-14:
            raise ValueError("H and dH/dy must vanish on the boundary circles")
    # probe a grid near the boundaries and the bulk; the flow must stay in [0, 1]
    gx, gy = np.meshgrid(np.linspace(0, 1, probe, endpoint=False),
                         np.concatenate([np.linspace(0, 0.05, probe // 4), np.linspace(0.05, 0.95, probe // 2),
                                         np.linspace(0.95, 1, probe // 4)]))
    _, py = implicit_midpoint_flow(H, gx, gy, epsilon, substeps)
    if py.min() < -1e-13 or py.max() > 1 + 1e-13:
        raise FlowEscapeError(f"time-{epsilon} flow leaves the annulus (y range {py.min()}, {py.max()})")

    def lift(x, y):
        xs, ys = shear.lift(x, y)
        return implicit_midpoint_flow(H, xs, ys, epsilon, substeps)

    def inv(x, y):
        xs, ys = implicit_midpoint_flow(H, x, y, -epsilon, substeps)
        return shear.inverse_lift(xs, ys)
    return LiftedAnnulusMap(lift, "perturbed_twist",
                            {"omega": repr(omega), "H": repr(H), "epsilon": epsilon, "substeps": substeps},
                            True, inv, True, shear.boundary_rotation, 1e-13)


DEFAULT_MODES = 16


def default_hamiltonian() -> BumpHamiltonian:
    """Modes 1..16 with amplitudes 1/m^2: every q-resonance up to 16 appears at first order."""
    return BumpHamiltonian(amplitudes=[1.0 / m ** 2 for m in range(1, DEFAULT_MODES + 1)])


def default_perturbed_twist(epsilon: float = 0.05, substeps: int = 10) -> LiftedAnnulusMap:
    """The census map: omega(y) = -0.3 + 0.7 y, multi-mode bump H, epsilon = 0.05."""
    return make_perturbed_twist(LinearOmega(Fraction(-3, 10), Fraction(2, 5)), default_hamiltonian(),
                                epsilon, substeps)


# ---------------------------------------------------------------------------
# rotation numbers

@dataclass
class RotationEstimate:
    value: float
    iterates_used: int
    error_bound: float
    exact_rational: Optional[tuple] = None
    flags: list = field(default_factory=list)

    def as_dict(self):
        return {"value": self.value, "iterates_used": self.iterates_used, "error_bound": self.error_bound,
                "exact_rational": None if self.exact_rational is None else list(self.exact_rational),
                "flags": list(self.flags)}


def rotation_number(fmap: LiftedAnnulusMap, seed, max_iter: int = 10_000, recurrence_eps: float = 0.02,
                    period_cap: int = 64, periodic_tol: float = 1e-9, shadow: bool = True) -> RotationEstimate:
    """Rotation number of a point, from lifted displacements at recurrence times.

    A seed that returns within ``periodic_tol`` after q <= period_cap steps is
    reported exactly as (p, q).  Otherwise the average displacement is taken at
    the last time the orbit came back within ``recurrence_eps`` of the seed; a
    seed that never comes back gets the plain average and a "non-recurrent" flag.
    With ``shadow`` a second orbit started 1e-9 away is run alongside; if the
    two separate by more than 1e-4 the seed is flagged "chaotic", meaning the
    averages need not converge and the bound is only empirical.
    """
    if isinstance(seed, LiftPoint):
        x0, y0 = seed.x_tilde, seed.y
    else:
        x0, y0 = seed.x, seed.y
    return rotation_numbers(fmap, [x0], [y0], max_iter, recurrence_eps, period_cap, periodic_tol, shadow)[0]


SHADOW_OFFSET = 1e-9
SHADOW_SEPARATION = 1e-4


def reduced_orbit(fmap: LiftedAnnulusMap, x0, y0, n: int):
    """Orbit as (displacement, x mod 1, y), each of shape (n + 1, ...).

    x is reduced to [0, 1) after every step and the integer parts are counted
    separately, so the lift is always evaluated near the fundamental domain
    and long orbits do not lose precision to the growing lifted coordinate.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = x0 - np.floor(x0)
    y = np.asarray(y0, dtype=float)
    ints = np.zeros_like(xf)
    disp = np.empty((n + 1,) + xf.shape)
    xs = np.empty_like(disp)
    ys = np.empty_like(disp)
    disp[0], xs[0], ys[0] = 0.0, xf, y
    for i in range(1, n + 1):
        a, y = fmap.lift_eval(xf, y)
        m = np.floor(a)
        ints += m
        xf = a - m
        disp[i] = ints + (xf - xs[0])
        xs[i], ys[i] = xf, y
    return disp, xs, ys


def rotation_numbers(fmap: LiftedAnnulusMap, x0, y0, max_iter: int = 10_000, recurrence_eps: float = 0.02,
                     period_cap: int = 64, periodic_tol: float = 1e-9, shadow: bool = True) -> list[RotationEstimate]:
    """Vectorised :func:`rotation_number` over arrays of seeds."""
    if max_iter < 100:
        raise ValueError("max_iter must be at least 100")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    k = len(x0)
    if shadow:
        # nudge y towards the middle so the shadow stays in the same closed annulus
        ys0 = y0 + np.where(y0 < 0.5, SHADOW_OFFSET, -SHADOW_OFFSET)
        x0, y0 = np.concatenate([x0, x0]), np.concatenate([y0, ys0])
    disp, xs, ys = reduced_orbit(fmap, x0, y0, max_iter)
    out = []
    for j in range(k):
        est = _estimate_from_orbit(disp[:, j], xs[:, j], ys[:, j], recurrence_eps, period_cap, periodic_tol)
        if shadow and est.exact_rational is None:
            sep = max(np.max(np.abs(disp[:, j] - disp[:, k + j])), np.max(np.abs(ys[:, j] - ys[:, k + j])))
            if sep > SHADOW_SEPARATION:
                est.flags.append("chaotic")
        out.append(est)
    return out


def _estimate_from_orbit(disp, xs, ys, recurrence_eps, period_cap, periodic_tol) -> RotationEstimate:
    max_iter = len(xs) - 1
    dist = annulus_distance(xs, ys, xs[0], ys[0])
    for q in range(1, min(period_cap, max_iter) + 1):
        if dist[q] <= periodic_tol:
            p = int(round(disp[q]))
            return RotationEstimate(p / q, q, 0.0, (p, q), ["periodic"])
    flags = []
    rec = np.nonzero(dist[1:] <= recurrence_eps)[0] + 1
    if len(rec):
        last = int(rec[-1])
        sample_n = rec
    else:
        flags.append("non-recurrent")
        last = max_iter
        sample_n = np.arange(1, max_iter + 1)
    value = disp[last] / last
    if np.ptp(ys) <= 1e-14:
        # orbit confined to an invariant circle: a circle-map lift, |avg - rho| < 1/n
        flags.append("invariant-level")
        bound = 2.0 / last
    else:
        tail = sample_n[sample_n >= max(1, last // 10)]
        averages = disp[tail] / tail
        bound = float(np.max(np.abs(averages - value), initial=0.0)) + 1.0 / last
    return RotationEstimate(float(value), last, float(bound), None, flags)


def circle_rotation_number(lift1d: Callable, x0: float = 0.0, n: int = 10_000) -> tuple[float, float]:
    """Poincare rotation number of a circle-map lift, with the bound 1/n."""
    x = np.float64(x0)
    for _ in range(n):
        x = lift1d(x)
    return float((x - x0) / n), 1.0 / n


@dataclass
class BoundaryRotation:
    lower: object
    upper: object
    at_y0: object
    at_y1: object
    degenerate: bool
    error_bound: float = 0.0

    @property
    def window(self) -> FractionWindow:
        if self.degenerate:
            raise ValueError("degenerate rotation window (equal boundary rotation numbers)")
        return FractionWindow(self.lower, self.upper)


def boundary_rotation_numbers(fmap: LiftedAnnulusMap, n: int = 10_000, tol: float = 1e-9) -> BoundaryRotation:
    """Rotation numbers of the two boundary circle maps, ordered."""
    if not fmap.closed:
        raise UnsupportedOperation(f"{fmap.family} is an open-annulus family without boundary circles")
    if fmap.boundary_rotation is not None:
        r0, r1 = fmap.boundary_rotation
        err = 0.0
        # cross-check the analytic values
        e0, b0 = circle_rotation_number(lambda x: fmap.lift_eval(x, 0.0)[0], 0.0, 200)
        e1, b1 = circle_rotation_number(lambda x: fmap.lift_eval(x, 1.0)[0], 0.0, 200)
        if abs(e0 - float(r0)) > b0 + 1e-9 or abs(e1 - float(r1)) > b1 + 1e-9:
            raise RuntimeError("analytic boundary rotation numbers disagree with the boundary maps")
    else:
        r0, err0 = circle_rotation_number(lambda x: fmap.lift_eval(x, 0.0)[0], 0.0, n)
        r1, err1 = circle_rotation_number(lambda x: fmap.lift_eval(x, 1.0)[0], 0.0, n)
        err = max(err0, err1)
    degenerate = abs(float(r0) - float(r1)) <= max(2 * err, tol) if err else r0 == r1
    lo, hi = (r0, r1) if float(r0) <= float(r1) else (r1, r0)
    return BoundaryRotation(lo, hi, r0, r1, bool(degenerate), err)


# ---------------------------------------------------------------------------
# area

@dataclass
class AreaCheck:
    rectangle: tuple
    area: float
    deviation: float
    standard_error: float
    samples: int

    def within(self, sigmas: float = 3.0, extra: float = 0.0) -> bool:
        return abs(self.deviation) <= sigmas * self.standard_error + extra


def _in_rectangle(x, y, rect):
    x0, x1, y0, y1 = rect
    return (np.mod(x - x0, 1.0) <= (x1 - x0)) & (y >= y0) & (y <= y1)


def monte_carlo_area_check(fmap: LiftedAnnulusMap, rect, samples: int = 1_000_000, rng=None,
                           density=None, chunk: int = 250_000) -> AreaCheck:
    """Paired Monte Carlo estimate of measure(f(R)) - measure(R).

    Uses u in f(R) iff f^-1(u) in R on a single uniform sample, so the two
    indicators are strongly correlated and the difference has a small
    standard error.  ``density`` optionally weights the measure.
    """
    if fmap.inverse_lift is None:
        raise UnsupportedOperation("paired area estimate needs the inverse map")
    rng = rng if rng is not None else np.random.default_rng(0)
    total = total_sq = base = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        u = rng.uniform(0, 1, m)
        v = rng.uniform(0, 1, m)
        w = np.ones(m) if density is None else density(u, v)
        xi, yi = fmap.inverse_lift(u, v)
        d = w * (_in_rectangle(xi, yi, rect).astype(float) - _in_rectangle(u, v, rect))
        total += d.sum()
        total_sq += (d * d).sum()
        base += (w * _in_rectangle(u, v, rect)).sum()
        done += m
    mean = total / samples
    se = math.sqrt(max(total_sq / samples - mean * mean, 0.0) / samples)
    return AreaCheck(tuple(rect), base / samples, mean, se, samples)


def random_rectangles(n: int, rng, min_side: float = 0.1, max_side: float = 0.4):
    out = []
    for _ in range(n):
        wx, wy = rng.uniform(min_side, max_side, 2)
        x0 = rng.uniform(0, 1)
        y0 = rng.uniform(0, 1 - wy)
        out.append((x0, x0 + wx, y0, y0 + wy))
    return out
