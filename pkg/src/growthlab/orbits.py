"""Periodic-orbit search on lifted annulus maps and the growth censuses built on it.

For each irreducible p/q inside the boundary rotation window the displacement
field D(z) = f^q(z) - z - (p, 0) is sampled on a fundamental-domain grid;
cells where both components change sign seed a damped Newton iteration.
Roots are grouped into orbits modulo the map and the deck transformation.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .annulus import (AnnulusPoint, LiftedAnnulusMap, annulus_distance, boundary_rotation_numbers)
from .config import SolverParams
from .numtheory import FractionWindow, cumulative_Phi, is_prime, phi_window

log = logging.getLogger(__name__)


@dataclass
class PeriodicOrbit:
    period_q: int
    translation_p: int
    points: list
    residual: float
    prime_period: int
    interior: bool
    flags: list = field(default_factory=list)

    @property
    def rotation(self) -> Fraction:
        return Fraction(self.translation_p, self.period_q)

    @property
    def non_isolated(self) -> bool:
        return "non-isolated" in self.flags

    @property
    def countable(self) -> bool:
        return self.interior and "ambiguous" not in self.flags

    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([p.x for p in self.points]), np.array([p.y for p in self.points])

    def as_dict(self):
        return {"p": self.translation_p, "q": self.period_q, "prime_period": self.prime_period,
                "residual": self.residual, "interior": self.interior, "flags": list(self.flags),
                "points": [[p.x, p.y] for p in self.points]}


class OrbitList(list):
    """A list of orbits plus the diagnostics of the search that produced it."""

    def __init__(self, items=(), diagnostics=None):
        super().__init__(items)
        self.diagnostics = diagnostics or []


class IterateStack:
    """Iterates f^k of a fixed grid, computed once and shared across fractions."""

    def __init__(self, fmap: LiftedAnnulusMap, grid: tuple):
        nx, ny = grid
        self.fmap, self.grid = fmap, (nx, ny)
        x = np.arange(nx) / nx
        y = (np.arange(ny) + 0.5) / ny
        self.X, self.Y = np.meshgrid(x, y)
        self._xs = [self.X]
        self._ys = [self.Y]

    def __getitem__(self, k: int):
        while len(self._xs) <= k:
            a, b = self.fmap.lift_eval(self._xs[-1], self._ys[-1])
            self._xs.append(a)
            self._ys.append(b)
        return self._xs[k], self._ys[k]


def _sign_change(F, zero_tol):
    """Cells (j, i)-(j+1, i+1) whose four corners straddle zero; x wraps."""
    s = np.sign(np.where(np.abs(F) <= zero_tol, 0.0, F))
    corners = [s[:-1], s[1:], np.roll(s, -1, axis=1)[:-1], np.roll(s, -1, axis=1)[1:]]
    lo = np.minimum.reduce(corners)
    hi = np.maximum.reduce(corners)
    return (lo <= 0) & (hi >= 0)


def _power_lift(fmap, q):
    def F(x, y):
        return fmap.iterate(x, y, q)
    return F


def _newton(F, x, y, p, params: SolverParams):
    """Damped Newton on D(z) = F(z) - z - (p, 0) for arrays of starts."""
    h = params.fd_step
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)

    def resid(x, y):
        a, b = F(x, y)
        return a - x - p, b - y

    rx, ry = resid(x, y)
    norm = np.hypot(rx, ry)
    for _ in range(params.newton_steps):
        active = norm > params.tol * 1e-2
        if not active.any():
            break
        J = _fd_jacobian(F, x[active], y[active], h)
        J[:, 0, 0] -= 1
        J[:, 1, 1] -= 1
        rhs = -np.stack([rx[active], ry[active]], axis=1)
        step = np.empty_like(rhs)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        scale = np.abs(J).reshape(len(J), -1).max(axis=1) ** 2
        good = np.abs(det) > 1e-14 * np.maximum(scale, 1e-300)
        if good.any():
            step[good] = np.linalg.solve(J[good], rhs[good][..., None])[..., 0]
        for k in np.nonzero(~good)[0]:
            step[k] = np.linalg.lstsq(J[k], rhs[k], rcond=None)[0]
        idx = np.nonzero(active)[0]
        lam = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        for _ in range(params.max_halvings):
            tx = x[idx] + lam * step[:, 0]
            ty = y[idx] + lam * step[:, 1]
            nrx, nry = resid(tx, ty)
            nn = np.hypot(nrx, nry)
            ok = pending & (nn < norm[idx])
            sel = idx[ok]
            x[sel], y[sel], rx[sel], ry[sel], norm[sel] = tx[ok], ty[ok], nrx[ok], nry[ok], nn[ok]
            pending &= ~ok
            if not pending.any():
                break
            lam[pending] *= 0.5
        if pending.all():
            break
    return x, y, norm


def _fd_jacobian(F, x, y, h):
    n = len(x)
    xs = np.concatenate([x + h, x - h, x, x])
    ys = np.concatenate([y, y, y + h, y - h])
    a, b = F(xs, ys)
    J = np.empty((n, 2, 2))
    J[:, 0, 0] = (a[:n] - a[n:2 * n]) / (2 * h)
    J[:, 1, 0] = (b[:n] - b[n:2 * n]) / (2 * h)
    J[:, 0, 1] = (a[2 * n:3 * n] - a[3 * n:]) / (2 * h)
    J[:, 1, 1] = (b[2 * n:3 * n] - b[3 * n:]) / (2 * h)
    return J


def _orbit_points(fmap, x, y, q):
    xs, ys = fmap.orbit(np.float64(x), np.float64(y), q - 1)
    return np.mod(xs, 1.0), ys


def _in_orbit(orbit_xy, x, y, eps):
    ox, oy = orbit_xy
    return bool(np.any(annulus_distance(ox, oy, x, y) <= eps))


def find_orbits(fmap: LiftedAnnulusMap, p: int, q: int, grid=None, tol: Optional[float] = None,
                params: Optional[SolverParams] = None, stack: Optional[IterateStack] = None,
                window: Optional[FractionWindow] = None) -> OrbitList:
    """All (p, q) periodic orbits found from a grid scan, deduplicated.

    Returns an :class:`OrbitList`; an empty list carries a "not-found"
    diagnostic.  Continua of periodic points (rigid rotations, integrable
    twists) come back as a single orbit flagged "non-isolated".
    """
    params = params or SolverParams()
    if grid is not None:
        params = params.with_(grid=tuple(grid))
    if tol is not None:
        params = params.with_(tol=tol)
    if q < 1 or math.gcd(p, q) != 1:
        raise ValueError(f"need q >= 1 and gcd(p, q) = 1, got {p}/{q}")
    diagnostics = []
    if window is None and fmap.closed:
        br = boundary_rotation_numbers(fmap)
        window = None if br.degenerate else br.window
    if window is not None and not window.contains(Fraction(p, q)):
        diagnostics.append("outside-window")
    if stack is None or stack.grid != tuple(params.grid):
        stack = IterateStack(fmap, params.grid)
    X, Y = stack[0]
    Xq, Yq = stack[q]
    Dx, Dy = Xq - X - p, Yq - Y
    F = _power_lift(fmap, q)

    zero_tol = params.tol
    if np.all(np.hypot(Dx, Dy) <= 10 * params.tol):
        # the whole grid is periodic: a continuum, reported as one class
        pts_x, pts_y = _orbit_points(fmap, X[0, 0], Y[0, 0], q)
        orbit = _make_orbit(fmap, p, q, pts_x, pts_y, params, ["non-isolated"])
        diagnostics.append("non-isolated continuum")
        return OrbitList([orbit], diagnostics)

    cells = _sign_change(Dx, zero_tol) & _sign_change(Dy, zero_tol)
    j, i = np.nonzero(cells)
    nx, ny = params.grid
    x0 = (i + 0.5) / nx
    y0 = (j + 1.0) / ny
    roots = []
    if len(x0):
        x, y, norm = _newton(F, x0, y0, p, params)
        ok = (norm <= params.tol) & (y > params.interior_margin) & (y < 1 - params.interior_margin)
        roots = sorted(zip(np.mod(x[ok], 1.0), y[ok], norm[ok]), key=lambda r: r[2])
    if not roots and "twist" in fmap.family:
        roots = _slice_roots(fmap, F, p, q, params, X, Dx)
        if roots:
            diagnostics.append("slice-bisection fallback")
    orbits: list = []
    for rx, ry, _ in roots:
        if any(_in_orbit(o[1], rx, ry, params.dedup_eps) for o in orbits):
            continue
        pts_x, pts_y = _orbit_points(fmap, rx, ry, q)
        flags = []
        if _is_non_isolated(F, rx, ry, params):
            flags.append("non-isolated")
        orbits.append(((pts_x, pts_y, flags), (pts_x, pts_y)))
    # continua: one class per connected level, keep only the first representative
    if orbits and all("non-isolated" in o[0][2] for o in orbits):
        orbits = orbits[:1]
        diagnostics.append("non-isolated continuum")
    result = [_make_orbit(fmap, p, q, ox, oy, params, fl) for (ox, oy, fl), _ in orbits]
    result = [o for o in result if o.residual <= params.tol]
    if not result:
        diagnostics.append("not-found")
    result.sort(key=lambda o: (o.period_q, o.translation_p, o.points[0].x, o.points[0].y))
    return OrbitList(result, diagnostics)


def _is_non_isolated(F, x, y, params):
    J = _fd_jacobian(F, np.array([x]), np.array([y]), params.fd_step)[0] - np.eye(2)
    sv = np.linalg.svd(J, compute_uv=False)
    return sv[-1] <= params.singular_tol * max(1.0, sv[0])


def _polish(F, x, y, p, params):
    x, y, _ = _newton(F, x, y, p, params)
    return x, y


def _make_orbit(fmap, p, q, xs, ys, params, flags) -> PeriodicOrbit:
    F = _power_lift(fmap, q)
    # polish every orbit point separately, then measure the residual on each
    px, py = _polish(F, np.asarray(xs, float), np.asarray(ys, float), p, params)
    a, b = F(px, py)
    residual = float(np.max(np.hypot(a - px - p, b - py)))
    k = int(np.argmin(np.mod(px, 1.0)))
    order = [(k + s) % q for s in range(q)]
    points = [AnnulusPoint(px[s], py[s]) for s in order]
    interior = bool(np.all((py > params.interior_margin) & (py < 1 - params.interior_margin)))
    orbit = PeriodicOrbit(q, p, points, residual, q, interior, list(flags))
    orbit.prime_period = classify_prime_period(orbit, fmap, params.dedup_eps)
    return orbit


def classify_prime_period(orbit: PeriodicOrbit, fmap: LiftedAnnulusMap, dedup_eps: float = 1e-7) -> int:
    """Smallest divisor l of q with f^l(z) = z (up to dedup_eps).

    A return distance in the grey zone (dedup_eps, 100 dedup_eps] makes the
    answer ambiguous; the orbit is flagged "ambiguous" and censuses skip it.
    """
    q = orbit.period_q
    z = orbit.points[0]
    xs, ys = fmap.orbit(np.float64(z.x), np.float64(z.y), q)
    dist = annulus_distance(np.mod(xs, 1.0), ys, z.x, z.y)
    for l in (d for d in range(1, q + 1) if q % d == 0):
        if dist[l] <= dedup_eps:
            if any(dedup_eps < dist[m] <= 100 * dedup_eps for m in range(1, l)):
                if "ambiguous" not in orbit.flags:
                    orbit.flags.append("ambiguous")
            return l
    if "ambiguous" not in orbit.flags:
        orbit.flags.append("ambiguous")
    return q


def refile(orbit: PeriodicOrbit, fmap: LiftedAnnulusMap, dedup_eps: float = 1e-7) -> PeriodicOrbit:
    """Re-file an orbit under its prime period: (p, q) -> (p l / q, l)."""
    l = classify_prime_period(orbit, fmap, dedup_eps)
    orbit.prime_period = l
    if l == orbit.period_q:
        return orbit
    if (orbit.translation_p * l) % orbit.period_q:
        raise ValueError("prime period incompatible with the lift translation")
    p = orbit.translation_p * l // orbit.period_q
    xs, ys = orbit.xy()
    keep = []
    for k in range(len(xs)):
        if not any(annulus_distance(xs[k], ys[k], xs[m], ys[m]) <= dedup_eps for m in keep):
            keep.append(k)
    pts = [orbit.points[k] for k in keep[:l]]
    return PeriodicOrbit(l, p, pts, orbit.residual, l, orbit.interior, list(orbit.flags))


def iterate_orbit(orbit: PeriodicOrbit, k: int) -> PeriodicOrbit:
    """The same orbit presented as a (k p, k q) orbit: its points repeated k times."""
    return PeriodicOrbit(k * orbit.period_q, k * orbit.translation_p, orbit.points * k, orbit.residual,
                         k * orbit.period_q, orbit.interior, list(orbit.flags))


def _slice_roots(fmap, F, p, q, params, X, Dx):
    """Fallback for twist-like maps: follow the curve Dx = 0 column by column
    (bisection in y), then bisect Dy along that curve."""
    nx = X.shape[1]
    xs = X[0]
    ny = Dx.shape[0]
    ycol = (np.arange(ny) + 0.5) / ny
    curve_y = np.full(nx, np.nan)
    for i in range(nx):
        col = Dx[:, i]
        k = np.nonzero(np.sign(col[:-1]) * np.sign(col[1:]) <= 0)[0]
        if not len(k):
            continue
        lo, hi = ycol[k[0]], ycol[k[0] + 1]
        flo = col[k[0]]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fm = F(np.array([xs[i]]), np.array([mid]))[0][0] - xs[i] - p
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        curve_y[i] = 0.5 * (lo + hi)
    valid = ~np.isnan(curve_y)
    if not valid.any():
        return []
    dy = np.full(nx, np.nan)
    a, b = F(xs[valid], curve_y[valid])
    dy[valid] = b - curve_y[valid]
    starts = [i for i in range(nx) if valid[i] and valid[(i + 1) % nx] and dy[i] * dy[(i + 1) % nx] <= 0]
    if not starts:
        return []
    sx = np.array([xs[i] + 0.5 / nx for i in starts])
    sy = np.array([curve_y[i] for i in starts])
    x, y, norm = _newton(F, sx, sy, p, params)
    ok = (norm <= params.tol) & (y > params.interior_margin) & (y < 1 - params.interior_margin)
    return sorted(zip(np.mod(x[ok], 1.0), y[ok], norm[ok]), key=lambda r: r[2])


# ---------------------------------------------------------------------------
# censuses

@dataclass
class OrbitCensus:
    window: FractionWindow
    q_max: int
    n0: Optional[int]
    orbits: dict
    N_eq: dict
    N_le: dict
    N_le_coprime: dict
    dedup_eps: float
    incomplete: list = field(default_factory=list)
    source: str = "numerical"
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.incomplete

    def fraction_bound_violations(self) -> list:
        """n with N_eq(n) < phi(n; window)."""
        return [n for n in range(1, self.q_max + 1) if self.N_eq[n] < phi_window(n, self.window)]

    def all_orbits(self):
        for key in sorted(self.orbits, key=lambda f: (f[1], f[0])):
            yield from self.orbits[key]

    def rows(self):
        return [(n, self.N_eq[n], self.N_le[n], self.N_le_coprime[n]) for n in range(1, self.q_max + 1)]

    def growth_counts(self) -> dict:
        """N_le with continua left out (raw counts are infinite for them)."""
        if self.source != "numerical":
            return dict(self.N_le)
        eq = {n: 0 for n in range(1, self.q_max + 1)}
        for o in self.all_orbits():
            if o.countable and not o.non_isolated:
                eq[o.prime_period] += 1
        out, running = {}, 0
        for n in range(1, self.q_max + 1):
            running += eq[n]
            out[n] = running
        return out


def _tally(orbits_by_fraction, q_max, n0):
    eq = {n: 0 for n in range(1, q_max + 1)}
    eq_cop = {n: 0 for n in range(1, q_max + 1)}
    for orbits in orbits_by_fraction.values():
        for o in orbits:
            if not o.countable:
                continue
            eq[o.prime_period] += 1
            if n0 is None or o.prime_period % n0:
                eq_cop[o.prime_period] += 1
    le, le_cop = {}, {}
    a = b = 0
    for n in range(1, q_max + 1):
        a += eq[n]
        b += eq_cop[n]
        le[n], le_cop[n] = a, b
    return eq, le, le_cop


def fractions_in_window(window: FractionWindow, q_max: int):
    out = []
    for q in range(1, q_max + 1):
        lo = math.floor(window.rho_minus * q)
        hi = math.ceil(window.rho_plus * q)
        for p in range(lo, hi + 1):
            if math.gcd(p, q) == 1 and window.contains(Fraction(p, q)):
                out.append((p, q))
    return out


def census(fmap: LiftedAnnulusMap, q_max: int, n0: Optional[int] = None, params: Optional[SolverParams] = None,
           threads: Optional[int] = None) -> OrbitCensus:
    """Search every irreducible p/q in the boundary window with q <= q_max."""
    params = params or SolverParams()
    if n0 is not None and not is_prime(n0):
        raise ValueError(f"n0 = {n0} is not prime")
    br = boundary_rotation_numbers(fmap)
    if br.degenerate:
        raise ValueError("census needs a non-degenerate rotation window")
    window = br.window
    fractions = fractions_in_window(window, q_max)
    stack = IterateStack(fmap, params.grid)
    stack[q_max]  # build the shared iterates up front, then the fractions only read them
    threads = threads or int(os.environ.get("GROWTHLAB_THREADS", "1"))

    def run(pq):
        p, q = pq
        res = find_orbits(fmap, p, q, params=params, stack=stack, window=window)
        if not res and params.retry_doubled_grid:
            g = (2 * params.grid[0], 2 * params.grid[1])
            log.info("no orbit for %d/%d on %s grid, retrying on %s", p, q, params.grid, g)
            retry = find_orbits(fmap, p, q, params=params.with_(grid=g), window=window)
            retry.diagnostics = res.diagnostics + ["grid doubled"] + retry.diagnostics
            res = retry
        return pq, res

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, fractions))
    else:
        results = [run(f) for f in fractions]
    orbits, diagnostics, incomplete = {}, {}, []
    for (p, q), res in sorted(results, key=lambda r: (r[0][1], r[0][0])):
        orbits[(p, q)] = list(res)
        diagnostics[(p, q)] = list(res.diagnostics)
        if not any(o.countable for o in res):
            incomplete.append((p, q))
    eq, le, le_cop = _tally(orbits, q_max, n0)
    return OrbitCensus(window, q_max, n0, orbits, eq, le, le_cop, params.dedup_eps, incomplete, "numerical",
                       params.as_dict(), diagnostics)


def fraction_class_census(window: FractionWindow, q_max: int, n0: Optional[int] = None) -> OrbitCensus:
    """Exact census of an integrable twist counted by fraction classes.

    Every irreducible p/q in the window contributes one invariant circle of
    q-periodic points, so N_eq(n) = phi(n; window) and N_le = Phi.
    """
    eq = {n: phi_window(n, window) for n in range(1, q_max + 1)}
    le = {n: cumulative_Phi(n, window) for n in range(1, q_max + 1)}
    le_cop, running = {}, 0
    for n in range(1, q_max + 1):
        if n0 is None or n % n0:
            running += eq[n]
        le_cop[n] = running
    return OrbitCensus(window, q_max, n0, {}, eq, le, le_cop, 0.0, [], "fraction-classes")


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    prefactor: float
    c_liminf: float
    fit_range: tuple

    def as_dict(self):
        return {"exponent": self.exponent, "prefactor": self.prefactor, "c_liminf": self.c_liminf,
                "fit_range": list(self.fit_range)}


def fit_power_law(ns, counts, n_min: int, n_max: int) -> GrowthFit:
    ns = np.asarray(ns, float)
    counts = np.asarray(counts, float)
    sel = (ns >= n_min) & (ns <= n_max) & (counts > 0)
    if sel.sum() < 2:
        raise ValueError("need at least two positive counts in the fit range")
    slope, intercept = np.polyfit(np.log(ns[sel]), np.log(counts[sel]), 1)
    liminf = float(np.min(counts[(ns >= n_min) & (ns <= n_max)] / ns[(ns >= n_min) & (ns <= n_max)] ** 2))
    return GrowthFit(float(slope), float(math.exp(intercept)), max(liminf, 0.0), (n_min, n_max))


def growth_fit(c: OrbitCensus, n_min: int) -> GrowthFit:
    """Least-squares exponent of N_le(n) on log-log axes over [n_min, q_max]."""
    if not c.complete:
        raise ValueError(f"census incomplete: {c.incomplete}")
    if c.q_max < 2 * n_min:
        raise ValueError("growth fit needs q_max >= 2 n_min")
    counts = c.growth_counts()
    ns = list(range(1, c.q_max + 1))
    return fit_power_law(ns, [counts[n] for n in ns], n_min, c.q_max)
