"""Odd periodic orbits of f as non-contractible closed geodesics on RP^2.

If f^q(x) = x with q odd then psi^q(x) = h_*(x): the q half-return arcs from
x close up on RP^2 into a non-contractible geodesic, and doubling them gives a
closed geodesic on the sphere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..annulus import boundary_rotation_numbers
from ..config import GeodesicParams, SolverParams
from ..numtheory import FractionWindow
from ..orbits import IterateStack, PeriodicOrbit, find_orbits, fractions_in_window
from .flow import integrate
from .section import BirkhoffSection

log = logging.getLogger(__name__)


@dataclass
class ClosedGeodesic:
    orbit: PeriodicOrbit
    length: float                # on RP^2: q half-return arcs
    closure_rp2: float           # |psi^q(x) - h_*(x)|
    closure_s2: float            # |psi^{2q}(x) - x|
    flights: list
    start_q: np.ndarray
    start_v: np.ndarray
    signature: np.ndarray = field(repr=False, default=None)
    flags: list = field(default_factory=list)

    @property
    def period(self) -> int:
        return self.orbit.prime_period

    @property
    def closed(self) -> bool:
        return "non-closing" not in self.flags

    def as_dict(self) -> dict:
        return {"p": self.orbit.translation_p, "q": self.orbit.period_q, "length": self.length,
                "closure_rp2": self.closure_rp2, "closure_s2": self.closure_s2,
                "start": [[p.x, p.y] for p in self.orbit.points[:1]], "flags": list(self.flags)}


@dataclass
class GeodesicFit:
    exponent: float
    prefactor: float
    l_min: float
    l_fit_max: float
    points: int

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor, "l_min": self.l_min,
                "l_fit_max": self.l_fit_max, "points": self.points}


@dataclass
class GeodesicCensus:
    metric: dict
    delta: float
    window: FractionWindow
    q_max_odd: int
    l_max: float
    geodesics: list              # distinct closed geodesics, sorted by length
    rejected: list               # orbits whose reconstruction did not close
    duplicates: int
    incomplete: list
    flight_band: tuple
    l_complete: float            # every geodesic shorter than this has period <= q_max_odd
    fit: Optional[GeodesicFit]
    fit_full_range: Optional[GeodesicFit]
    params: dict
    diagnostics: dict

    @property
    def lengths(self) -> np.ndarray:
        return np.array([g.length for g in self.geodesics])

    def counting_function(self):
        """Rows (l, N(l)) of the step function, sampled at each length <= l_max."""
        ls = np.sort(self.lengths)
        ls = ls[ls <= self.l_max]
        return [(float(l), i + 1) for i, l in enumerate(ls)]

    def N(self, l: float) -> int:
        return int(np.sum(self.lengths <= l))


def _closure_error(q1, v1, q2, v2) -> float:
    return float(max(np.max(np.abs(q1 - q2)), np.max(np.abs(v1 - v2))))


def reconstruct(section: BirkhoffSection, orbit: PeriodicOrbit) -> ClosedGeodesic:
    """Concatenate half-return arcs from the first orbit point and check closure."""
    z = orbit.points[0]
    q, v = section.curve.to_state(np.array([z.x * section.delta]), np.array([z.y * np.pi]))
    q0, v0 = q.copy(), v.copy()
    flights = []
    n = orbit.prime_period
    for k in range(2 * n):
        q, v, tau = section.psi_states(q, v)
        flights.append(float(tau[0]))
        if k == n - 1:
            rp2 = _closure_error(q, v, -q0, -v0)
    s2 = _closure_error(q, v, q0, v0)
    g = ClosedGeodesic(orbit, float(sum(flights[:n])), rp2, s2, flights[:n], q0[0], v0[0])
    g.signature = _signature(section, orbit)
    return g


def _signature(section: BirkhoffSection, orbit: PeriodicOrbit) -> np.ndarray:
    """Crossings of the geodesic with the curve as (s mod delta, theta mod pi).

    Both the geodesic and its reverse produce the same set, so comparing
    signatures identifies a closed geodesic as an unoriented curve.
    """
    s = np.array([p.x for p in orbit.points]) * section.delta
    th = np.array([p.y for p in orbit.points]) * np.pi
    pts = np.concatenate([np.column_stack([s, th]), np.column_stack([s + 0.5 * section.delta, -th])])
    pts[:, 0] = np.mod(pts[:, 0], section.delta)
    pts[:, 1] = np.mod(pts[:, 1], np.pi)
    return pts[np.lexsort((pts[:, 1], pts[:, 0]))]


def _same_curve(a: np.ndarray, b: np.ndarray, delta: float, eps: float) -> bool:
    if a.shape != b.shape:
        return False
    for p in a:
        ds = np.abs(b[:, 0] - p[0])
        ds = np.minimum(ds, delta - ds)
        dt = np.abs(b[:, 1] - p[1])
        dt = np.minimum(dt, np.pi - dt)
        if np.min(np.maximum(ds, dt)) > eps:
            return False
    return True


def polyline(section: BirkhoffSection, geodesic: ClosedGeodesic, double: bool = True,
             points_per_unit: float = 20.0) -> np.ndarray:
    """xyz samples along the closed geodesic (its double on the sphere by default)."""
    y = np.concatenate([geodesic.start_q, geodesic.start_v])[None, :]
    flights = geodesic.flights * (2 if double else 1)
    rows = [y[0, :3]]
    for tau in flights:
        m = max(2, int(math.ceil(tau * points_per_unit)))
        for _ in range(m):
            y = integrate(section.metric, y, tau / m, section.params.step)
            rows.append(y[0, :3])
    return np.array(rows)


def fit_length_growth(lengths, l_min: float, l_max: float) -> Optional[GeodesicFit]:
    """Least squares fit of log N(l) = log C + e log l over the census lengths in [l_min, l_max]."""
    ls = np.sort(np.asarray(lengths, float))
    N = np.arange(1, len(ls) + 1)
    sel = (ls >= l_min) & (ls <= l_max)
    if sel.sum() < 3 or np.ptp(np.log(ls[sel])) == 0:
        return None
    e, c = np.polyfit(np.log(ls[sel]), np.log(N[sel]), 1)
    return GeodesicFit(float(e), float(math.exp(c)), float(l_min), float(l_max), int(sel.sum()))


def geodesic_census(section: BirkhoffSection, l_max: float = math.inf, q_max_odd: int = 9,
                    solver: Optional[SolverParams] = None, stack: Optional[IterateStack] = None) -> GeodesicCensus:
    p = section.params
    if q_max_odd < 1 or q_max_odd % 2 == 0:
        raise ValueError(f"q_max_odd must be a positive odd integer, got {q_max_odd}")
    solver = solver or SolverParams(grid=p.census_grid)
    fmap = section.annulus_map()
    section.lift_continuity()
    br = boundary_rotation_numbers(fmap, n=2000)
    if br.degenerate:
        raise ValueError("section map has a degenerate rotation window")
    window = br.window
    band = section.estimate_flight_band()
    stack = stack or IterateStack(fmap, solver.grid)
    fractions = [(a, b) for a, b in fractions_in_window(window, q_max_odd) if b % 2 == 1]
    found, rejected, incomplete, diagnostics = [], [], [], {}
    duplicates = 0
    for a, b in fractions:
        res = find_orbits(fmap, a, b, params=solver, stack=stack, window=window)
        diagnostics[f"{a}/{b}"] = list(res.diagnostics)
        if not any(o.countable for o in res):
            incomplete.append((a, b))
        for orbit in res:
            if not orbit.countable or orbit.prime_period % 2 == 0:
                continue
            g = reconstruct(section, orbit)
            if max(g.closure_rp2, g.closure_s2) > p.closure_tol:
                g.flags.append("non-closing")
                rejected.append(g)
                log.warning("orbit %d/%d does not close (%.2e)", a, b, max(g.closure_rp2, g.closure_s2))
                continue
            if any(_same_curve(g.signature, h.signature, section.delta, p.closure_tol) for h in found):
                duplicates += 1
                continue
            found.append(g)
    found.sort(key=lambda g: g.length)
    l_complete = (q_max_odd + 2) * band.t_lo
    fit_max = min(l_max, l_complete)
    lengths = [g.length for g in found]
    # the period-1 entries are the other principal ellipses, a fixed handful; the fit
    # starts where period fit_min_period geodesics can first appear
    fit = fit_length_growth(lengths, p.fit_min_period * band.t_lo, fit_max)
    full = fit_length_growth(lengths, min(lengths) if lengths else 0.0, fit_max)
    return GeodesicCensus(section.metric.describe(), section.delta, window, q_max_odd, l_max, found, rejected,
                          duplicates, incomplete, (band.t_lo, band.t_hi), l_complete, fit, full,
                          {"geodesic": p.as_dict(), "solver": solver.as_dict()}, diagnostics)
