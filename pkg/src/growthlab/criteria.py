"""The fourteen acceptance checks as plain functions.

Each returns a :class:`CriterionOutcome` holding the measured quantities and
the thresholds they were held to.  The CLI runs them through ``--check`` and
the acceptance tests assert on the same measurements.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from .annulus import (LinearOmega, boundary_rotation_numbers, default_perturbed_twist, make_integrable_twist,
                      make_rigid_rotation, rotation_number)
from .annulus import LiftPoint
from .config import GeodesicParams, SolverParams
from .numtheory import (CONSTANTS, FractionWindow, cumulative_Phi, cumulative_Psi, liminf_envelope,
                        phi_window_table, prime_period_of_power, psi_bounds, rotation_model_prime_periods,
                        totients_upto)
from .orbits import census, fraction_class_census, fractions_in_window, growth_fit
from .reporting import CriterionOutcome
from .so3 import property_battery

DEFAULT_WINDOW = FractionWindow(Fraction(-3, 10), Fraction(2, 5))
CONSERVATION_AXES = (1.0, 1.05, 1.1)
CENSUS_AXES = (1.0, 1.2, 2.0)
CENSUS_CONFORMAL = "# u = 0.02 x^4 - 0.01 y^4 z^4\n2 0 0 0.02\n0 2 2 -0.01\n"


# ---------------------------------------------------------------------------
# counting

def totient_asymptotics() -> CriterionOutcome:
    w = FractionWindow(Fraction(0), Fraction(1))
    ratios = {n: cumulative_Phi(n, w) * math.pi ** 2 / (3 * n * n) for n in (10 ** 3, 10 ** 4, 10 ** 5)}
    devs = [abs(r - 1) for r in ratios.values()]
    ok = 0.98 <= ratios[10 ** 5] <= 1.02 and devs[0] > devs[1] > devs[2]
    return CriterionOutcome(1, "totient asymptotics", ok,
                            {f"ratio_{n}": r for n, r in ratios.items()},
                            {"ratio_1e5": [0.98, 1.02], "deviation": "strictly decreasing"})


def random_rational_windows(n: int, seed: int, min_width: float = 0.05):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        a, b = (Fraction(int(rng.integers(-100, 101)), int(rng.integers(1, 101))) for _ in range(2))
        lo, hi = min(a, b), max(a, b)
        if hi - lo >= min_width:
            out.append(FractionWindow(lo, hi))
    return out


def window_scaling(seed: int = 2) -> CriterionOutcome:
    n = 10 ** 4
    worst = 0.0
    for w in random_rational_windows(50, seed):
        r = cumulative_Phi(n, w) * math.pi ** 2 / (3 * float(w.width) * n * n)
        worst = max(worst, abs(r - 1))
    return CriterionOutcome(2, "window scaling", worst <= 0.05, {"max_relative_error": worst, "windows": 50},
                            {"max_relative_error": 0.05})


def psi_bound_check() -> CriterionOutcome:
    w = FractionWindow(Fraction(0), Fraction(1))
    n = 10 ** 5
    measured, ok = {}, True
    for n0 in (2, 3):
        lo, hi = psi_bounds(w, n0)
        v = cumulative_Psi(n, w, n0) / n ** 2
        measured[f"psi_ratio_n0_{n0}"] = v
        measured[f"band_n0_{n0}"] = [lo - 0.01, hi + 0.01]
        ok &= lo - 0.01 <= v <= hi + 0.01
    return CriterionOutcome(3, "coprime-filtered bounds", bool(ok), measured,
                            {"band": "[C1 - 0.01, C2 + 0.01]"})


def liminf_check() -> CriterionOutcome:
    env = liminf_envelope(10 ** 6, 100)
    n_at, m = env.minimum
    return CriterionOutcome(4, "liminf envelope", 0.45 <= m <= 0.57,
                            {"minimum": m, "argmin": n_at, "e^-gamma": CONSTANTS.e_neg_gamma},
                            {"minimum": [0.45, 0.57]},
                            "the minimum over this range sits at the primorial 210")


def _omega_table(n: int) -> np.ndarray:
    om = np.zeros(n + 1, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, n + 1):
        if sieve[p]:
            sieve[p * p::p] = False
            om[p::p] += 1
    return om


def inclusion_exclusion_check(seed: int = 5) -> CriterionOutcome:
    n = 10 ** 4
    phi = totients_upto(n).astype(np.int64)[1:]
    bound = 2 ** _omega_table(n)[1:]
    violations = 0
    worst = 0.0
    for w in random_rational_windows(50, seed, min_width=0.0):
        a, b = w.width.numerator, w.width.denominator
        pw = phi_window_table(n, w)[1:].astype(np.int64)
        eps_b = np.abs(pw * b - a * phi)  # |eps| * b, exact
        violations += int(np.sum(eps_b > bound * b))
        worst = max(worst, float(np.max(eps_b / (bound * b))))
    return CriterionOutcome(5, "inclusion-exclusion bound", violations == 0,
                            {"violations": violations, "max_eps_over_bound": worst}, {"violations": 0})


def lemma34_oracle() -> CriterionOutcome:
    bad = [(n, k) for n in range(1, 31) for k in range(2, 13)
           if rotation_model_prime_periods(n, k) != {prime_period_of_power(n, k)}]
    return CriterionOutcome(9, "prime period of powers", not bad, {"mismatches": len(bad), "cases": 30 * 11},
                            {"mismatches": 0})


# ---------------------------------------------------------------------------
# annulus maps

def rotation_properties(seed: int = 6, pairs: int = 20) -> CriterionOutcome:
    """Deck-shift and power identities on random (family, seed) pairs.

    The identities are checked where the estimate converges: a seed whose
    orbit is flagged chaotic by the shadow test is redrawn and counted.
    """
    rng = np.random.default_rng(seed)
    perturbed = default_perturbed_twist()
    worst_shift = worst_power = 0.0
    failures, redrawn = [], 0
    for i in range(pairs):
        kind = ("rigid", "twist", "perturbed")[i % 3]
        if kind == "rigid":
            f = make_rigid_rotation(float(rng.uniform(-1, 1)))
        elif kind == "twist":
            a = float(rng.uniform(-0.5, 0.5))
            f = make_integrable_twist(LinearOmega(a, a + float(rng.uniform(0.1, 0.8))))
        else:
            f = perturbed
        while True:
            z = LiftPoint(float(rng.uniform(0, 1)), float(rng.uniform(0.05, 0.95)))
            base = rotation_number(f, z)
            if "chaotic" not in base.flags:
                break
            redrawn += 1
        k = int(rng.choice([-3, -2, -1, 1, 2, 3]))
        q = int(rng.choice([2, 3]))
        shift = rotation_number(f.deck_shifted(k), z)
        power = rotation_number(f.power(q), z, max_iter=4000)
        e_shift = abs(shift.value - base.value - k)
        e_power = abs(power.value - q * base.value)
        worst_shift = max(worst_shift, e_shift)
        worst_power = max(worst_power, e_power)
        if e_shift > shift.error_bound + base.error_bound + 1e-12 or \
                e_power > power.error_bound + q * base.error_bound + 1e-12:
            failures.append((kind, i))
    return CriterionOutcome(6, "rotation-number identities", not failures,
                            {"pairs": pairs, "failures": len(failures), "chaotic_redrawn": redrawn,
                             "max_shift_defect": worst_shift, "max_power_defect": worst_power},
                            {"defect": "within combined error bounds"})


def constructive_census(q_max: int = 8, params: SolverParams | None = None) -> tuple[CriterionOutcome, object]:
    t0 = time.time()
    fmap = default_perturbed_twist()
    window = boundary_rotation_numbers(fmap).window
    c = census(fmap, q_max, params=params)
    missing = []
    for p, q in fractions_in_window(DEFAULT_WINDOW, q_max):
        good = [o for o in c.orbits.get((p, q), []) if o.interior and o.residual < 1e-10 and o.countable]
        if not good:
            missing.append(f"{p}/{q}")
    violations = c.fraction_bound_violations()
    elapsed = time.time() - t0
    ok = (window.rho_minus == DEFAULT_WINDOW.rho_minus and window.rho_plus == DEFAULT_WINDOW.rho_plus
          and not missing and c.complete and not violations and elapsed < 600)
    return CriterionOutcome(7, "constructive periodic orbits", ok,
                            {"window": str(window), "fractions": len(fractions_in_window(DEFAULT_WINDOW, q_max)),
                             "missing": missing, "complete": c.complete, "bound_violations": violations,
                             "seconds": elapsed},
                            {"residual": 1e-10, "seconds": 600}), c


def growth_exponents(numerical=None) -> CriterionOutcome:
    exact = growth_fit(fraction_class_census(DEFAULT_WINDOW, 64), 16)
    if numerical is None:
        numerical = census(default_perturbed_twist(), 12)
    fit = growth_fit(numerical, 3)
    ok = 1.9 <= exact.exponent <= 2.1 and 1.7 <= fit.exponent <= 2.3 and fit.c_liminf > 0
    return CriterionOutcome(8, "growth exponents", ok,
                            {"exact_exponent": exact.exponent, "numerical_exponent": fit.exponent,
                             "numerical_c_liminf": fit.c_liminf},
                            {"exact": [1.9, 2.1], "numerical": [1.7, 2.3], "c_liminf": "> 0"})


# ---------------------------------------------------------------------------
# geodesics

def _section(axes, conformal: str = "", params: GeodesicParams | None = None):
    from .geodesics import BirkhoffSection, EllipsoidMetric, EvenPolynomial
    return BirkhoffSection(EllipsoidMetric(axes, EvenPolynomial.parse(conformal)), params)


def geodesic_conservation(axes=CONSERVATION_AXES, seed: int = 10, conformal: str = "") -> CriterionOutcome:
    from .geodesics import TangentState, antipodal_pushforward, geodesic_flow
    sec = _section(axes, conformal)
    rng = np.random.default_rng(seed)
    s = rng.uniform(0, sec.delta, 1000)
    th = rng.uniform(0, np.pi, 1000)
    th = np.clip(th, 1e-6, np.pi - 1e-6)
    drift = float(sec.half_return(s, th).energy_drift.max())
    q, v = sec.metric.random_unit_states(100, rng)
    flow_eq = 0.0
    for i in range(100):
        X = TangentState(q[i], v[i])
        t = float(rng.uniform(0, 5))
        a = antipodal_pushforward(geodesic_flow(sec.metric, X, t))
        b = geodesic_flow(sec.metric, antipodal_pushforward(X), t)
        flow_eq = max(flow_eq, float(np.max(np.abs(a.as_array() - b.as_array()))))
    q, v = sec.curve.to_state(s[:100], th[:100])
    e1 = sec.psi_states(q, v)
    e2 = sec.psi_states(-q, -v)
    psi_eq = float(max(np.max(np.abs(e1[0] + e2[0])), np.max(np.abs(e1[1] + e2[1]))))
    ok = drift <= 1e-9 and flow_eq <= 1e-8 and psi_eq <= 1e-8
    return CriterionOutcome(10, "geodesic conservation and symmetry", ok,
                            {"max_energy_drift": drift, "flow_equivariance": flow_eq, "psi_equivariance": psi_eq},
                            {"energy_drift": 1e-9, "flow_equivariance": 1e-8, "psi_equivariance": 1e-8})


def section_validity(axes=CONSERVATION_AXES, seed: int = 11, samples: int = 1_000_000,
                     conformal: str = "") -> CriterionOutcome:
    from .geodesics.section import HalfReturnError, polygon_area_check, random_section_rectangles
    sec = _section(axes, conformal)
    band = sec.estimate_flight_band()
    rng = np.random.default_rng(seed)
    s = rng.uniform(0, sec.delta, 1000)
    th = np.clip(rng.uniform(0, np.pi, 1000), 1e-9, np.pi - 1e-9)
    try:
        tau = sec.half_return(s, th).flight_time
        returned = 1000
    except HalfReturnError as exc:
        tau, returned = np.array([np.inf]), 1000 - len(exc.indices)
    in_band = int(np.sum(band.contains(tau)))
    worst = 0.0
    for rect in random_section_rectangles(sec, 10, rng):
        chk = polygon_area_check(sec, rect, samples=samples, rng=rng)
        worst = max(worst, chk.relative_deviation)
    ok = returned == 1000 and in_band == 1000 and worst <= 0.01
    return CriterionOutcome(11, "section validity", ok,
                            {"returned": returned, "in_band": in_band, "t_lo": band.t_lo, "t_hi": band.t_hi,
                             "max_area_deviation": worst},
                            {"returned": 1000, "area_deviation": 0.01})


def conjugate_claim(axes=CONSERVATION_AXES, samples: int = 8, conformal: str = "") -> CriterionOutcome:
    sec = _section(axes, conformal)
    s0 = sec.delta * np.arange(samples) / samples
    worst = max(sec.claim_check(float(s)).deviation for s in s0)
    sphere = _section((1.0, 1.0, 1.0))
    sphere_dev = max(abs(sphere.first_conjugate_exact(float(s)) - math.pi) for s in s0)
    ok = worst <= 1e-6 and sphere_dev <= 1e-10
    return CriterionOutcome(12, "conjugate point at half period", ok,
                            {"max_deviation": worst, "half_period": sec.delta / 2,
                             "first_zero_s0_0": sec.first_conjugate_exact(0.0), "sphere_deviation": sphere_dev},
                            {"deviation": 1e-6, "sphere_deviation": 1e-10})


def odd_orbit_census(axes=CENSUS_AXES, conformal: str = CENSUS_CONFORMAL, q_max_odd: int = 9,
                     params: GeodesicParams | None = None):
    from .geodesics import geodesic_census
    t0 = time.time()
    sec = _section(axes, conformal, params)
    c = geodesic_census(sec, q_max_odd=q_max_odd)
    return census_outcome(c, time.time() - t0), c


def census_outcome(c, elapsed: float) -> CriterionOutcome:
    """Criterion 13 verdict for a finished geodesic census."""
    rows = c.counting_function()
    monotone = all(b[1] >= a[1] and b[0] >= a[0] for a, b in zip(rows, rows[1:]))
    worst = max([max(g.closure_rp2, g.closure_s2) for g in c.geodesics], default=math.inf)
    worst_psi = max([g.closure_rp2 for g in c.geodesics], default=math.inf)
    exponent = c.fit.exponent if c.fit else float("nan")
    ok = (not c.rejected and not c.incomplete and worst <= 1e-6 and worst_psi <= 1e-7 and monotone
          and c.fit is not None and exponent >= 1.5 and elapsed < 1800)
    return CriterionOutcome(13, "odd orbits as closed geodesics", ok,
                            {"geodesics": len(c.geodesics), "rejected": len(c.rejected), "max_closure": worst,
                             "exponent": exponent,
                             "exponent_full_range": c.fit_full_range.exponent if c.fit_full_range else float("nan"),
                             "monotone": monotone, "seconds": elapsed},
                            {"closure": 1e-6, "psi_closure": 1e-7, "exponent": ">= 1.5", "seconds": 1800})


def covering_battery(samples: int = 1000, seed: int = 0) -> CriterionOutcome:
    t0 = time.time()
    res = property_battery(samples, seed)
    elapsed = time.time() - t0
    checked = ["orthogonality", "determinant", "two_to_one", "homomorphism", "z4_equivariance"]
    ok = res["identity"] == 0.0 and all(res[k] <= 1e-12 for k in checked) and elapsed < 5
    return CriterionOutcome(14, "covering map battery", ok, dict(res, seconds=elapsed),
                            {"identity": 0.0, "residuals": 1e-12, "seconds": 5})
