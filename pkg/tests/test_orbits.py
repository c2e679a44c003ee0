from fractions import Fraction

import numpy as np
import pytest

from growthlab.annulus import LinearOmega, default_perturbed_twist, make_integrable_twist, make_rigid_rotation
from growthlab.config import SolverParams
from growthlab.numtheory import FractionWindow, cumulative_Phi, phi_window
from growthlab.orbits import (IterateStack, census, classify_prime_period, find_orbits, fit_power_law,
                              fraction_class_census, fractions_in_window, growth_fit, iterate_orbit)

WINDOW = FractionWindow(Fraction(-3, 10), Fraction(2, 5))


@pytest.fixture(scope="module")
def fmap():
    return default_perturbed_twist()


@pytest.fixture(scope="module")
def stack(fmap):
    return IterateStack(fmap, SolverParams().grid)


def lifted_residual(fmap, orbit):
    """|F^q(z) - z - p| recomputed by plain iteration of the lift."""
    x, y = orbit.xy()
    xq, yq = fmap.iterate(x, y, orbit.period_q)
    return float(max(np.max(np.abs(xq - x - orbit.translation_p)), np.max(np.abs(yq - y))))


@pytest.mark.parametrize("p,q", [(0, 1), (1, 3), (-1, 4), (2, 7), (3, 8)])
def test_found_orbits_are_periodic(fmap, stack, p, q):
    orbits = find_orbits(fmap, p, q, stack=stack)
    good = [o for o in orbits if o.countable]
    assert good, orbits.diagnostics
    for o in good:
        assert o.residual < 1e-10
        assert lifted_residual(fmap, o) < 1e-9
        assert o.prime_period == q
        assert all(0 < pt.y < 1 for pt in o.points)


def test_poincare_birkhoff_pairs(fmap, stack):
    # an area-preserving twist has at least two orbits per fraction in the window
    for p, q in fractions_in_window(WINDOW, 6):
        assert len([o for o in find_orbits(fmap, p, q, stack=stack) if o.countable]) >= 2


def test_fraction_outside_window_is_flagged(fmap, stack):
    orbits = find_orbits(fmap, 1, 2, stack=stack)
    assert "outside-window" in orbits.diagnostics
    assert not [o for o in orbits if o.countable]


def test_reducible_fraction_rejected(fmap):
    with pytest.raises(ValueError):
        find_orbits(fmap, 2, 4)


def test_rigid_rotation_gives_continuum():
    orbits = find_orbits(make_rigid_rotation(Fraction(1, 3)), 1, 3, grid=(32, 32))
    assert len(orbits) == 1 and orbits[0].non_isolated


def test_integrable_twist_gives_continuum():
    omega = LinearOmega(Fraction(-3, 10), Fraction(2, 5))
    orbits = find_orbits(make_integrable_twist(omega), 1, 5, grid=(64, 64))
    assert orbits and all(o.non_isolated for o in orbits)
    assert orbits[0].points[0].y == pytest.approx(5 / 7, abs=1e-9)   # omega(5/7) = 1/5
    assert omega.inverse(0.2) == pytest.approx(5 / 7)


def test_iterating_an_orbit_reclassifies_period(fmap, stack):
    o = [o for o in find_orbits(fmap, 1, 3, stack=stack) if o.countable][0]
    doubled = iterate_orbit(o, 2)
    assert doubled.period_q == 6 and doubled.translation_p == 2
    assert classify_prime_period(doubled, fmap) == 3


def test_fractions_in_window_counts():
    fr = fractions_in_window(WINDOW, 20)
    assert len(fr) == cumulative_Phi(20, WINDOW)
    assert all(WINDOW.contains(Fraction(p, q)) for p, q in fr)


def test_fraction_class_census_is_exact():
    c = fraction_class_census(WINDOW, 40, n0=3)
    assert all(c.N_eq[n] == phi_window(n, WINDOW) for n in range(1, 41))
    assert c.N_le[40] == cumulative_Phi(40, WINDOW)
    assert c.N_le_coprime[40] == sum(phi_window(n, WINDOW) for n in range(1, 41) if n % 3)


def test_exact_growth_exponent_near_two():
    fit = growth_fit(fraction_class_census(WINDOW, 64), 16)
    assert 1.9 <= fit.exponent <= 2.1


def test_power_law_fit_recovers_exponent():
    ns = np.arange(1, 50)
    fit = fit_power_law(ns, 3.0 * ns ** 1.5, 2, 49)
    assert fit.exponent == pytest.approx(1.5) and fit.prefactor == pytest.approx(3.0)


@pytest.mark.slow
def test_census_matches_golden(fmap):
    from pathlib import Path
    from growthlab.reporting import GoldenTable, diff_golden
    c = census(fmap, 8)
    table = GoldenTable(["n", "N_eq", "N_le", "N_le_coprime"], [[str(v) for v in r] for r in c.rows()])
    golden = GoldenTable.load(Path(__file__).parent / "data" / "census_perturbed_q8.csv")
    assert diff_golden(table, golden).clean
    assert not c.fraction_bound_violations()
