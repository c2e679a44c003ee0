from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from growthlab.annulus import (BumpHamiltonian, LiftPoint, LinearOmega, UnsupportedOperation,
                               boundary_rotation_numbers, circle_rotation_number, default_perturbed_twist,
                               implicit_midpoint_flow, make_integrable_twist, make_perturbed_twist,
                               make_rigid_rotation, monte_carlo_area_check, random_rectangles, rotation_number,
                               rotation_numbers)


@pytest.fixture(scope="module")
def perturbed():
    return default_perturbed_twist()


def test_rigid_rotation_number_is_alpha():
    f = make_rigid_rotation(0.2371)
    est = rotation_number(f, LiftPoint(0.3, 0.5))
    assert abs(est.value - 0.2371) <= est.error_bound + 1e-15


def test_rational_rotation_is_detected_exactly():
    est = rotation_number(make_rigid_rotation(Fraction(2, 7)), LiftPoint(0.1, 0.4))
    assert est.exact_rational == (2, 7) and est.error_bound == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.05, 0.95), st.floats(0, 1))
def test_twist_rotation_is_omega_of_level(a, y, x):
    omega = LinearOmega(a, a + 0.6)
    est = rotation_number(make_integrable_twist(omega), LiftPoint(x, y), max_iter=2000)
    assert abs(est.value - float(omega(y))) <= est.error_bound + 1e-12


def test_deck_shift_and_power_identities(perturbed):
    z = LiftPoint(0.37, 0.42)
    base = rotation_number(perturbed, z, max_iter=3000)
    shifted = rotation_number(perturbed.deck_shifted(2), z, max_iter=3000)
    assert abs(shifted.value - base.value - 2) <= shifted.error_bound + base.error_bound
    squared = rotation_number(perturbed.power(2), z, max_iter=1500)
    assert abs(squared.value - 2 * base.value) <= squared.error_bound + 2 * base.error_bound


def test_lift_commutes_with_deck_translation(perturbed):
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 1, 200), rng.uniform(0, 1, 200)
    a = perturbed.lift_eval(x + 1, y)
    b = perturbed.lift_eval(x, y)
    assert np.max(np.abs(a[0] - b[0] - 1)) < 1e-12
    assert np.max(np.abs(a[1] - b[1])) < 1e-12


def test_boundary_circles_are_invariant(perturbed):
    x = np.linspace(0, 1, 50)
    for level in (0.0, 1.0):
        _, y = perturbed.lift_eval(x, np.full_like(x, level))
        assert np.all(y == level)


def test_boundary_rotation_of_default_map(perturbed):
    br = boundary_rotation_numbers(perturbed)
    assert not br.degenerate
    assert br.window.rho_minus == Fraction(-3, 10) and br.window.rho_plus == Fraction(2, 5)


def test_rigid_rotation_window_is_degenerate():
    br = boundary_rotation_numbers(make_rigid_rotation(0.25))
    assert br.degenerate
    with pytest.raises(ValueError):
        br.window


def test_inverse_round_trip(perturbed):
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 1, 500), rng.uniform(0, 1, 500)
    xi, yi = perturbed.inverse_lift(*perturbed.lift_eval(x, y))
    assert np.max(np.abs(xi - x)) < 1e-12 and np.max(np.abs(yi - y)) < 1e-12


def test_midpoint_flow_conserves_hamiltonian():
    H = BumpHamiltonian()
    rng = np.random.default_rng(2)
    x, y = rng.uniform(0, 1, 100), rng.uniform(0.1, 0.9, 100)
    x1, y1 = implicit_midpoint_flow(H, x, y, 1.0, 200)
    assert np.max(np.abs(H(x1, y1) - H(x, y))) < 1e-6


def test_area_preservation_monte_carlo(perturbed):
    rng = np.random.default_rng(3)
    for rect in random_rectangles(3, rng):
        chk = monte_carlo_area_check(perturbed, rect, samples=200_000, rng=rng)
        assert chk.within(4.0)


def test_non_area_preserving_map_is_caught():
    # y -> y^2 shrinks area near the bottom circle
    from growthlab.annulus import LiftedAnnulusMap
    f = LiftedAnnulusMap(lambda x, y: (x + 0.1, y ** 2), "squash", {}, True,
                         lambda x, y: (x - 0.1, np.sqrt(y)), False)
    chk = monte_carlo_area_check(f, (0.0, 0.3, 0.1, 0.3), samples=100_000)
    assert not chk.within(4.0)


def test_area_check_needs_inverse():
    from growthlab.annulus import LiftedAnnulusMap
    f = LiftedAnnulusMap(lambda x, y: (x, y), "no-inverse")
    with pytest.raises(UnsupportedOperation):
        monte_carlo_area_check(f, (0, 0.1, 0, 0.1), samples=10)


def test_circle_rotation_number_bound():
    rho, err = circle_rotation_number(lambda x: x + 0.3 + 0.05 * np.sin(2 * np.pi * x), 0.0, 5000)
    assert err == pytest.approx(1 / 5000)
    assert 0.28 < rho < 0.32


def test_vectorised_rotation_numbers_match_scalar():
    f = make_perturbed_twist(LinearOmega(-0.3, 0.4), BumpHamiltonian(), 0.05)
    xs, ys = np.array([0.1, 0.6]), np.array([0.3, 0.7])
    batch = rotation_numbers(f, xs, ys, 500)
    single = [rotation_number(f, LiftPoint(x, y), 500) for x, y in zip(xs, ys)]
    assert [b.value for b in batch] == [s.value for s in single]


FAMILIES = {
    "rigid": lambda: make_rigid_rotation(0.3),
    "twist": lambda: make_integrable_twist(LinearOmega(Fraction(-3, 10), Fraction(2, 5))),
    "perturbed": default_perturbed_twist,
}


def test_rigid_rotation_example_bound():
    est = rotation_number(make_rigid_rotation(0.3), LiftPoint(0.77, 0.1), max_iter=10_000, shadow=False)
    assert abs(est.value - 0.3) <= 2e-4


def test_twist_level_two_fifths_is_periodic():
    omega = LinearOmega(Fraction(-3, 10), Fraction(2, 5))
    est = rotation_number(make_integrable_twist(omega), LiftPoint(0.2, omega.inverse(0.4)))
    assert est.exact_rational == (2, 5) and est.value == 0.4


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_lift_equivariance_on_many_points(name):
    f = FAMILIES[name]()
    rng = np.random.default_rng(11)
    x, y = rng.uniform(-5, 5, 10_000), rng.uniform(0, 1, 10_000)
    a, b = f.lift_eval(x + 1, y), f.lift_eval(x, y)
    assert np.max(np.abs(a[0] - b[0] - 1)) <= 1e-12 and np.max(np.abs(a[1] - b[1])) <= 1e-12


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_area_preserved_on_twenty_rectangles(name):
    f = FAMILIES[name]()
    rng = np.random.default_rng(12)
    for rect in random_rectangles(20, rng):
        chk = monte_carlo_area_check(f, rect, samples=50_000, rng=rng)
        assert abs(chk.deviation) <= 3 * chk.standard_error + f.area_tolerance


def test_periodic_seeds_survive_conjugation():
    from growthlab.annulus import make_hamiltonian_flow_map
    omega = LinearOmega(Fraction(-3, 10), Fraction(2, 5))
    f = make_integrable_twist(omega)
    c = make_hamiltonian_flow_map(BumpHamiltonian(), t=0.5)
    g = f.conjugated_by(c)
    for r in (Fraction(0), Fraction(1, 3), Fraction(-1, 4)):
        z = (0.35, omega.inverse(r))
        cz = c.lift_eval(*z)
        plain = rotation_number(f, LiftPoint(*z), max_iter=200)
        conj = rotation_number(g, LiftPoint(float(cz[0]), float(cz[1])), max_iter=200)
        assert plain.exact_rational == conj.exact_rational == (r.numerator, r.denominator)


def test_chaotic_seed_is_flagged():
    f = default_perturbed_twist()
    est = rotation_number(f, LiftPoint(0.90923042622773, 0.7406999714511775))
    assert "chaotic" in est.flags
    regular = rotation_number(make_integrable_twist(LinearOmega(-0.3, 0.4)), LiftPoint(0.1, 0.123456))
    assert "chaotic" not in regular.flags


def test_deck_shift_identity_is_exact_for_regular_orbits():
    f = default_perturbed_twist()
    z = LiftPoint(0.8869644908266218, 0.4587221314275144)
    base = rotation_number(f, z)
    assert "chaotic" not in base.flags
    assert abs(rotation_number(f.deck_shifted(3), z).value - base.value - 3) < 1e-12
