import math

import numpy as np
import pytest
from scipy.special import ellipe

from growthlab.config import GeodesicParams
from growthlab.geodesics import (BirkhoffSection, ChartDomainError, EllipsoidMetric, EvenPolynomial, TangentState,
                                 antipodal_pushforward, geodesic_census, geodesic_flow, polygon_area_check,
                                 shortest_noncontractible)
from growthlab.geodesics.census import polyline
from growthlab.geodesics.flow import time_reversal_defect
from growthlab.geodesics.section import random_section_rectangles, sin_area

CONFORMAL = "2 0 0 0.02\n0 2 2 -0.01\n"


def perimeter(p, q):
    """Ellipse perimeter 4 max E(1 - min^2/max^2)."""
    lo, hi = sorted((p, q))
    return 4 * hi * ellipe(1 - (lo / hi) ** 2)


@pytest.fixture(scope="module")
def sphere():
    return BirkhoffSection(EllipsoidMetric((1.0, 1.0, 1.0)))


@pytest.fixture(scope="module")
def near_round():
    return BirkhoffSection(EllipsoidMetric((1.0, 1.05, 1.1)))


@pytest.fixture(scope="module")
def census_section():
    return BirkhoffSection(EllipsoidMetric((1.0, 1.2, 2.0), EvenPolynomial.parse(CONFORMAL)))


# metric --------------------------------------------------------------------

def test_polynomial_text_round_trip():
    p = EvenPolynomial.parse("# comment\n2 0 0 0.02\n0 2 2 -0.01\n")
    assert EvenPolynomial.parse(p.to_text()).terms == p.terms


def test_polynomial_rows_are_half_exponents():
    p = EvenPolynomial.parse("1 0 2 0.5\n")
    q = np.array([0.3, 0.9, -0.4])
    assert p.value(q) == pytest.approx(0.5 * 0.3 ** 2 * 0.4 ** 4)
    with pytest.raises(ValueError):
        EvenPolynomial.parse("-1 0 0 0.5\n")
    with pytest.raises(ValueError):
        EvenPolynomial.parse("1 0 0\n")


def test_polynomial_gradient_matches_finite_differences():
    p = EvenPolynomial.parse(CONFORMAL)
    q = np.array([0.3, -0.7, 0.4])
    h = 1e-6
    fd = np.array([(p.value(q + h * e) - p.value(q - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(p.grad(q), fd, atol=1e-9)


def test_compiled_acceleration_matches_numpy():
    m = EllipsoidMetric((1.0, 1.2, 2.0), EvenPolynomial.parse(CONFORMAL))
    q, v = m.random_unit_states(64, np.random.default_rng(0))
    assert np.max(np.abs(m.acceleration(q, v) - m._acceleration(q, v))) < 1e-13


def test_round_sphere_has_unit_curvature():
    m = EllipsoidMetric((1.0, 1.0, 1.0))
    q = m.sample_points(100, np.random.default_rng(1))
    assert np.allclose(m.curvature(q), 1.0)


def test_ellipsoid_curvature_formula():
    # K = 1 / (a^2 b^2 c^2 (x^2/a^4 + y^2/b^4 + z^2/c^4)^2)
    a, b, c = 1.0, 1.2, 2.0
    m = EllipsoidMetric((a, b, c))
    q = m.sample_points(50, np.random.default_rng(2))
    x, y, z = q.T
    K = 1 / (a * a * b * b * c * c * (x * x / a ** 4 + y * y / b ** 4 + z * z / c ** 4) ** 2)
    assert np.allclose(m.curvature(q), K, rtol=1e-10)


def test_bad_axes_rejected():
    with pytest.raises(ValueError):
        EllipsoidMetric((1.0, -1.0, 1.0))


# flow ----------------------------------------------------------------------

def test_great_circle_closed_form():
    m = EllipsoidMetric((1.0, 1.0, 1.0))
    out = geodesic_flow(m, TangentState(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])), math.pi / 2)
    assert np.allclose(out.q, [0, 1, 0], atol=1e-10)
    assert np.allclose(out.v, [-1, 0, 0], atol=1e-10)


def test_flow_conserves_energy_and_constraint():
    m = EllipsoidMetric((1.0, 1.2, 2.0), EvenPolynomial.parse(CONFORMAL))
    q, v = m.random_unit_states(20, np.random.default_rng(3))
    out = geodesic_flow(m, TangentState(q, v), 7.0)
    assert np.max(np.abs(m.energy(out.q, out.v) - m.energy(q, v))) < 1e-9
    assert np.max(np.abs(m.constraint(out.q))) < 1e-12


def test_flow_is_reversible_and_equivariant():
    m = EllipsoidMetric((1.0, 1.05, 1.1))
    q, v = m.random_unit_states(5, np.random.default_rng(4))
    X = TangentState(q, v)
    assert time_reversal_defect(m, X, 3.0) < 1e-8
    a = antipodal_pushforward(geodesic_flow(m, X, 2.5))
    b = geodesic_flow(m, antipodal_pushforward(X), 2.5)
    assert np.max(np.abs(a.as_array() - b.as_array())) <= 1e-8


def test_zero_velocity_rejected():
    m = EllipsoidMetric((1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        geodesic_flow(m, TangentState(np.array([1.0, 0, 0]), np.zeros(3)), 1.0)


# shortest loop -------------------------------------------------------------

def test_shortest_loop_is_the_ab_ellipse():
    m = EllipsoidMetric((1.0, 1.2, 2.0))
    loop = shortest_noncontractible(m)
    assert loop.plane == (0, 1)
    assert loop.length == pytest.approx(perimeter(1.0, 1.2), rel=1e-10)
    assert loop.discrete_length <= loop.length * (1 + 1e-3)


# section -------------------------------------------------------------------

def test_sphere_section_map_is_identity(sphere):
    assert sphere.delta == pytest.approx(2 * math.pi, rel=1e-12)
    s = np.linspace(0.1, 6.0, 7)
    th = np.linspace(0.2, 2.9, 7)
    r = sphere.half_return(s, th)
    assert np.allclose(r.flight_time, math.pi, atol=1e-10)
    assert np.max(np.abs(r.f_s - s)) < 1e-10 and np.max(np.abs(r.f_theta - th)) < 1e-10


def test_chart_round_trip(census_section):
    rng = np.random.default_rng(5)
    s = rng.uniform(0, census_section.delta, 50)
    th = rng.uniform(-3, 3, 50)
    q, v = census_section.curve.to_state(s, th)
    s2, th2 = census_section.curve.from_state(q, v)
    assert np.max(np.abs(s2 - s)) < 1e-10 and np.max(np.abs(th2 - th)) < 1e-12
    with pytest.raises(ChartDomainError):
        census_section.curve.from_state(q + np.array([0, 0, 0.1]), v)


def test_arclength_parametrisation(census_section):
    c = census_section.curve
    s = np.linspace(0, census_section.delta, 9)[:-1]
    ds = 1e-5
    speed = np.linalg.norm(c.point(s + ds) - c.point(s - ds), axis=-1) / (2 * ds)
    # unit speed for the conformal metric, measured in the embedding
    assert np.allclose(speed * census_section.metric.speed_factor(c.point(s)), 1.0, atol=1e-8)


def test_half_return_respects_antipodal_symmetry(census_section):
    rng = np.random.default_rng(6)
    q, v = census_section.curve.to_state(rng.uniform(0, census_section.delta, 20), rng.uniform(0.1, 3.0, 20))
    a = census_section.psi_states(q, v)
    b = census_section.psi_states(-q, -v)
    assert np.max(np.abs(a[0] + b[0])) <= 1e-12 and np.max(np.abs(a[2] - b[2])) <= 1e-12


def test_inverse_undoes_f(census_section):
    rng = np.random.default_rng(7)
    s, th = rng.uniform(0, census_section.delta, 30), rng.uniform(0.05, 3.1, 30)
    d, th1 = census_section.f_displacement(s, th)
    di, th0 = census_section.f_inverse_displacement(s + d, th1)
    assert np.max(np.abs(d + di)) < 1e-10 and np.max(np.abs(th0 - th)) < 1e-10


def test_boundary_extension_is_continuous(census_section):
    s = np.linspace(0, census_section.delta, 5)[:-1]
    for edge, inside in ((0.0, 1e-7), (math.pi, math.pi - 1e-7)):
        d0, _ = census_section.f_displacement(s, np.full_like(s, edge))
        d1, _ = census_section.f_displacement(s, np.full_like(s, inside))
        assert np.max(np.abs(d0 - d1)) < 1e-5


def test_reflection_extension(census_section):
    s = np.array([0.4, 2.0])
    d_plus, th_plus = census_section.f_displacement(s, np.array([0.3, 0.3]))
    d_minus, th_minus = census_section.f_displacement(s, np.array([-0.3, -0.3]))
    assert np.array_equal(d_plus, d_minus) and np.array_equal(th_plus, -th_minus)


def test_sphere_conjugate_point_is_pi(sphere):
    assert sphere.first_conjugate_exact(0.7) == pytest.approx(math.pi, abs=1e-10)
    assert sphere.claim_check(0.7).holds(1e-9)


def test_flight_band_covers_samples(near_round):
    band = near_round.estimate_flight_band(samples=300)
    rng = np.random.default_rng(8)
    tau = near_round.half_return(rng.uniform(0, near_round.delta, 100), rng.uniform(0.01, 3.13, 100)).flight_time
    assert np.all(band.contains(tau))


def test_sin_area_of_full_annulus(sphere):
    assert sin_area((0.0, sphere.delta, 0.0, math.pi)) == pytest.approx(2 * sphere.delta)


def test_polygon_area_is_preserved(census_section):
    rng = np.random.default_rng(9)
    for rect in random_section_rectangles(census_section, 2, rng):
        chk = polygon_area_check(census_section, rect, samples=100_000, rng=rng)
        assert chk.green_deviation < 1e-5
        assert chk.relative_deviation < 4 * chk.standard_error / chk.exact_area + 1e-3


def test_lift_continuity_guard(census_section):
    assert census_section.lift_continuity() < GeodesicParams().max_lift_displacement


# census --------------------------------------------------------------------

@pytest.mark.slow
def test_period_one_geodesics_are_principal_ellipses():
    """Without a conformal factor the fixed points of f are the (a,c) and (b,c) ellipses."""
    section = BirkhoffSection(EllipsoidMetric((1.0, 1.2, 2.0)))
    c = geodesic_census(section, q_max_odd=1)
    assert not c.rejected
    expected = sorted([perimeter(1.0, 2.0) / 2, perimeter(1.2, 2.0) / 2])
    assert np.allclose(sorted(c.lengths), expected, rtol=1e-8)
    g = c.geodesics[0]
    pts = polyline(section, g)
    assert np.max(np.abs(pts[0] - pts[-1])) < 1e-8
    assert c.duplicates >= 2   # each ellipse is found once per orientation
