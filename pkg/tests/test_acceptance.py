"""Acceptance criteria 1-14, one test each, thresholds stated literally."""

import time

import pytest

from growthlab import criteria as C


def test_criterion_01_totient_asymptotics(report):
    t0 = time.time()
    o = report(C.totient_asymptotics())
    r3, r4, r5 = (o.measured[f"ratio_{n}"] for n in (10 ** 3, 10 ** 4, 10 ** 5))
    assert 0.98 <= r5 <= 1.02
    assert abs(r3 - 1) > abs(r4 - 1) > abs(r5 - 1)
    assert time.time() - t0 < 10


def test_criterion_02_window_scaling(report):
    t0 = time.time()
    o = report(C.window_scaling())
    assert o.measured["windows"] == 50
    assert o.measured["max_relative_error"] <= 0.05
    assert time.time() - t0 < 30


def test_criterion_03_coprime_filtered_bounds(report):
    o = report(C.psi_bound_check())
    assert 0.142 <= o.measured["psi_ratio_n0_2"] <= 0.238
    lo, hi = o.measured["band_n0_3"]
    assert lo == pytest.approx(3 / 3.141592653589793 ** 2 * (1 - 1 / 3) - 0.01)
    assert hi == pytest.approx(3 / 3.141592653589793 ** 2 * (1 - 2 / 9) + 0.01)
    assert lo <= o.measured["psi_ratio_n0_3"] <= hi


def test_criterion_04_liminf_envelope(report):
    t0 = time.time()
    o = report(C.liminf_check())
    assert time.time() - t0 < 60
    assert 0.45 <= o.measured["minimum"] <= 0.57


def test_criterion_05_inclusion_exclusion(report):
    o = report(C.inclusion_exclusion_check())
    assert o.measured["violations"] == 0


def test_criterion_06_rotation_number_properties(report):
    o = report(C.rotation_properties())
    assert o.measured["pairs"] == 20
    assert o.measured["failures"] == 0


@pytest.mark.slow
def test_criterion_07_constructive_orbits(report):
    o, census = C.constructive_census(8)
    report(o)
    assert o.measured["window"] == "(-3/10, 2/5)"
    assert o.measured["missing"] == []
    assert o.measured["complete"] and o.measured["bound_violations"] == []
    assert o.measured["seconds"] < 600
    for orbits in census.orbits.values():
        assert all(x.residual < 1e-10 for x in orbits if x.countable)


@pytest.mark.slow
def test_criterion_08_growth_exponent(report):
    o = report(C.growth_exponents())
    assert 1.9 <= o.measured["exact_exponent"] <= 2.1
    assert 1.7 <= o.measured["numerical_exponent"] <= 2.3
    assert o.measured["numerical_c_liminf"] > 0


def test_criterion_09_prime_period_oracle(report):
    o = report(C.lemma34_oracle())
    assert o.measured["cases"] == 330
    assert o.measured["mismatches"] == 0


@pytest.mark.slow
def test_criterion_10_geodesic_conservation(report):
    o = report(C.geodesic_conservation())
    assert o.measured["max_energy_drift"] <= 1e-9
    assert o.measured["flow_equivariance"] <= 1e-8
    assert o.measured["psi_equivariance"] <= 1e-8


@pytest.mark.slow
def test_criterion_11_section_validity(report):
    o = report(C.section_validity())
    assert o.measured["returned"] == 1000
    assert o.measured["in_band"] == 1000
    assert o.measured["max_area_deviation"] <= 0.01


@pytest.mark.slow
def test_criterion_12_conjugate_point_claim(report):
    o = report(C.conjugate_claim())
    assert o.measured["sphere_deviation"] <= 1e-10
    assert o.measured["max_deviation"] <= 1e-6


@pytest.mark.slow
def test_criterion_13_odd_orbit_census(report):
    o, census = C.odd_orbit_census()
    report(o)
    assert o.measured["rejected"] == 0 and census.incomplete == []
    assert o.measured["max_closure"] <= 1e-6
    assert max(g.closure_rp2 for g in census.geodesics) <= 1e-7
    assert o.measured["monotone"]
    assert o.measured["exponent"] >= 1.5
    assert o.measured["seconds"] < 1800


def test_criterion_14_covering_battery(report):
    o = report(C.covering_battery())
    assert o.measured["identity"] == 0.0
    for key in ("orthogonality", "determinant", "two_to_one", "homomorphism", "z4_equivariance"):
        assert o.measured[key] <= 1e-12
    assert o.measured["seconds"] < 5
