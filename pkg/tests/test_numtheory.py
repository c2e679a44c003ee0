import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from growthlab.numtheory import (CONSTANTS, DomainError, FractionWindow, boundary_ambiguous, counting_report,
                                 cumulative_Phi, cumulative_Psi, euler_phi, inclusion_exclusion_error,
                                 is_prime, liminf_envelope, mobius_upto, omega, phi_window, phi_window_table,
                                 prime_factors, prime_period_of_power, psi_bounds, rotation_model_prime_periods,
                                 totients_upto)


def brute_phi_window(n, lo, hi):
    return sum(1 for m in range(math.floor(n * lo) - 1, math.ceil(n * hi) + 2)
               if lo < Fraction(m, n) < hi and math.gcd(m, n) == 1)


def brute_Phi(n, lo, hi):
    return sum(brute_phi_window(q, lo, hi) for q in range(1, n + 1))


def brute_mobius(n):
    f = prime_factors(n)
    return 0 if any(e > 1 for _, e in f) else (-1) ** len(f)


windows = st.tuples(st.fractions(-2, 2, max_denominator=30), st.fractions(-2, 2, max_denominator=30)).filter(
    lambda t: t[0] < t[1]).map(lambda t: FractionWindow(*t))


def test_totient_small_values():
    assert [euler_phi(n) for n in range(1, 13)] == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4, 10, 4]
    t = totients_upto(500)
    assert all(t[n] == sum(1 for m in range(1, n + 1) if math.gcd(m, n) == 1) for n in range(1, 501))


def test_mobius_matches_factorisation():
    mu = mobius_upto(2000)
    assert all(mu[n] == brute_mobius(n) for n in range(1, 2001))


def test_factorisation_and_primes():
    assert prime_factors(360) == [(2, 3), (3, 2), (5, 1)]
    assert omega(2 * 3 * 5 * 7 * 11) == 5
    assert [p for p in range(30) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_phi_window_examples():
    w = FractionWindow.parse("0,1")
    assert phi_window(7, w) == 6
    assert phi_window(1, w) == 0      # 0/1 and 1/1 are endpoints of an open window
    assert phi_window(10, FractionWindow.parse("-0.3,0.4")) == 3   # -1/10, 1/10, 3/10


@settings(max_examples=60, deadline=None)
@given(windows, st.integers(1, 60))
def test_phi_window_against_enumeration(w, n):
    assert phi_window(n, w) == brute_phi_window(n, w.rho_minus, w.rho_plus)


@settings(max_examples=30, deadline=None)
@given(windows, st.integers(1, 80))
def test_cumulative_Phi_against_double_loop(w, n):
    assert cumulative_Phi(n, w) == brute_Phi(n, w.rho_minus, w.rho_plus)
    table = phi_window_table(n, w)
    assert int(table[1:].sum()) == cumulative_Phi(n, w)


@settings(max_examples=30, deadline=None)
@given(windows, st.integers(1, 80), st.sampled_from([2, 3, 5, 7]))
def test_cumulative_Psi_drops_multiples_of_n0(w, n, n0):
    expected = sum(brute_phi_window(q, w.rho_minus, w.rho_plus) for q in range(1, n + 1) if q % n0)
    assert cumulative_Psi(n, w, n0) == expected


def test_Psi_rejects_composite_n0():
    with pytest.raises(DomainError):
        cumulative_Psi(10, FractionWindow.parse("0,1"), 4)


def test_window_translation_invariance():
    w = FractionWindow(Fraction(-1, 3), Fraction(2, 7))
    for k in (-2, 1, 3):
        assert cumulative_Phi(300, w.shifted(k)) == cumulative_Phi(300, w)


def test_empty_window_rejected():
    with pytest.raises(DomainError):
        FractionWindow(Fraction(1, 2), Fraction(1, 2))


def test_decimal_window_strings_are_exact():
    w = FractionWindow.parse("-0.3,0.4")
    assert w.exact and w.rho_minus == Fraction(-3, 10)
    assert boundary_ambiguous(10, w) == []


def test_float_endpoints_flag_ambiguous_numerators():
    w = FractionWindow(0.1 + 0.2, 0.7)   # 0.30000000000000004
    assert not w.exact
    assert boundary_ambiguous(10, w) == [3, 7]
    assert boundary_ambiguous(9, w) == []


@settings(max_examples=50, deadline=None)
@given(windows, st.integers(1, 3000))
def test_inclusion_exclusion_bound(w, n):
    res = inclusion_exclusion_error(n, w)
    assert abs(res.epsilon) <= 2 ** omega(n)


def test_totient_sum_asymptotics():
    w = FractionWindow.parse("0,1")
    devs = [abs(cumulative_Phi(n, w) * math.pi ** 2 / (3 * n * n) - 1) for n in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert devs[0] > devs[1] > devs[2] and devs[2] < 0.02


def test_psi_bounds_constants():
    lo, hi = psi_bounds(FractionWindow.parse("0,1"), 2)
    assert lo == pytest.approx(0.1520, abs=1e-4)
    assert hi == pytest.approx(0.2280, abs=1e-4)


def test_liminf_envelope_primorials():
    env = liminf_envelope(50_000)
    assert env.minimum[0] == 210
    assert np.all(np.diff(env.running_min) <= 0)
    assert dict(env.primorial_values)[2310] == pytest.approx(480 * math.log(math.log(2310)) / 2310)
    assert CONSTANTS.e_neg_gamma == pytest.approx(0.561459483566885)


def test_counting_report_rows():
    rep = counting_report(30, FractionWindow.parse("0,1"), n0=3)
    rows = list(rep.rows())
    assert len(rows) == 30
    assert rows[4] == (5, 4, 4, cumulative_Phi(5, rep.window), cumulative_Psi(5, rep.window, 3))
    assert rep.cumulative_Phi == cumulative_Phi(30, rep.window)


@pytest.mark.parametrize("n,k", [(1, 2), (3, 4), (5, 6), (30, 12), (7, 7)])
def test_prime_period_of_power_matches_rotation_oracle(n, k):
    assert rotation_model_prime_periods(n, k) == {prime_period_of_power(n, k)}
