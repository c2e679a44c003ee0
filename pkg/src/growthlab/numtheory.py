"""Exact counting of irreducible fractions inside real windows.

All counts are open-interval counts.  Rational window endpoints are handled
in exact integer arithmetic; float endpoints are treated as (possibly)
irrational numbers and any numerator landing within ``FLOAT_ENDPOINT_TOL``
of an endpoint is reported as boundary-ambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

Real = Union[int, Fraction, float]

FLOAT_ENDPOINT_TOL = 1e-12

# products of the first k primes, k = 1..9; the last one is the largest below 2**31
PRIMORIALS = (2, 6, 30, 210, 2310, 30030, 510510, 9699690, 223092870)


class DomainError(ValueError):
    pass


def _as_endpoint(value) -> Union[Fraction, float]:
    if isinstance(value, bool):
        raise TypeError("window endpoint cannot be a bool")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return _parse_rational(value)
    value = float(value)
    if not math.isfinite(value):
        raise DomainError("window endpoints must be finite")
    return value


def _parse_rational(text: str) -> Fraction:
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        raise DomainError(f"cannot parse {text!r} as a decimal or p/q rational") from None


@dataclass(frozen=True)
class FractionWindow:
    """Open interval (rho_minus, rho_plus) of rotation numbers."""

    rho_minus: Union[Fraction, float]
    rho_plus: Union[Fraction, float]

    def __post_init__(self):
        lo = _as_endpoint(self.rho_minus)
        hi = _as_endpoint(self.rho_plus)
        object.__setattr__(self, "rho_minus", lo)
        object.__setattr__(self, "rho_plus", hi)
        if not lo < hi:
            raise DomainError(f"empty window ({lo}, {hi})")

    @classmethod
    def parse(cls, text: str) -> "FractionWindow":
        """Parse ``"a,b"`` where a and b are decimals or p/q rationals (always exact)."""
        parts = text.split(",")
        if len(parts) != 2:
            raise DomainError(f"window must look like 'a,b', got {text!r}")
        return cls(_parse_rational(parts[0]), _parse_rational(parts[1]))

    @property
    def exact(self) -> bool:
        return isinstance(self.rho_minus, Fraction) and isinstance(self.rho_plus, Fraction)

    @property
    def width(self) -> Union[Fraction, float]:
        return self.rho_plus - self.rho_minus

    def shifted(self, k: int) -> "FractionWindow":
        return FractionWindow(self.rho_minus + k, self.rho_plus + k)

    def contains(self, x: Real) -> bool:
        return self.rho_minus < x < self.rho_plus

    def __str__(self):
        return f"({self.rho_minus}, {self.rho_plus})"


@dataclass(frozen=True)
class AsymptoticConstants:
    euler_gamma: float = 0.57721566490153286060651209008240243
    three_over_pi_sq: float = 3.0 / math.pi ** 2
    e_neg_gamma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "e_neg_gamma", math.exp(-self.euler_gamma))


CONSTANTS = AsymptoticConstants()


# ---------------------------------------------------------------------------
# sieves and factorisation

@lru_cache(maxsize=8)
def _spf_table(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, int(math.isqrt(limit)) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    idx = np.arange(limit + 1, dtype=np.int64)
    mask = spf == 0
    spf[mask] = idx[mask]
    return spf


def _spf(limit: int) -> np.ndarray:
    # round the cache key up so repeated calls with growing n share tables
    size = 1 << max(10, int(limit).bit_length())
    return _spf_table(size)


def prime_factors(n: int) -> list[tuple[int, int]]:
    """Prime factorisation of n as [(p, r), ...] in increasing p."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    out = []
    if n <= 1 << 22:
        spf = _spf(n)
        while n > 1:
            p = int(spf[n])
            r = 0
            while n % p == 0:
                n //= p
                r += 1
            out.append((p, r))
        return out
    d = 2
    while d * d <= n:
        if n % d == 0:
            r = 0
            while n % d == 0:
                n //= d
                r += 1
            out.append((d, r))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return prime_factors(n) == [(n, 1)]


def omega(n: int) -> int:
    """Number of distinct prime factors."""
    return len(prime_factors(n))


def euler_phi(n: int) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise DomainError("euler_phi needs an integer")
    n = int(n)
    if n < 1:
        raise DomainError("euler_phi is defined for n >= 1")
    result = 1
    for p, r in prime_factors(n):
        result *= p ** r - p ** (r - 1)
    return result


def totients_upto(n: int) -> np.ndarray:
    """Array t with t[k] = phi(k) for 1 <= k <= n (t[0] = 0)."""
    phi = np.arange(n + 1, dtype=np.int64)
    spf = _spf(n)[: n + 1]
    primes = np.nonzero(spf == np.arange(n + 1))[0]
    for p in primes[primes >= 2]:
        phi[p::p] -= phi[p::p] // p
    return phi


def mobius_upto(n: int) -> np.ndarray:
    mu = np.ones(n + 1, dtype=np.int64)
    mu[0] = 0
    spf = _spf(n)[: n + 1]
    primes = np.nonzero(spf == np.arange(n + 1))[0]
    for p in primes[primes >= 2]:
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def _squarefree_divisors(n: int) -> list[tuple[int, int]]:
    """(d, mu(d)) for all squarefree d dividing n."""
    out = [(1, 1)]
    for p, _ in prime_factors(n):
        out += [(d * p, -m) for d, m in out]
    return out


# ---------------------------------------------------------------------------
# integers strictly inside (m * lo, m * hi)

def _floor_frac(num: int, den: int) -> int:
    return num // den


def _ceil_frac(num: int, den: int) -> int:
    return -((-num) // den)


def _interior_count_exact(m: int, lo: Fraction, hi: Fraction) -> int:
    # #{k in Z : m*lo < k < m*hi}
    c = _ceil_frac(m * hi.numerator, hi.denominator) - 1 - _floor_frac(m * lo.numerator, lo.denominator)
    return max(c, 0)


def _near_integer(x: float) -> bool:
    return abs(x - round(x)) <= FLOAT_ENDPOINT_TOL


def _interior_count_float(m: int, lo: float, hi: float) -> int:
    # decide membership with the exact binary value of the endpoint
    flo, fhi = Fraction(lo), Fraction(hi)
    return _interior_count_exact(m, flo, fhi)


def _interior_counts(ms: np.ndarray, w: FractionWindow) -> np.ndarray:
    """Vectorised interior counts I(m) for an array of positive m."""
    lo, hi = w.rho_minus, w.rho_plus
    if w.exact and max(abs(lo.numerator), abs(hi.numerator), lo.denominator, hi.denominator) * int(ms.max(initial=1)) < 2 ** 62:
        up = -((-ms * hi.numerator) // hi.denominator) - 1
        down = (ms * lo.numerator) // lo.denominator
        return np.maximum(up - down, 0)
    if w.exact:
        return np.array([_interior_count_exact(int(m), lo, hi) for m in ms], dtype=np.int64)
    a = ms * float(lo)
    b = ms * float(hi)
    out = np.maximum(np.ceil(b) - 1 - np.floor(a), 0).astype(np.int64)
    risky = (np.abs(a - np.round(a)) <= 1e-6) | (np.abs(b - np.round(b)) <= 1e-6)
    for i in np.nonzero(risky)[0]:
        out[i] = _interior_count_float(int(ms[i]), float(lo), float(hi))
    return out


# ---------------------------------------------------------------------------
# the counting functions

def _check_n(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    return int(n)


def _coprime_in_interval(n: int, w: FractionWindow) -> int:
    # Moebius over squarefree divisors: count of m in (n lo, n hi) with gcd(m, n) = 1
    total = 0
    for d, mu in _squarefree_divisors(n):
        k = n // d
        if w.exact:
            total += mu * _interior_count_exact(k, w.rho_minus, w.rho_plus)
        else:
            total += mu * _interior_count_float(k, w.rho_minus, w.rho_plus)
    return total


def phi_window(n: int, w: FractionWindow) -> int:
    """#{m : n*rho_minus < m < n*rho_plus, gcd(m, n) = 1}."""
    n = _check_n(n)
    return _coprime_in_interval(n, w)


def boundary_ambiguous(n: int, w: FractionWindow) -> list[int]:
    """Numerators m coprime to n lying within the float tolerance of n*rho_minus or n*rho_plus.

    Always empty for exact windows.
    """
    n = _check_n(n)
    if w.exact:
        return []
    out = []
    for x in (n * float(w.rho_minus), n * float(w.rho_plus)):
        m = round(x)
        if _near_integer(x) and math.gcd(m, n) == 1:
            out.append(int(m))
    return out


def phi_window_table(n_max: int, w: FractionWindow) -> np.ndarray:
    """t[q] = phi_window(q, w) for 1 <= q <= n_max, via a Dirichlet convolution mu * I."""
    n_max = _check_n(n_max)
    interior = np.zeros(n_max + 1, dtype=np.int64)
    interior[1:] = _interior_counts(np.arange(1, n_max + 1, dtype=np.int64), w)
    mu = mobius_upto(n_max)
    out = np.zeros(n_max + 1, dtype=np.int64)
    for d in np.nonzero(mu)[0]:
        out[d::d] += mu[d] * interior[1 : n_max // d + 1]
    return out


def _prefix_interior(n: int, w: FractionWindow, skip: int = 0) -> np.ndarray:
    ms = np.arange(1, n + 1, dtype=np.int64)
    vals = _interior_counts(ms, w)
    if skip:
        vals[ms % skip == 0] = 0
    out = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(vals, out=out[1:])
    return out


def cumulative_Phi(n: int, w: FractionWindow) -> int:
    """Number of irreducible p/q in the window with q <= n."""
    n = _check_n(n)
    # sum_{q<=n} sum_{d|q} mu(d) I(q/d) = sum_d mu(d) S(n // d)
    S = _prefix_interior(n, w)
    mu = mobius_upto(n)
    d = np.nonzero(mu)[0]
    return int(np.sum(mu[d] * S[n // d]))


def cumulative_Psi(n: int, w: FractionWindow, n0: int) -> int:
    """Like cumulative_Phi but only denominators q with gcd(q, n0) = 1; n0 must be prime."""
    n = _check_n(n)
    if not is_prime(int(n0)):
        raise DomainError(f"n0 = {n0} is not prime")
    n0 = int(n0)
    S = _prefix_interior(n, w, skip=n0)
    mu = mobius_upto(n)
    d = np.nonzero(mu)[0]
    d = d[d % n0 != 0]
    return int(np.sum(mu[d] * S[n // d]))


def psi_bounds(w: FractionWindow, n0: int) -> tuple[float, float]:
    """Asymptotic liminf / limsup constants for Psi(n; w)/n^2 with prime n0."""
    c = float(w.width) * CONSTANTS.three_over_pi_sq
    return c * (1 - 1 / n0), c * (1 - (n0 - 1) / n0 ** 2)


@dataclass(frozen=True)
class InclusionExclusionError:
    epsilon: Union[Fraction, float]
    bound: int

    @property
    def holds(self) -> bool:
        return abs(self.epsilon) <= self.bound


def inclusion_exclusion_error(n: int, w: FractionWindow) -> InclusionExclusionError:
    """eps(n) = phi_window(n, w) - width * phi(n) together with the bound 2**omega(n)."""
    n = _check_n(n)
    eps = phi_window(n, w) - w.width * euler_phi(n)
    res = InclusionExclusionError(eps, 2 ** omega(n))
    if not res.holds:
        raise ArithmeticError(f"|eps({n})| = {abs(eps)} exceeds {res.bound} for window {w}")
    return res


@dataclass
class Envelope:
    n: np.ndarray
    values: np.ndarray
    running_min: np.ndarray
    primorial_values: list[tuple[int, float]]

    @property
    def minimum(self) -> tuple[int, float]:
        i = int(np.argmin(self.values))
        return int(self.n[i]), float(self.values[i])


def liminf_envelope(n_max: int, n_min: int = 100) -> Envelope:
    """phi(n) loglog(n) / n on n_min <= n <= n_max with its running minimum."""
    n_max = _check_n(n_max)
    if n_max < n_min:
        raise DomainError(f"n_max must be >= {n_min}")
    if n_min < 16:
        raise DomainError("loglog(n) must be comfortably positive; use n_min >= 16")
    phi = totients_upto(n_max)
    n = np.arange(n_min, n_max + 1)
    vals = phi[n_min:] * np.log(np.log(n)) / n
    prim = [(p, phi[p] * math.log(math.log(p)) / p) for p in PRIMORIALS if n_min <= p <= n_max]
    return Envelope(n, vals, np.minimum.accumulate(vals), prim)


@dataclass
class CountingReport:
    n_max: int
    window: FractionWindow
    n0: int | None
    n: np.ndarray
    phi: np.ndarray
    phi_window: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray | None
    ambiguous: dict = field(default_factory=dict)

    @property
    def cumulative_Phi(self) -> int:
        return int(self.Phi[-1])

    @property
    def cumulative_Psi(self) -> int | None:
        return None if self.Psi is None else int(self.Psi[-1])

    def rows(self):
        for i in range(len(self.n)):
            yield (int(self.n[i]), int(self.phi[i]), int(self.phi_window[i]), int(self.Phi[i]),
                   "" if self.Psi is None else int(self.Psi[i]))


def counting_report(n_max: int, w: FractionWindow, n0: int | None = None) -> CountingReport:
    n_max = _check_n(n_max)
    if n0 is not None and not is_prime(int(n0)):
        raise DomainError(f"n0 = {n0} is not prime")
    phi = totients_upto(n_max)[1:]
    pw = phi_window_table(n_max, w)[1:]
    n = np.arange(1, n_max + 1)
    Phi = np.cumsum(pw)
    Psi = None if n0 is None else np.cumsum(np.where(n % n0 == 0, 0, pw))
    amb = {}
    if not w.exact:
        for q in range(1, n_max + 1):
            hit = boundary_ambiguous(q, w)
            if hit:
                amb[q] = hit
    return CountingReport(n_max, w, n0, n, phi, pw, Phi, Psi, amb)


def prime_period_of_power(n: int, k: int) -> int:
    """Prime period under f of an n prime-periodic point of f**k.

    Valid when every periodic orbit of f has period divisible by k.
    """
    n, k = int(n), int(k)
    if n < 1 or k < 1:
        raise DomainError("n and k must be positive")
    return k * n


def rotation_model_prime_periods(n: int, k: int, moduli=None, shifts_per_modulus: int = 4) -> set[int]:
    """Brute-force oracle for prime_period_of_power.

    Runs through rotations x -> x + r on Z_N and keeps those whose periods
    are all divisible by k and under which 0 is an n prime-periodic point of
    the k-th power.  Returns the prime periods of 0 under the rotation itself,
    found by iterating.  ``moduli`` defaults to (k, k*n, 2*k*n).
    """
    if n < 1 or k < 1:
        raise DomainError("n and k must be positive")
    moduli = moduli or (k, k * n, 2 * k * n)
    seen = set()
    for N in moduli:
        kept = 0
        for r in range(1, N + 1):
            per = _orbit_period(lambda x: (x + r) % N, 0)
            if per % k or _orbit_period(lambda x: (x + k * r) % N, 0) != n:
                continue
            seen.add(per)
            kept += 1
            if kept >= shifts_per_modulus:
                break
    return seen


def _orbit_period(step, x0) -> int:
    x = step(x0)
    t = 1
    while x != x0:
        x = step(x)
        t += 1
    return t
