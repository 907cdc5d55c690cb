"""Log-gamma, Bernoulli numbers and the Barnes G-function.

Barnes values are accumulated in extended precision (mpmath) and rounded
once, so that differences of large logarithms keep ulp-level accuracy.
Pass ``dps`` to receive the unrounded mpmath value instead of a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

from .errors import DomainError

ZETA_PRIME_M1 = -0.1654211437004509292139196602
ZETA_PRIME_M1_STR = "-0.1654211437004509292139196602"
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

_INTEGER_PATH_MAX = 10_000
_BERNOULLI_MAX = 64
_BARNES_EXACT_MAX = 100_000
_INTERNAL_DPS = 40


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0.

    Integers up to 1e4 are summed exactly as ln((x-1)!); other arguments
    use the C library lgamma.
    """
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    if float(x).is_integer() and x <= _INTEGER_PATH_MAX:
        n = int(x)
        return math.fsum(math.log(k) for k in range(2, n))
    return math.lgamma(x)


@lru_cache(maxsize=None)
def _bernoulli_table(kmax: int) -> tuple[Fraction, ...]:
    # sum_{j=0}^{k} C(k+1, j) B_j = 0 for k >= 1
    b = [Fraction(1)]
    for k in range(1, kmax + 1):
        s = sum(math.comb(k + 1, j) * b[j] for j in range(k))
        b.append(-s / (k + 1))
    return tuple(b)


def bernoulli_number(k: int) -> Fraction:
    """Exact B_k with the convention B_1 = -1/2."""
    if k < 0:
        raise DomainError("Bernoulli index must be nonnegative")
    if k > _BERNOULLI_MAX:
        raise OverflowError(f"Bernoulli index {k} above supported maximum {_BERNOULLI_MAX}")
    return _bernoulli_table(_BERNOULLI_MAX)[k]


@lru_cache(maxsize=256)
def _log_barnes_g_mp(n: int, dps: int):
    with mpmath.workdps(dps):
        # ln G(n) = sum_{j=1}^{n-2} ln j! = sum_{k=2}^{n-2} (n-1-k) ln k
        terms = [(n - 1 - k) * mpmath.log(k) for k in range(2, n - 1)]
        return +mpmath.fsum(terms)


def log_barnes_g_exact(n: int, dps: int | None = None):
    """ln G(n) for integer 1 <= n <= 1e5 from the functional recursion."""
    if int(n) != n or n < 1:
        raise DomainError(f"log_barnes_g_exact requires an integer n >= 1, got {n}")
    if n > _BARNES_EXACT_MAX:
        raise DomainError(f"n={n} above supported maximum {_BARNES_EXACT_MAX}")
    val = _log_barnes_g_mp(int(n), dps or _INTERNAL_DPS)
    return val if dps else float(val)


@dataclass(frozen=True)
class AsymptoticSeries:
    """Finite sum of coefficient * x**exponent with strictly decreasing exponents."""

    terms: tuple[tuple[float, Fraction | float], ...]
    k0: int = 0

    def __post_init__(self):
        exps = [e for e, _ in self.terms]
        if any(e2 >= e1 for e1, e2 in zip(exps, exps[1:])):
            raise DomainError("exponents must be strictly decreasing")

    def evaluate(self, x, dps: int | None = None):
        if dps:
            with mpmath.workdps(dps):
                x = mpmath.mpf(x)
                return mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * x ** e
                                   if isinstance(c, Fraction) else mpmath.mpf(c) * x ** e
                                   for e, c in self.terms)
        return math.fsum(float(c) * x ** e for e, c in self.terms)

    def term(self, i: int, x: float) -> float:
        e, c = self.terms[i]
        return float(c) * x ** e


def barnes_tail(k0: int) -> AsymptoticSeries:
    """sum_{k=1}^{k0} B_{2k+2} / (4k(k+1)) z^{-2k}."""
    return AsymptoticSeries(
        tuple((-2 * k, bernoulli_number(2 * k + 2) / (4 * k * (k + 1))) for k in range(1, k0 + 1)),
        k0,
    )


def stirling_tail(k0: int) -> AsymptoticSeries:
    """sum_{k=1}^{k0} B_{2k} / (2k(2k-1)) z^{1-2k}."""
    return AsymptoticSeries(
        tuple((1 - 2 * k, bernoulli_number(2 * k) / (2 * k * (2 * k - 1))) for k in range(1, k0 + 1)),
        k0,
    )


def _zeta_prime_m1(dps: int):
    return mpmath.mpf(ZETA_PRIME_M1_STR) if dps <= 28 else mpmath.zeta(-1, derivative=1)


def log_barnes_g_asymptotic(z: float, k0: int, dps: int | None = None):
    """Large-z expansion of ln G(z+1) truncated after the z^{-2 k0} term."""
    if not z >= 2:
        raise DomainError(f"log_barnes_g_asymptotic requires z >= 2, got {z}")
    if not 0 <= k0 <= 10:
        raise DomainError(f"k0 must lie in [0, 10], got {k0}")
    with mpmath.workdps(dps or _INTERNAL_DPS):
        zz = mpmath.mpf(z)
        lz = mpmath.log(zz)
        val = (zz * zz * lz / 2 - mpmath.mpf(3) / 4 * zz * zz
               + zz * mpmath.log(2 * mpmath.pi) / 2 - lz / 12
               + _zeta_prime_m1(dps or _INTERNAL_DPS)
               + barnes_tail(k0).evaluate(zz, dps or _INTERNAL_DPS))
        return +val if dps else float(val)


def log_gamma_asymptotic(z: float, k0: int, dps: int | None = None):
    """Stirling series for ln Gamma(z) truncated after the z^{1-2 k0} term."""
    if not z > 0:
        raise DomainError("log_gamma_asymptotic requires z > 0")
    with mpmath.workdps(dps or _INTERNAL_DPS):
        zz = mpmath.mpf(z)
        val = ((zz - mpmath.mpf(1) / 2) * mpmath.log(zz) - zz + mpmath.log(2 * mpmath.pi) / 2
               + stirling_tail(k0).evaluate(zz, dps or _INTERNAL_DPS))
        return +val if dps else float(val)
