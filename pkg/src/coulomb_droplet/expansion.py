"""Energies, expansion coefficients and exact reference free energies.

log Z_N ~ C1 N^2 + C2 N log N + C3 N + C4 log N + C5 + sum_k E_k N^{-k}
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .actions import boundary_entropy_term, liouville_explicit
from .errors import DomainError, PhaseError
from .geometry import (
    ModelParams,
    PhaseLabel,
    Regime,
    check_not_near_critical,
    classify_phase,
)
from .specfun import (
    HALF_LOG_2PI,
    ZETA_PRIME_M1,
    barnes_tail,
    bernoulli_number,
    log_barnes_g_exact,
    log_gamma,
    stirling_tail,
)

_REFERENCE_N_MAX = 10_000
_DPS = 40


@dataclass(frozen=True)
class ExpansionReport:
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    chi: int
    liouville: float
    tail: tuple
    k0: int
    regime: str

    def log_z(self, N: int, k0: int | None = None) -> float:
        k0 = self.k0 if k0 is None else k0
        terms = [self.C1 * N * N, self.C2 * N * math.log(N), self.C3 * N,
                 self.C4 * math.log(N), self.C5]
        terms += [e * N ** (-k) for k, e in self.tail if k <= k0]
        return math.fsum(terms)


def _require_phase(p: ModelParams, phase: PhaseLabel | None) -> PhaseLabel:
    phase = phase or classify_phase(p)
    if phase.regime is Regime.III:
        raise PhaseError("Regime III is not supported")
    return phase


def euler_characteristic(p: ModelParams, phase: PhaseLabel) -> int:
    """0 for a droplet with a hole, 1 otherwise (c = 0 has no hole)."""
    return 0 if phase.regime is Regime.I and p.c > 0 else 1


def energy_regime_i(a: float, c: float, tau: float) -> float:
    t0 = 1 - tau * tau
    cl = c * c / 2 * math.log(c * t0) if c > 0 else 0.0
    return 0.75 + 1.5 * c + cl - (1 + c) ** 2 / 2 * math.log1p(c) - c * a * a / (1 + tau)


def energy_regime_ii(a: float, c: float, tau: float, R: float, q: float, lam: float) -> float:
    t0 = 1 - tau * tau
    q2, q4 = q * q, q ** 4
    lead = 2 - 3 * q2 - 3 * tau * q2 + 2 * tau * q4
    other = 2 - 3 * q2 + 3 * tau * q2 - 2 * tau * q4
    pole = R ** 3 * lam * a * lead / (2 * t0 ** 2 * q ** 3) * (1 - tau - other / lead * lam / (1 - q2))
    logs = 2 * c * (1 + c) * math.log(q) - (1 + c) ** 2 * math.log(R)
    if c > 0:
        logs += c * c * math.log(c * t0 * (1 - q2) / (R * lam))
    return 0.75 + 1.5 * c - c * a * a / (1 + tau) + pole + logs


def energy(p: ModelParams, phase: PhaseLabel | None = None) -> float:
    """Weighted logarithmic energy of the equilibrium measure."""
    phase = _require_phase(p, phase)
    if phase.regime is Regime.I:
        return energy_regime_i(p.a, p.c, p.tau)
    m = phase.exterior_map
    return energy_regime_ii(p.a, p.c, p.tau, m.R, m.q, m.lam)


def entropy_coefficient(p: ModelParams) -> float:
    return HALF_LOG_2PI - 1 + 0.5 * math.log(p.t0)


def tail_coefficient(k: int, c: float) -> float:
    """E_k of the Regime I tail.

    Odd k: B_{k+1}/(k(k+1)). Even k: B_{k+2}/(k(k+2)) ((1+c)^{-k} - c^{-k}),
    which is the N^{-k} coefficient of the exact induced reference.
    """
    if k < 1:
        raise DomainError("tail index starts at 1")
    if k % 2:
        return float(bernoulli_number(k + 1) / (k * (k + 1)))
    return float(bernoulli_number(k + 2) / (k * (k + 2))) * ((1 + c) ** (-k) - c ** (-k))


def expansion_coefficients(p: ModelParams, k0: int = 0, phase: PhaseLabel | None = None) -> ExpansionReport:
    phase = _require_phase(p, phase)
    check_not_near_critical(p, phase)
    chi = euler_characteristic(p, phase)
    liou = liouville_explicit(p, phase)
    boundary = boundary_entropy_term(p, chi, phase.exterior_map)
    c5 = chi * ZETA_PRIME_M1 + HALF_LOG_2PI + liou / 24 + boundary
    tail = ()
    if chi == 0:
        tail = tuple((k, tail_coefficient(k, p.c)) for k in range(1, k0 + 1))
    return ExpansionReport(
        C1=-energy(p, phase), C2=0.5, C3=entropy_coefficient(p), C4=(6 - chi) / 12, C5=c5,
        chi=chi, liouville=liou, tail=tail, k0=k0, regime=phase.regime.value,
    )


def log_z_predicted(p: ModelParams, N: int, k0: int = 0, phase: PhaseLabel | None = None) -> float:
    return expansion_coefficients(p, k0, phase).log_z(N, k0)


def _integer_charge(N: int, c: float) -> int | None:
    m = c * N
    r = round(m)
    return int(r) if abs(m - r) < 1e-9 * max(1.0, m) else None


def log_z_reference(kind: str, N: int, p: ModelParams) -> float:
    """Exact log Z_N of the induced (tau = a = 0) or elliptic (c = 0) model."""
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    if N > _REFERENCE_N_MAX:
        raise OverflowError(f"N above {_REFERENCE_N_MAX}")
    with mpmath.workdps(_DPS):
        logn = mpmath.log(N)
        if kind == "elliptic":
            val = (N * mpmath.log(mpmath.mpf(1) - mpmath.mpf(p.tau) ** 2) / 2
                   + log_barnes_g_exact(N + 2, _DPS) - (mpmath.mpf(N) ** 2 + N) / 2 * logn)
            return float(val)
        if kind != "induced":
            raise DomainError(f"unknown reference kind {kind!r}")
        c = mpmath.mpf(p.c)
        m = _integer_charge(N, p.c)
        if m is not None:
            val = (log_barnes_g_exact(N + 2, _DPS) - log_barnes_g_exact(N + 1, _DPS)
                   + log_barnes_g_exact(N + m + 1, _DPS) - log_barnes_g_exact(m + 1, _DPS))
        else:
            val = mpmath.loggamma(N + 1) + mpmath.fsum(mpmath.loggamma(j + 1 + c * N) for j in range(N))
        val -= ((c + mpmath.mpf(1) / 2) * N * N + mpmath.mpf(N) / 2) * logn
        return float(val)


def log_z_induced_gamma_product(N: int, c: float) -> float:
    """log(N! prod_j Gamma(j+1+cN) / N^{j+1+cN}) with per-mode radial norms."""
    return math.fsum([log_gamma(N + 1)]
                     + [log_gamma(j + 1 + c * N) - (j + 1 + c * N) * math.log(N) for j in range(N)])


def reference_asymptotic(kind: str, N: int, p: ModelParams, k0: int) -> float:
    """Large-N expansion of the reference free energies truncated at index k0.

    Index k contributes the N^{1-2k} and N^{-2k} terms.
    """
    with mpmath.workdps(_DPS):
        n = mpmath.mpf(N)
        logn = mpmath.log(n)
        half_log_2pi = mpmath.log(2 * mpmath.pi) / 2
        st = stirling_tail(k0).evaluate(n, _DPS)
        bt_terms = barnes_tail(k0).terms
        if kind == "elliptic":
            t0 = 1 - mpmath.mpf(p.tau) ** 2
            val = (-mpmath.mpf(3) / 4 * n * n + n * logn / 2 + (half_log_2pi - 1 + mpmath.log(t0) / 2) * n
                   + mpmath.mpf(5) / 12 * logn + half_log_2pi + mpmath.zeta(-1, derivative=1)
                   + st + barnes_tail(k0).evaluate(n, _DPS))
            return float(val)
        c = mpmath.mpf(p.c)
        lead = (mpmath.mpf(3) / 4 + 3 * c / 2 + (c * c / 2 * mpmath.log(c) if c > 0 else 0)
                - (c + 1) ** 2 / 2 * mpmath.log(c + 1))
        val = (-lead * n * n + n * logn / 2 + (half_log_2pi - 1) * n + logn / 2 + half_log_2pi
               + mpmath.log(c / (1 + c)) / 12 + st)
        for e, coef in bt_terms:
            k = -e
            val += mpmath.mpf(coef.numerator) / coef.denominator * ((c + 1) ** (-k) - c ** (-k)) * n ** e
        return float(val)


def char_poly_moment_log(p: ModelParams, N: int, k0: int = 0, phase: PhaseLabel | None = None) -> float:
    """log E|det(X - a)|^{2cN} over the elliptic ensemble."""
    if p.c == 0:
        # identical partition functions; skip the truncation error of the prediction
        return 0.0
    return log_z_predicted(p, N, k0, phase) - log_z_reference("elliptic", N, p)
