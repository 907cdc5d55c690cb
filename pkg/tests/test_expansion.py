import math

import mpmath
import pytest

from coulomb_droplet.errors import NearCriticalError, PhaseError
from coulomb_droplet.expansion import (
    char_poly_moment_log,
    energy,
    entropy_coefficient,
    expansion_coefficients,
    log_z_induced_gamma_product,
    log_z_predicted,
    log_z_reference,
    reference_asymptotic,
    tail_coefficient,
)
from coulomb_droplet.geometry import ModelParams, Regime, classify_phase, in_regime_i, regime_i_margins
from coulomb_droplet.ortho_oracle import oracle
from coulomb_droplet.specfun import HALF_LOG_2PI, ZETA_PRIME_M1, bernoulli_number

REGIME_I = ModelParams(0.2, 0.5, 0.15)


def test_energy_examples():
    assert energy(ModelParams(0, 0, 0)) == 0.75
    assert energy(ModelParams(0, 1, 0)) == pytest.approx(2.25 - 2 * math.log(2), rel=1e-15)
    for a in (1.5, 3.0, 7.0):
        p = ModelParams(a, 0, 0.4)
        assert classify_phase(p).regime is Regime.II
        assert energy(p) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(PhaseError):
        energy(ModelParams(0, 1, 0.8))


def test_entropy_coefficient():
    assert entropy_coefficient(ModelParams(0, 0, 0)) == pytest.approx(HALF_LOG_2PI - 1, abs=0)
    assert entropy_coefficient(ModelParams(0, 0, 0.6)) == pytest.approx(HALF_LOG_2PI - 1 + 0.5 * math.log(0.64))
    vals = [entropy_coefficient(ModelParams(0, 0, t / 10)) for t in range(10)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def _boundary_a(c, t):
    lo, hi = 0.0, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if in_regime_i(regime_i_margins(ModelParams(mid, c, t))):
            lo = mid
        else:
            hi = mid
    return lo


@pytest.mark.parametrize("c,t", [(0.5, 0.0), (1.0, 0.0), (0.25, 0.2), (0.14, 0.3), (0.5, 0.1)])
def test_energy_continuous_across_i_ii_line(c, t):
    a = _boundary_a(c, t)
    d = 1e-4
    regimes = [classify_phase(ModelParams(a + k * d, c, t)).regime for k in (-2, -1, 1, 2)]
    assert regimes == [Regime.I, Regime.I, Regime.II, Regime.II]
    e = [energy(ModelParams(a + k * d, c, t)) for k in (-2, -1, 1, 2)]
    # linear extrapolation to the line from each side
    assert abs((2 * e[1] - e[0]) - (2 * e[2] - e[3])) < 1e-6


def test_expansion_examples():
    r = expansion_coefficients(ModelParams(0, 1, 0), 4)
    assert r.C2 == 0.5 and r.C4 == 0.5 and r.chi == 0
    assert r.C5 == pytest.approx(HALF_LOG_2PI + math.log(0.5) / 12, abs=1e-14)
    assert dict(r.tail)[1] == pytest.approx(1 / 12, abs=1e-16)
    r2 = expansion_coefficients(ModelParams(2, 1, 0.4), 4)
    assert r2.C4 == pytest.approx(5 / 12) and r2.chi == 1 and r2.tail == ()
    assert r2.C1 == -energy(ModelParams(2, 1, 0.4))


def test_near_critical_guard():
    p = ModelParams(math.sqrt(2) - 1 - 1e-8, 1, 0)
    with pytest.raises(NearCriticalError):
        expansion_coefficients(p)


def test_tail_signs_c1():
    e = [tail_coefficient(k, 1.0) for k in range(1, 9)]
    assert [x > 0 for x in e] == [True, True, False, False, True, True, False, False]
    for k in (2, 4, 6):
        assert e[k - 1] == pytest.approx(float(bernoulli_number(k + 2)) / (k * (k + 2)) * (2.0 ** -k - 1))


def test_even_tail_matches_induced_reference():
    # N^{-2} and N^{-4} coefficients of the exact induced reference, c = 1
    p = ModelParams(0, 1, 0)
    with mpmath.workdps(40):
        for N in (400, 800):
            rem = log_z_reference("induced", N, p) - log_z_predicted(p, N, 1)
            assert abs(rem * N ** 2 - tail_coefficient(2, 1.0)) < 2 / N


def test_reference_examples():
    assert log_z_reference("elliptic", 1, ModelParams(0, 0, 0)) == 0
    for N in range(1, 51, 7):
        p = ModelParams(0, 0, 0)
        assert log_z_reference("induced", N, p) == pytest.approx(log_z_reference("elliptic", N, p), abs=1e-10)
    p = ModelParams(0, 0, 0.35)
    assert abs(log_z_reference("elliptic", 100, p) - reference_asymptotic("elliptic", 100, p, 3)) < 1e-10
    with pytest.raises(OverflowError):
        log_z_reference("elliptic", 10_001, p)


@pytest.mark.parametrize("N,c", [(6, 0.5), (10, 0.3), (12, 1.25)])
def test_gamma_product_matches_barnes(N, c):
    p = ModelParams(0, c, 0)
    assert abs(log_z_induced_gamma_product(N, c) - log_z_reference("induced", N, p)) < 1e-10


def test_prediction_equals_reference_truncations():
    for t in (0.0, 0.5):
        p = ModelParams(0.7, 0, t)
        for N in (20, 200):
            assert log_z_predicted(p, N) == pytest.approx(reference_asymptotic("elliptic", N, p, 0), abs=1e-10)
    p = ModelParams(0, 0.75, 0)
    for N in (20, 200):
        for j in (0, 1, 2):
            assert log_z_predicted(p, N, 2 * j) == pytest.approx(reference_asymptotic("induced", N, p, j), abs=1e-10)


def test_c5_constant_terms():
    r = expansion_coefficients(ModelParams(2, 1, 0.4))
    assert r.C5 == pytest.approx(ZETA_PRIME_M1 + HALF_LOG_2PI + r.liouville / 24 + math.log(0.84) / 12, abs=1e-15)


def test_char_poly_moment():
    assert char_poly_moment_log(ModelParams(0.5, 0, 0.3), 40) == pytest.approx(0, abs=1e-12)
    p = REGIME_I
    N = 1000
    lead = char_poly_moment_log(p, N) / N ** 2
    assert abs(lead - (-energy(p) + 0.75)) < 1e-5
    s = oracle(p, 8, 8)
    ratio = s.log_Z - log_z_reference("elliptic", 8, p)
    assert abs(ratio - char_poly_moment_log(p, 8, 2)) < 5e-3
