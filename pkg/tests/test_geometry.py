import math

import numpy as np
import pytest

from coulomb_droplet.errors import DomainError, PhaseError
from coulomb_droplet.geometry import (
    ExteriorMap,
    MapKind,
    ModelParams,
    Regime,
    _psi_raw,
    boundary_geometry_at,
    circle_nodes,
    classify_phase,
    contour_area_and_m1,
    coupled_residuals,
    disc_map,
    droplet_area_and_m1,
    ellipse_map,
    gauss_bonnet,
    h_indicator,
    lambda_critical,
    map_eval,
    outer_map,
    param_to_model,
    schwarz_function,
    schwarz_obstacle,
    solve_map_params,
    univalence_witness,
    w_star,
)

REGIME_II_POINTS = [(1.5, 0.25, 0.2), (2.0, 1.0, 0.4), (10.0, 1.0, 0.2), (1.2, 0.3, 0.0), (3.0, 0.5, 0.6)]


def test_model_params_validation():
    for bad in [(-1, 0, 0), (0, -1, 0), (0, 0, 1.0), (0, 0, -0.1), (math.nan, 0, 0)]:
        with pytest.raises(DomainError):
            ModelParams(*bad)
    assert ModelParams(0, 0, 0.6).t0 == pytest.approx(0.64)


@pytest.mark.parametrize("params,regime", [((0, 1, 0), Regime.I), ((10, 1, 0.2), Regime.II), ((0, 1, 0.8), Regime.III)])
def test_classify_examples(params, regime):
    assert classify_phase(ModelParams(*params)).regime is regime


def test_isotropic_boundary_is_regime_i():
    a = math.sqrt(2) - 1
    assert classify_phase(ModelParams(a, 1, 0)).regime is Regime.I
    assert classify_phase(ModelParams(a + 1e-3, 1, 0)).regime is Regime.II


def test_classifier_total_on_coarse_sweep():
    seen = set()
    for a in np.linspace(0, 4, 9):
        for c in np.linspace(0, 2, 7):
            for t in (0.0, 0.3, 0.6, 0.9):
                ph = classify_phase(ModelParams(float(a), float(c), t))
                assert all(math.isfinite(v) for v in ph.margins.values())
                seen.add(ph.regime)
    assert seen == {Regime.I, Regime.II, Regime.III}


def test_w_star():
    assert w_star(0.3, 0, 0.4) == pytest.approx(1 / 0.3, rel=1e-15)
    q, lam, t = 0.5, 0.1, 0.2
    w = w_star(q, lam, t)
    assert abs(q * w * w - (q * q + 1 + lam / (1 - t)) * w + q) < 1e-14
    for q in np.linspace(0.02, 0.98, 50):
        for lam in np.linspace(0, 2, 50):
            assert w_star(q, lam, 0.3) >= 1


def test_h_indicator_and_lambda_critical():
    assert h_indicator(0.5, 0, 0.3) > 0
    lc = lambda_critical(0.5, 0.2)
    assert lc > 0
    for q in (0.1, 0.5, 0.9):
        for t in (0.0, 0.3, 0.7):
            assert abs(h_indicator(q, lambda_critical(q, t), t)) < 1e-10
    tr = lambda_critical(0.4, 0.3, trace=True)
    w = np.array(tr.widths)
    w = w[w > 1e-10]
    assert np.allclose(w[1:] / w[:-1], 0.5, rtol=1e-6)
    assert tr.widths[-1] < 1e-12


def test_h_indicator_lipschitz_scan():
    lam = np.linspace(0, 0.5, 401)
    d = lam[1] - lam[0]
    vals = np.array([h_indicator(0.6, float(x), 0.3) for x in lam])
    assert np.max(np.abs(np.diff(vals))) / d < 50


def test_isotropic_lambda_critical():
    for q in (0.2, 0.5, 0.8):
        assert lambda_critical(q, 0.0) == pytest.approx(1 - q * q, abs=1e-12)


def test_param_to_model_lambda_zero():
    q, t = 0.5, 0.3
    a, c, R = param_to_model(q, 0.0, t)
    assert a == pytest.approx((1 + t * q * q) / q, rel=1e-15)
    assert c == 0 and R == 1


def test_param_to_model_positive_charge():
    for q in np.linspace(0.1, 0.9, 9):
        lc = lambda_critical(float(q), 0.3)
        for s in (0.1, 0.5, 0.9):
            _, c, _ = param_to_model(float(q), s * lc, 0.3)
            assert c > 0


def test_solve_lambda_zero_case():
    t = 0.3
    m = solve_map_params(ModelParams((1 + t * 0.25) / 0.5, 0, t))
    assert m.q == pytest.approx(0.5, abs=1e-12)
    assert m.lam == pytest.approx(0, abs=1e-12) and m.R == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("pt", REGIME_II_POINTS)
def test_round_trip_and_residuals(pt):
    p = ModelParams(*pt)
    m = solve_map_params(p)
    assert max(abs(r) for r in coupled_residuals(m, p)) < 1e-10
    a, c, R = param_to_model(m.q, m.lam, p.tau)
    m2 = solve_map_params(ModelParams(a, c, p.tau))
    assert abs(m2.q - m.q) < 1e-10 and abs(m2.lam - m.lam) < 1e-10
    m3 = solve_map_params(p, seed_rank=1)
    assert abs(m3.q - m.q) < 1e-9 and abs(m3.lam - m.lam) < 1e-9
    assert m.lam < lambda_critical(m.q, p.tau)
    assert univalence_witness(m) > 0


def test_map_eval_examples():
    p = ModelParams(0, 0.5, 0.3)
    e = ellipse_map(p)
    assert map_eval(e, 1) == pytest.approx(math.sqrt(1.5) * 1.3, rel=1e-15)
    d = disc_map(ModelParams(0.2, 0.5, 0.3))
    w = circle_nodes(16) * 0.5
    assert np.allclose(map_eval(d, w, 1), math.sqrt(0.5 * 0.91), rtol=1e-15)
    r2 = ExteriorMap(MapKind.REGIME_II, tau=0.3, R=1.0, q=0.4, lam=0.0)
    e1 = ExteriorMap(MapKind.ELLIPSE, tau=0.3, scale=1.0)
    w = circle_nodes(64)
    for k in (0, 1, 2):
        assert np.max(np.abs(map_eval(r2, w, k) - map_eval(e1, w, k))) < 1e-14
    with pytest.raises(DomainError):
        map_eval(e, 0.5)


def test_boundary_geometry_examples():
    w = circle_nodes(32)
    p = ModelParams(0.1, 0.5, 0.3)
    g = boundary_geometry_at(disc_map(p), w)
    assert np.allclose(g.kappa, 1 / math.sqrt(0.5 * p.t0), rtol=1e-14)
    assert np.max(np.abs(g.schwarzian)) == 0
    g = boundary_geometry_at(ellipse_map(ModelParams(0, 0.7, 0)), w)
    assert np.allclose(g.kappa, 1 / math.sqrt(1.7), rtol=1e-14)
    with pytest.raises(DomainError):
        boundary_geometry_at(disc_map(p), 0.5)


@pytest.mark.parametrize("pt", REGIME_II_POINTS)
def test_closure_symmetry_gauss_bonnet(pt):
    m = solve_map_params(ModelParams(*pt))
    w = circle_nodes(512)
    assert abs(np.mean(_psi_raw(m, w, 1) * 1j * w)) * 2 * math.pi < 1e-12
    w2 = 1.3 * circle_nodes(37)
    assert np.max(np.abs(np.imag(_psi_raw(m, np.conj(w2))) + np.imag(_psi_raw(m, w2)))) < 1e-14
    assert abs(gauss_bonnet(m) - 2 * math.pi) < 1e-10


def test_area_and_moment():
    for pt in [(0.2, 0.5, 0.15), (0, 1, 0), (0.3, 0.1, 0.6)]:
        p = ModelParams(*pt)
        area, m1 = droplet_area_and_m1(p)
        assert area == pytest.approx(p.t0, abs=1e-15)
        assert m1 == pytest.approx(-p.a * p.c * p.t0, abs=1e-15)
        ae, me = contour_area_and_m1(ellipse_map(p))
        ad, md = contour_area_and_m1(disc_map(p))
        assert abs(ae - ad - p.t0) < 1e-12 and abs(me - md - m1) < 1e-12
    for pt in REGIME_II_POINTS:
        p = ModelParams(*pt)
        assert abs(droplet_area_and_m1(p)[0] - p.t0) < 1e-10
    p = ModelParams(2.0, 0, 0.4)
    assert abs(droplet_area_and_m1(p)[1]) < 1e-12


def test_outer_map_regime_iii():
    with pytest.raises(PhaseError):
        outer_map(ModelParams(0, 1, 0.8))


def test_charge_outside_regime_ii_droplet():
    # the droplet is simply connected and the charge sits in its complement
    for pt in REGIME_II_POINTS:
        p = ModelParams(*pt)
        m = solve_map_params(p)
        z = _psi_raw(m, circle_nodes(2048))
        winding = np.sum(np.diff(np.unwrap(np.angle(np.append(z, z[0]) - p.a)))) / (2 * math.pi)
        assert abs(winding) < 1e-9


def test_schwarz_function_on_boundary():
    m = solve_map_params(ModelParams(1.5, 0.25, 0.2))
    for w in circle_nodes(64):
        z = complex(_psi_raw(m, w))
        assert abs(schwarz_function(m, z) - z.conjugate()) < 1e-10


def test_obstacle_quadratic_growth():
    p = ModelParams(1.5, 0.25, 0.2)
    m = solve_map_params(p)
    w0 = np.exp(0.7j)
    z0 = complex(_psi_raw(m, w0))
    d1 = complex(_psi_raw(m, w0, 1))
    n = w0 * d1 / abs(d1)
    assert abs(schwarz_obstacle(m, p, z0, z0).r_value) < 1e-14
    ratios = [schwarz_obstacle(m, p, z0 + e * n, z0).r_value / e ** 2 for e in (1e-2, 1e-3)]
    target = 2 * p.delta_q
    assert abs(ratios[1] - target) < abs(ratios[0] - target) < 0.05 * target
    assert abs(ratios[1] - target) < 5e-3 * target


def test_obstacle_positive_outside():
    p = ModelParams(2.0, 1.0, 0.4)
    m = solve_map_params(p)
    for w in circle_nodes(24):
        for r in (1.02, 1.08):
            z = complex(_psi_raw(m, r * w))
            assert schwarz_obstacle(m, p, z).r_value > 0
