"""Liouville actions, the variational rate and boundary functionals.

Exterior maps use S[psi] = int_{|w|>1} |psi''/psi'|^2 dA - 4 log|psi'(inf)|;
the interior (Disc) map uses + 4 log|psi'(0)| with a vanishing integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearCriticalError, PhaseError, SolverError
from .geometry import (
    CIRCLE_NODES,
    ExteriorMap,
    MapKind,
    ModelParams,
    PhaseLabel,
    Regime,
    _psi_raw,
    boundary_geometry_at,
    circle_nodes,
    classify_phase,
    disc_map,
    ellipse_map,
)

ZERO_ON_CIRCLE_BAND = 1e-8


@dataclass(frozen=True)
class LiouvilleReport:
    closed_form: float
    explicit_formula: float
    numeric_integral: float
    per_component: tuple


def _derivative_zeros_poles(m: ExteriorMap):
    """Zeros and poles of psi' in the finite plane, with multiplicity."""
    t = m.tau
    if m.kind is MapKind.ELLIPSE:
        if t == 0:
            return np.array([]), np.array([])
        r = math.sqrt(t)
        return np.array([r, -r], dtype=complex), np.array([0j, 0j])
    q, lam = m.q, m.lam
    if lam == 0:
        # poles at q cancel against the double zero at q
        return _derivative_zeros_poles(ExteriorMap(MapKind.ELLIPSE, tau=t, scale=m.R))
    # w^2 (w-q)^2 - tau (w-q)^2 + lam w^2
    coeffs = [1.0, -2 * q, q * q - t + lam, 2 * t * q, -t * q * q]
    poles = [q, q]
    if t == 0:
        coeffs = coeffs[:3]
    else:
        poles += [0.0, 0.0]
    zeros = np.roots(coeffs)
    return zeros.astype(complex), np.array(poles, dtype=complex)


def _log_abs_dpsi_reflected(m: ExteriorMap, p: complex) -> float:
    """log|psi'(1/conj(p))|, with p = 0 mapped to the value at infinity."""
    if p == 0:
        return math.log(m.derivative_at_infinity)
    return math.log(abs(complex(_psi_raw(m, 1 / np.conj(p), 1))))


def liouville_closed_rational(m: ExteriorMap) -> float:
    """Residue (rational) evaluation of the Liouville action."""
    if m.kind is MapKind.DISC:
        return 4 * math.log(m.radius)
    zeros, poles = _derivative_zeros_poles(m)
    if zeros.size and np.any(np.abs(np.abs(zeros) - 1) < ZERO_ON_CIRCLE_BAND):
        raise NearCriticalError("psi' has a zero on the unit circle")
    if zeros.size and np.any(np.abs(zeros) > 1):
        raise SolverError("psi' has a zero outside the unit disc; map is not univalent")
    s = -4 * math.log(m.derivative_at_infinity)
    s -= math.fsum(_log_abs_dpsi_reflected(m, p) for p in zeros)
    s += math.fsum(_log_abs_dpsi_reflected(m, p) for p in poles)
    return s


def liouville_numeric(m: ExteriorMap, radial: int = 200, angular: int = 512) -> float:
    """Direct quadrature of the Liouville integral after w = 1/u."""
    if m.kind is MapKind.DISC:
        return 4 * math.log(m.radius)
    x, wts = np.polynomial.legendre.leggauss(radial)
    r = 0.5 * (x + 1)
    wr = 0.5 * wts
    u = r[:, None] * circle_nodes(angular)[None, :]
    w = 1 / u
    pre = _psi_raw(m, w, 2) / _psi_raw(m, w, 1)
    f = np.abs(pre) ** 2 * np.abs(w) ** 4
    # dA = r dr dtheta / pi; the angular mean carries 2 pi
    integral = 2 * np.sum(wr * r * f.mean(axis=1))
    return float(integral) - 4 * math.log(m.derivative_at_infinity)


def _log_pos(x: float, label: str) -> float:
    if not x > 0:
        raise NearCriticalError(f"logarithm argument {label} = {x:.3g} is not positive")
    return math.log(x)


def liouville_explicit_regime_i(c: float) -> float:
    return 2 * _log_pos(c / (1 + c), "c/(1+c)")


def liouville_explicit_regime_ii(R: float, q: float, lam: float, tau: float) -> float:
    """Closed form of the action for the simply connected droplet.

    The last factor is taken as (1+tau)(1-q^2)(1-tau q^2)^2 - (1+tau q^2)^2 lam,
    which is positive on the whole parameter domain and reproduces the
    ellipse value at lam = 0.
    """
    q2 = q * q
    l24 = (-_log_pos(R * (1 - q2), "R(1-q^2)") / 6
           - _log_pos(lam + (1 - tau) * (1 - q) ** 2, "lam+(1-tau)(1-q)^2") / 24
           - _log_pos(lam + (1 - tau) * (1 + q) ** 2, "lam+(1-tau)(1+q)^2") / 24
           + _log_pos(q2 * lam + (1 - q2) ** 2 * (1 - tau * q2), "q^2 lam+(1-q^2)^2(1-tau q^2)") / 6
           - _log_pos((1 + tau) * (1 - q2) * (1 - tau * q2) ** 2 - (1 + tau * q2) ** 2 * lam,
                      "(1+tau)(1-q^2)(1-tau q^2)^2-(1+tau q^2)^2 lam") / 12)
    return 24 * l24


def liouville_explicit(p: ModelParams, phase: PhaseLabel | None = None) -> float:
    """Action of the droplet from the explicit per-regime formulas."""
    phase = phase or classify_phase(p)
    if p.c == 0:
        return -2 * math.log(p.t0)
    if phase.regime is Regime.I:
        return liouville_explicit_regime_i(p.c)
    if phase.regime is Regime.II:
        m = phase.exterior_map
        return liouville_explicit_regime_ii(m.R, m.q, m.lam, p.tau)
    raise PhaseError("Regime III is not supported")


def droplet_components(p: ModelParams, phase: PhaseLabel) -> list[tuple[str, ExteriorMap]]:
    if p.c == 0:
        return [("outer", ExteriorMap(MapKind.ELLIPSE, tau=p.tau, scale=1.0))]
    if phase.regime is Regime.I:
        return [("outer", ellipse_map(p)), ("hole", disc_map(p))]
    if phase.regime is Regime.II:
        return [("outer", phase.exterior_map)]
    raise PhaseError("Regime III is not supported")


def liouville_report(p: ModelParams, phase: PhaseLabel | None = None) -> LiouvilleReport:
    phase = phase or classify_phase(p)
    comps = droplet_components(p, phase)
    closed = [(name, liouville_closed_rational(m)) for name, m in comps]
    numeric = math.fsum(liouville_numeric(m) for _, m in comps)
    return LiouvilleReport(
        closed_form=math.fsum(v for _, v in closed),
        explicit_formula=liouville_explicit(p, phase),
        numeric_integral=numeric,
        per_component=tuple(closed),
    )


def _boundary_weight(m: ExteriorMap, n: int):
    w = circle_nodes(n)
    g = boundary_geometry_at(m, w)
    d1 = _psi_raw(m, w, 1)
    return w, np.real(w * w * g.schwarzian) + np.abs(d1) ** 2 * g.kappa ** 2, d1


def liouville_variation_rate(m: ExteriorMap, re_p, n: int = CIRCLE_NODES) -> float:
    """dS/dt for a Loewner flow with boundary velocity Re P on the circle.

    `re_p` is either an array of n samples at theta_k = 2 pi k / n or a
    callable of theta.
    """
    w, kernel, _ = _boundary_weight(m, n)
    if callable(re_p):
        vals = np.asarray(re_p(np.angle(w) % (2 * np.pi)), dtype=float)
    else:
        vals = np.asarray(re_p, dtype=float)
    if vals.shape != (n,):
        raise DomainError(f"Re P must be sampled on {n} circle nodes")
    return float(-(2 / np.pi) * 2 * np.pi * np.mean(kernel * vals))


def a_deformation_velocity(m: ExteriorMap, n: int = CIRCLE_NODES) -> np.ndarray:
    """Re P on the circle for the flow a -> a + da at fixed c and tau."""
    w = circle_nodes(n)
    d1 = _psi_raw(m, w, 1)
    return -(1 - m.tau) * m.derivative_at_infinity * np.real(w) / np.abs(d1) ** 2


def boundary_entropy_term(p: ModelParams, chi: int, m: ExteriorMap | None = None,
                          check_tol: float = 1e-10) -> float:
    """-(1/(24 pi)) * integral of log(Delta Q) kappa ds over the droplet boundary."""
    if chi not in (0, 1):
        raise DomainError("chi must be 0 or 1")
    closed = chi / 12 * math.log(p.t0)
    log_dq = math.log(p.delta_q)
    # outer curve contributes +2 pi, a hole (traversed clockwise) -2 pi
    total_turning = _turning(m or ExteriorMap(MapKind.ELLIPSE, tau=p.tau, scale=math.sqrt(1 + p.c)))
    if chi == 0:
        if p.c <= 0:
            raise DomainError("a doubly connected droplet needs c > 0")
        total_turning -= _turning(disc_map(p))
    contour = -log_dq * total_turning / (24 * math.pi)
    if abs(contour - closed) > check_tol:
        raise SolverError(f"Gauss-Bonnet check failed: {contour} vs {closed}")
    return closed


def _turning(m: ExteriorMap, n: int = CIRCLE_NODES) -> float:
    w = circle_nodes(n)
    g = boundary_geometry_at(m, w)
    return float(2 * np.pi * np.mean(g.kappa * np.abs(_psi_raw(m, w, 1))))


def f1_leading_coefficient(m: ExteriorMap, p: ModelParams, n: int = CIRCLE_NODES,
                           imag_tol: float = 1e-12) -> float:
    """Coefficient of the leading 1/z term of F1/F0 for a simply connected droplet."""
    if not m.is_exterior:
        raise DomainError("f1 requires an exterior map")
    w, kernel, d1 = _boundary_weight(m, n)
    integral = 2 * np.pi * np.mean(kernel * w / np.abs(d1) ** 2)
    val = m.derivative_at_infinity / p.delta_q / (24 * np.pi) * integral
    if abs(val.imag) > imag_tol:
        raise SolverError(f"imaginary part {val.imag:.3g} of f1 exceeds {imag_tol}")
    return float(val.real)
