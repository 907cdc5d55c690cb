"""Phase classification, exterior conformal maps and boundary geometry.

Units: areas and moments are measured in dA = d^2 z / pi, so the droplet
area equals t0 = 1 - tau^2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, NearCriticalError, PhaseError, SolverError

CIRCLE_NODES = 512
NEAR_CRITICAL_MARGIN = 1e-6
NO_SOLUTION_RESIDUAL = 1e-6
_SEED_GRID = 64


@dataclass(frozen=True)
class ModelParams:
    a: float
    c: float
    tau: float

    def __post_init__(self):
        for name in ("a", "c", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
        if self.a < 0 or self.c < 0:
            raise DomainError("a and c must be nonnegative")
        if not 0 <= self.tau < 1:
            raise DomainError("tau must lie in [0, 1)")

    @property
    def t0(self) -> float:
        return 1.0 - self.tau ** 2

    @property
    def delta_q(self) -> float:
        return 1.0 / self.t0

    def replace(self, **kw) -> "ModelParams":
        d = {"a": self.a, "c": self.c, "tau": self.tau}
        d.update(kw)
        return ModelParams(**d)


class Regime(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"


class MapKind(str, enum.Enum):
    ELLIPSE = "Ellipse"
    DISC = "Disc"
    REGIME_II = "RegimeII"


@dataclass(frozen=True)
class ExteriorMap:
    """Rational map; Ellipse and RegimeII act on |w| >= 1, Disc on |w| <= 1.

    Ellipse: psi = scale (w + tau/w).
    Disc: psi = center + radius w.
    RegimeII: psi = R (w + tau/w - lam/(w - q) - lam/(q (1 - tau))).
    """

    kind: MapKind
    tau: float = 0.0
    scale: float = 1.0
    center: float = 0.0
    radius: float = 0.0
    R: float = 1.0
    q: float = 0.5
    lam: float = 0.0

    @property
    def is_exterior(self) -> bool:
        return self.kind is not MapKind.DISC

    @property
    def derivative_at_infinity(self) -> float:
        if self.kind is MapKind.ELLIPSE:
            return self.scale
        if self.kind is MapKind.DISC:
            raise DomainError("Disc kind is an interior map")
        return self.R

    @property
    def translation(self) -> float:
        if self.kind is MapKind.REGIME_II:
            return -self.R * self.lam / (self.q * (1.0 - self.tau))
        return self.center


def ellipse_map(p: ModelParams) -> ExteriorMap:
    return ExteriorMap(MapKind.ELLIPSE, tau=p.tau, scale=math.sqrt(1.0 + p.c))


def disc_map(p: ModelParams) -> ExteriorMap:
    return ExteriorMap(MapKind.DISC, tau=p.tau, center=p.a, radius=math.sqrt(p.c * p.t0))


class OutOfRangeError(SolverError):
    """The coupled equations solve only with lambda >= lambda_cri or q outside (0, 1)."""


class NoConvergenceError(SolverError):
    """Newton on the coupled equations stalled; `residual` is the best scaled residual."""

    def __init__(self, msg: str, residual: float):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class PhaseLabel:
    regime: Regime
    margins: dict = field(default_factory=dict)
    exterior_map: ExteriorMap | None = None
    detail: str = ""


# ----------------------------------------------------------------------------
# Map evaluation


def _psi_raw(m: ExteriorMap, w, order: int = 0):
    w = np.asarray(w, dtype=complex)
    t = m.tau
    if m.kind is MapKind.DISC:
        if order == 0:
            return m.center + m.radius * w
        if order == 1:
            return np.full_like(w, m.radius)
        return np.zeros_like(w)
    if m.kind is MapKind.ELLIPSE:
        s = m.scale
        if order == 0:
            return s * (w + t / w)
        if order == 1:
            return s * (1 - t / w ** 2)
        if order == 2:
            return s * (2 * t / w ** 3)
        return s * (-6 * t / w ** 4)
    R, q, lam = m.R, m.q, m.lam
    d = w - q
    if order == 0:
        return R * (w + t / w - lam / d - lam / (q * (1 - t)))
    if order == 1:
        return R * (1 - t / w ** 2 + lam / d ** 2)
    if order == 2:
        return R * (2 * t / w ** 3 - 2 * lam / d ** 3)
    return R * (-6 * t / w ** 4 + 6 * lam / d ** 4)


def map_eval(m: ExteriorMap, w, order: int = 0):
    """psi, psi' or psi'' (order 0, 1, 2) at w."""
    if order not in (0, 1, 2):
        raise DomainError("order must be 0, 1 or 2")
    if m.is_exterior and np.any(np.abs(w) < 1 - 1e-12):
        raise DomainError("exterior maps are defined for |w| >= 1")
    out = _psi_raw(m, w, order)
    return complex(out) if np.ndim(out) == 0 else out


def circle_nodes(n: int = CIRCLE_NODES) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class BoundaryGeometry:
    kappa: np.ndarray
    schwarzian: np.ndarray
    pre_schwarzian: np.ndarray


def boundary_geometry_at(m: ExteriorMap, w) -> BoundaryGeometry:
    """Curvature, Schwarzian {psi, w} and pre-Schwarzian psi''/psi' on |w| = 1."""
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(np.abs(w) - 1) > 1e-12):
        raise DomainError("boundary geometry requires |w| = 1")
    d1 = _psi_raw(m, w, 1)
    d2 = _psi_raw(m, w, 2)
    d3 = _psi_raw(m, w, 3)
    pre = d2 / d1
    kappa = (1 + np.real(w * pre)) / np.abs(d1)
    schw = d3 / d1 - 1.5 * pre ** 2
    return BoundaryGeometry(kappa, schw, pre)


def univalence_witness(m: ExteriorMap, n_theta: int = 512, n_r: int = 16) -> float:
    """Minimum |psi'| over the annulus 1 <= |w| <= 4 (exterior kinds)."""
    r = np.linspace(1.0, 4.0, n_r)[:, None]
    w = r * circle_nodes(n_theta)[None, :]
    return float(np.min(np.abs(_psi_raw(m, w, 1))))


# ----------------------------------------------------------------------------
# Regime II parametrisation


def w_star(q: float, lam: float, tau: float) -> float:
    """Larger root of q w^2 - (q^2 + 1 + lam/(1-tau)) w + q = 0."""
    b = q * q + 1 + lam / (1 - tau)
    disc = b * b - 4 * q * q
    return (b + math.sqrt(max(disc, 0.0))) / (2 * q)


def h_indicator(q: float, lam: float, tau: float) -> float:
    ws = w_star(q, lam, tau)
    q2 = q * q
    first = ((1 - tau) / q) * (1 + tau * q2 - (1 - tau * q2) / (1 - tau) * lam / (1 - q2)) * (ws - 1 / ws)
    coef = (1 - tau * q2) / q2 * lam + lam * lam / (1 - q2) ** 2
    # at lam = 0 the coefficient vanishes while |q w* - 1| -> 0
    second = 0.0 if coef == 0 else -2 * coef * math.log(abs(q * ws - 1) / abs(ws - q))
    third = -2 * (1 - tau * tau + (1 + tau * q2) / q2 * lam) * math.log(abs(ws))
    return first + second + third


@dataclass(frozen=True)
class BisectionTrace:
    root: float
    widths: tuple


def lambda_critical(q: float, tau: float, xtol: float = 1e-14, trace: bool = False):
    """Unique zero of H(q, .) by geometric bracketing and bisection."""
    if not (0 < q < 1) or not (0 <= tau < 1):
        raise DomainError("lambda_critical requires q in (0,1), tau in [0,1)")
    return _lambda_critical(float(q), float(tau), xtol, trace)


@lru_cache(maxsize=4096)
def _lambda_critical(q, tau, xtol, trace):
    q2 = q * q
    lam_ub = (1 - tau) * (1 - q2) * (1 + tau * q2) / (1 - tau * q2)
    lo, hi = 0.0, lam_ub
    h_lo = h_indicator(q, lo, tau)
    if h_lo <= 0:
        raise SolverError(f"H(q, 0) = {h_lo} is not positive")
    for _ in range(61):
        if h_indicator(q, hi, tau) <= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise SolverError("no sign change of H within 60 doublings")
    widths = []
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h_indicator(q, mid, tau) > 0:
            lo = mid
        else:
            hi = mid
        widths.append(hi - lo)
    root = 0.5 * (lo + hi)
    return BisectionTrace(root, tuple(widths)) if trace else root


def _radicand(q, lam, tau):
    return (1 - q * q) ** 2 * (1 - tau * tau + 2 * tau * lam) - lam * lam


def _a_c(q, lam, tau):
    """Closed forms a(q, lam), c(q, lam); vectorised, no domain checks."""
    q2 = q * q
    D = _radicand(q, lam, tau)
    c = lam / q2 * ((1 - q2) ** 2 * (1 - tau * q2) + q2 * lam) / D
    a = (math.sqrt((1 + tau) / (1 - tau))
         * ((1 - tau) * (1 - q2) * (1 + tau * q2) - (1 - tau * q2) * lam) / (q * np.sqrt(D)))
    return a, c


def _radius(q, lam, tau):
    return np.sqrt((1 - tau * tau) / (1 - tau * tau + 2 * tau * lam - lam * lam / (1 - q * q) ** 2))


def param_to_model(q: float, lam: float, tau: float) -> tuple[float, float, float]:
    """(q, lam) -> (a, c, R)."""
    if not (0 < q < 1) or lam < 0:
        raise DomainError("param_to_model requires q in (0,1) and lam >= 0")
    if _radicand(q, lam, tau) <= 0:
        raise DomainError("radicand (1-q^2)^2 (1-tau^2+2 tau lam) - lam^2 is not positive")
    a, c = _a_c(q, lam, tau)
    return float(a), float(c), float(_radius(q, lam, tau))


def coupled_residuals(m: ExteriorMap, p: ModelParams) -> tuple[float, float, float]:
    """Residuals of the three coupled equations for (R, q, lam) against (a, c, tau)."""
    R, q, lam, t = m.R, m.q, m.lam, p.tau
    q2 = q * q
    r1 = R * R / (1 - t * t) * (1 - t * t + 2 * t * lam - lam * lam / (1 - q2) ** 2) - 1
    r2 = R * R * lam / (1 - t * t) * ((1 - t * q2) / q2 + lam / (1 - q2) ** 2) - p.c
    r3 = R / q * (1 + t * q2 - (1 - t * q2) / (1 - t) * lam / (1 - q2)) - p.a
    return r1, r2, r3


def _regime_ii_map(q, lam, tau) -> ExteriorMap:
    return ExteriorMap(MapKind.REGIME_II, tau=tau, R=float(_radius(q, lam, tau)), q=q, lam=lam)


@lru_cache(maxsize=64)
def _seed_table(tau: float):
    qs = (np.arange(_SEED_GRID) + 0.5) / _SEED_GRID
    ss = np.arange(_SEED_GRID) / _SEED_GRID
    lcri = np.array([lambda_critical(float(qq), tau) for qq in qs])
    Q = qs[:, None] * np.ones_like(ss)[None, :]
    L = lcri[:, None] * ss[None, :]
    with np.errstate(all="ignore"):
        a, c = _a_c(Q, L, tau)
    return Q, L, a, c


def _scaled_residual(a_m, c_m, p: ModelParams):
    return np.array([(a_m - p.a) / (1 + p.a), (c_m - p.c) / (1 + p.c)])


def _seeds(p: ModelParams, count: int):
    Q, L, a, c = _seed_table(p.tau)
    with np.errstate(all="ignore"):
        res = ((a - p.a) / (1 + p.a)) ** 2 + ((c - p.c) / (1 + p.c)) ** 2
    res = np.where(np.isfinite(res), res, np.inf)
    order = np.argsort(res, axis=None)[:count]
    idx = np.unravel_index(order, res.shape)
    return [(float(Q[i, j]), float(L[i, j])) for i, j in zip(*idx)]


def _newton(p: ModelParams, q: float, lam: float, tol: float, max_iter: int = 100):
    t = p.tau

    def F(qq, ll):
        a_m, c_m = _a_c(qq, ll, t)
        return _scaled_residual(a_m, c_m, p)

    def valid(qq, ll):
        return 0 < qq < 1 and ll >= 0 and _radicand(qq, ll, t) > 0

    r = F(q, lam)
    nr = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if nr < 1e-3 * tol:
            return q, lam, nr
        # complex-step Jacobian
        hq = 1e-30
        J = np.empty((2, 2))
        J[:, 0] = np.imag(_scaled_residual(*_a_c(q + 1j * hq, complex(lam), t), p)) / hq
        J[:, 1] = np.imag(_scaled_residual(*_a_c(complex(q), lam + 1j * hq, t), p)) / hq
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        while alpha > 1e-10:
            qn, ln = q + alpha * step[0], lam + alpha * step[1]
            if lam == 0 and ln < 0:
                ln = 0.0
            if valid(qn, ln):
                rn = F(qn, ln)
                nrn = float(np.linalg.norm(rn))
                if nrn < nr or nrn < tol:
                    break
            alpha *= 0.5
        else:
            break
        q, lam, r, nr = qn, ln, rn, nrn
    return q, lam, nr


def solve_map_params(p: ModelParams, tol: float = 1e-11, seed_rank: int = 0) -> ExteriorMap:
    """Regime II map parameters (R, q, lam) for the given (a, c, tau)."""
    t = p.tau
    if p.c == 0:
        if p.a <= 1 + t:
            raise OutOfRangeError("c = 0 with a <= 1 + tau has no Regime II map")
        q = 1 / p.a if t == 0 else (p.a - math.sqrt(p.a * p.a - 4 * t)) / (2 * t)
        return _regime_ii_map(q, 0.0, t)
    best = None
    seeds = _seeds(p, 8)
    if seed_rank:
        seeds = seeds[seed_rank:] + seeds[:seed_rank]
    for q0, l0 in seeds:
        q, lam, nr = _newton(p, q0, l0, tol)
        if nr < tol:
            best = (q, lam, nr)
            break
        if best is None or nr < best[2]:
            best = (q, lam, nr)
    q, lam, nr = best
    if nr >= tol:
        raise NoConvergenceError(f"Regime II solve did not converge (residual {nr:.3g})", nr)
    lcri = lambda_critical(q, t)
    if lam >= lcri:
        raise OutOfRangeError(f"converged lambda {lam} >= lambda_cri {lcri}")
    return _regime_ii_map(q, lam, t)


# ----------------------------------------------------------------------------
# Phase classification


def regime_i_margins(p: ModelParams) -> dict:
    a, c, t = p.a, p.c, p.tau
    if t == 0:
        return {"isotropic_upper_a": math.sqrt(1 + c) - math.sqrt(c) - a}
    a_switch = 2 * math.sqrt(2 * t * (1 + t) / (3 + t * t))
    rad = t * (1 - t - 2 * c * t) / (1 - t)
    root = 2 * math.sqrt(rad) if rad >= 0 else -2 * math.sqrt(-rad)
    return {
        "range1_a_switch": a_switch - a,
        "range1_a_upper": root - a,
        "range1_c_upper": (1 - t) / (2 * t) - c,
        "range2_a_lower": a - a_switch,
        "range2_a_upper": (1 + t) * math.sqrt(1 + c) - math.sqrt(c * (1 - t * t)) - a,
        "range2_c_upper": (1 - t) ** 3 / (2 * t * (3 + t * t)) - c,
    }


def regime_i_slack(margins: dict) -> float:
    """Signed slack of membership in Regime I, ignoring the internal range switch."""
    if "isotropic_upper_a" in margins:
        return margins["isotropic_upper_a"]
    if margins["range1_a_switch"] >= 0:
        return min(margins["range1_a_upper"], margins["range1_c_upper"])
    return min(margins["range2_a_upper"], margins["range2_c_upper"])


def in_regime_i(margins: dict) -> bool:
    if "isotropic_upper_a" in margins:
        return margins["isotropic_upper_a"] >= 0
    r1 = all(margins[k] >= 0 for k in ("range1_a_switch", "range1_a_upper", "range1_c_upper"))
    r2 = all(margins[k] >= 0 for k in ("range2_a_lower", "range2_a_upper", "range2_c_upper"))
    return r1 or r2


def classify_phase(p: ModelParams) -> PhaseLabel:
    margins = regime_i_margins(p)
    if in_regime_i(margins):
        return PhaseLabel(Regime.I, margins)
    try:
        m = solve_map_params(p)
    except OutOfRangeError as exc:
        return PhaseLabel(Regime.III, margins, detail=str(exc))
    except NoConvergenceError as exc:
        # a stall far from zero means (a, c) is outside the image of the
        # (q, lambda) parametrisation; a stall near zero is a solver failure
        if exc.residual > NO_SOLUTION_RESIDUAL:
            margins["regime_ii_residual"] = exc.residual
            return PhaseLabel(Regime.III, margins, detail=str(exc))
        raise
    lcri = lambda_critical(m.q, p.tau)
    margins["lambda_slack"] = lcri - m.lam
    margins["q_slack"] = 1 - m.q
    return PhaseLabel(Regime.II, margins, m)


def check_not_near_critical(p: ModelParams, phase: PhaseLabel, margin: float = NEAR_CRITICAL_MARGIN):
    """Raise NearCriticalError within `margin` of a phase boundary (c > 0 only)."""
    if p.c == 0:
        return
    if phase.regime is Regime.I:
        s = regime_i_slack(phase.margins)
        if s < margin:
            raise NearCriticalError(f"Regime I slack {s:.3g} below {margin}")
    elif phase.regime is Regime.II:
        s = min(phase.margins["lambda_slack"], phase.margins["q_slack"])
        if s < margin:
            raise NearCriticalError(f"Regime II slack {s:.3g} below {margin}")


def outer_map(p: ModelParams, phase: PhaseLabel | None = None) -> ExteriorMap:
    """Exterior map of the outer boundary for Regime I or II."""
    phase = phase or classify_phase(p)
    if phase.regime is Regime.I:
        return ellipse_map(p)
    if phase.regime is Regime.II:
        return phase.exterior_map
    raise PhaseError("Regime III is not supported")


# ----------------------------------------------------------------------------
# Droplet functionals


def contour_area_and_m1(m: ExteriorMap, n: int = CIRCLE_NODES) -> tuple[float, float]:
    """Area and first moment of the region enclosed by psi(circle), in dA units."""
    w = circle_nodes(n)
    z = _psi_raw(m, w, 0)
    dz = _psi_raw(m, w, 1) * 1j * w  # dz/dtheta
    # (1/(2 pi i)) * integral over theta
    area = np.mean(np.conj(z) * dz) / 1j
    m1 = np.mean(z * np.conj(z) * dz) / 1j
    return float(area.real), float(m1.real)


def droplet_area_and_m1(p: ModelParams, phase: PhaseLabel | None = None) -> tuple[float, float]:
    phase = phase or classify_phase(p)
    if phase.regime is Regime.I:
        return p.t0, -p.a * p.c * p.t0
    if phase.regime is Regime.II:
        return contour_area_and_m1(phase.exterior_map)
    raise PhaseError("Regime III is not supported")


def gauss_bonnet(m: ExteriorMap, n: int = CIRCLE_NODES) -> float:
    """Integral of curvature times arclength along psi(circle)."""
    w = circle_nodes(n)
    d1 = _psi_raw(m, w, 1)
    g = boundary_geometry_at(m, w)
    return float(2 * np.pi * np.mean(g.kappa * np.abs(d1)))


# ----------------------------------------------------------------------------
# Schwarz function and obstacle


def inverse_map(m: ExteriorMap, z: complex, max_iter: int = 50, tol: float = 1e-14) -> complex:
    """phi(z) = psi^{-1}(z) by Newton seeded from the Joukowski inverse."""
    if m.kind is MapKind.DISC:
        return (z - m.center) / m.radius
    s = m.derivative_at_infinity
    zeta = (z - m.translation) / s
    r = np.sqrt(complex(zeta * zeta - 4 * m.tau))
    if (zeta * r.conjugate()).real < 0:
        r = -r
    w = (zeta + r) / 2
    for _ in range(max_iter):
        f = complex(_psi_raw(m, w, 0)) - z
        dw = f / complex(_psi_raw(m, w, 1))
        w -= dw
        if abs(dw) < tol * max(1.0, abs(w)):
            return w
    raise SolverError("inversion of the exterior map did not converge in 50 steps")


def schwarz_function(m: ExteriorMap, z: complex) -> complex:
    w = inverse_map(m, z)
    return complex(np.conj(_psi_raw(m, 1 / np.conj(w), 0)))


def nearest_boundary_point(m: ExteriorMap, z: complex) -> tuple[complex, complex]:
    """(z0, w0) with z0 = psi(w0) on the boundary closest to z."""
    th = 2 * np.pi * np.arange(CIRCLE_NODES) / CIRCLE_NODES
    zs = _psi_raw(m, np.exp(1j * th), 0)
    k = int(np.argmin(np.abs(zs - z)))
    h = 2 * np.pi / CIRCLE_NODES
    res = minimize_scalar(lambda t: abs(complex(_psi_raw(m, np.exp(1j * t), 0)) - z),
                          bounds=(th[k] - h, th[k] + h), method="bounded",
                          options={"xatol": 1e-13})
    w0 = np.exp(1j * res.x)
    return complex(_psi_raw(m, w0, 0)), complex(w0)


@dataclass(frozen=True)
class ObstacleValue:
    schwarz: complex
    r_value: float
    z0: complex


def schwarz_obstacle(m: ExteriorMap, p: ModelParams, z: complex, z0: complex | None = None) -> ObstacleValue:
    """Schwarz function S(z) and the obstacle function R(z) near the outer boundary."""
    if not m.is_exterior:
        raise DomainError("schwarz_obstacle is defined for the outer boundary")
    if z0 is None:
        z0, _ = nearest_boundary_point(m, z)
    x, wts = np.polynomial.legendre.leggauss(32)
    s = 0.5 * (x + 1)
    u = z0 + s * (z - z0)
    sv = np.array([schwarz_function(m, complex(uu)) for uu in u])
    integral = 0.5 * np.sum(wts * sv) * (z - z0)
    r_val = (abs(z) ** 2 - abs(z0) ** 2 - 2 * integral.real) / p.t0
    return ObstacleValue(schwarz_function(m, z), float(r_val), z0)
