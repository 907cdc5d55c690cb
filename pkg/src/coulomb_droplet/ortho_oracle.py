"""Finite-N planar orthogonal polynomials from Gram matrices.

For integer cN the weight |z-a|^{2cN} exp(-N Q_e(z)) is a polynomial times a
Gaussian, so tensor Gauss-Hermite quadrature in the principal axes of Q_e
integrates every moment exactly once the node count exceeds half the degree.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from .actions import f1_leading_coefficient
from .errors import DomainError, PhaseError, QuadratureError
from .geometry import ExteriorMap, ModelParams, Regime, classify_phase, droplet_area_and_m1

N_MAX = 16
_LOG_MIN_PIVOT = math.log(1e-250)


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Hermite node counts along the major and minor axes of Q_e."""

    nodes_major: int = 64
    nodes_minor: int = 64
    tolerance: float = 1e-10
    check_doubling: bool = True

    def __post_init__(self):
        for n in (self.nodes_major, self.nodes_minor):
            if n < 64 or n > 4096 or n & (n - 1):
                raise DomainError("node counts must be powers of two in [64, 4096]")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.nodes_major, 2 * self.nodes_minor, self.tolerance, False)


@dataclass(frozen=True)
class MomentMatrix:
    G: np.ndarray
    achieved_tolerance: float
    hermitian_residual: float
    imag_residual: float


@dataclass(frozen=True)
class OrthoSummary:
    N: int
    log_h: tuple
    A_coeffs: tuple
    B_coeffs: tuple
    log_Z: float
    coefficients: np.ndarray = field(repr=False)
    achieved_tolerance: float = 0.0
    min_log_pivot: float = 0.0

    def monic(self, n: int) -> np.ndarray:
        """Coefficients of P_n in increasing powers, length n + 1."""
        return self.coefficients[n, : n + 1].copy()


@lru_cache(maxsize=32)
def _hermite_rule(n: int):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COULOMB_DROPLET_THREADS", "1")))
    except ValueError:
        return 1


def integer_charge(p: ModelParams, N: int) -> int:
    m = p.c * N
    r = round(m)
    if abs(m - r) > 1e-9 * max(1.0, m):
        raise DomainError(f"cN = {m} is not an integer")
    return int(r)


def _raw_moments(p: ModelParams, N: int, M: int, m: int, nx: int, ny: int, kappa: float) -> np.ndarray:
    t = p.tau
    # N kappa ((1-tau) x^2 + (1+tau) y^2) = u^2 + v^2
    sx = 1.0 / math.sqrt(N * kappa * (1 - t))
    sy = 1.0 / math.sqrt(N * kappa * (1 + t))
    ux, wx = _hermite_rule(nx)
    vy, wy = _hermite_rule(ny)
    x = (sx * ux)[:, None] * np.ones(ny)[None, :]
    y = np.ones(nx)[:, None] * (sy * vy)[None, :]
    z = (x + 1j * y).ravel()
    wt = (wx[:, None] * wy[None, :]).ravel() * ((x - p.a) ** 2 + y ** 2).ravel() ** m
    wt *= sx * sy / math.pi
    powers = z[:, None] ** np.arange(M)[None, :]
    conj_w = np.conj(powers) * wt[:, None]

    def entry(jk):
        j, k = jk
        prod = powers[:, j] * conj_w[:, k]
        return j, k, math.fsum(prod.real), math.fsum(prod.imag)

    pairs = [(j, k) for j in range(M) for k in range(M)]
    G = np.empty((M, M), dtype=complex)
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(entry, pairs))
    else:
        results = [entry(jk) for jk in pairs]
    for j, k, re, im in results:
        G[j, k] = re + 1j * im
    return G


def moment_matrix(p: ModelParams, N: int, M: int, q: QuadratureSpec = QuadratureSpec(),
                  weight_scale: float | None = None) -> MomentMatrix:
    """G_jk = int z^j conj(z)^k |z-a|^{2cN} exp(-N kappa (|z|^2 - tau Re z^2)) dA.

    kappa defaults to 1/(1-tau^2), the model potential; other values give the
    rescaled potential used by the partition-function scaling identity.
    """
    if int(N) != N or not 1 <= N <= N_MAX:
        raise DomainError(f"N must be an integer in [1, {N_MAX}]")
    if not 1 <= M <= N + 2:
        raise DomainError("M must lie in [1, N + 2]")
    m = integer_charge(p, N)
    kappa = 1.0 / p.t0 if weight_scale is None else weight_scale
    degree = 2 * (M - 1) + 2 * m
    if 2 * min(q.nodes_major, q.nodes_minor) - 1 < degree:
        raise QuadratureError(f"{min(q.nodes_major, q.nodes_minor)} nodes cannot integrate degree {degree}")
    G = _raw_moments(p, N, M, m, q.nodes_major, q.nodes_minor, kappa)
    diag = np.sqrt(np.abs(np.diag(G).real))
    scale = diag[:, None] * diag[None, :]
    herm = float(np.max(np.abs(G - G.conj().T) / scale))
    imag = float(np.max(np.abs(G.imag) / scale))
    achieved = 0.0
    if q.check_doubling:
        d = q.doubled()
        G2 = _raw_moments(p, N, M, m, d.nodes_major, d.nodes_minor, kappa)
        achieved = float(np.max(np.abs(G2 - G) / scale))
        if achieved > q.tolerance:
            raise QuadratureError(f"node doubling changed entries by {achieved:.3g} > {q.tolerance}")
    return MomentMatrix(G, achieved, herm, imag)


def ortho_from_moments(G: np.ndarray, N: int, achieved_tolerance: float = 0.0) -> OrthoSummary:
    """Norms and monic coefficients from a scaled LDL* factorisation of G."""
    G = np.asarray(G)
    M = G.shape[0]
    if M < N:
        raise DomainError("Gram matrix smaller than N")
    if np.max(np.abs(G.imag)) <= 1e-13 * np.max(np.abs(np.diag(G))):
        G = G.real
    d = np.sqrt(np.abs(np.diag(G)))
    if np.any(np.diag(G).real <= 0):
        raise QuadratureError("non-positive diagonal moment")
    S = G / (d[:, None] * d[None, :])
    try:
        C = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError("moment matrix is not positive definite") from exc
    piv = np.abs(np.diag(C))
    log_pivots = 2 * np.log(piv)
    if np.min(log_pivots) < _LOG_MIN_PIVOT or not np.all(np.isfinite(log_pivots)):
        raise QuadratureError("pivot below 1e-250")
    log_h = 2 * np.log(d) + log_pivots
    Ls = C / piv[None, :]
    Linv_s = solve_triangular(Ls, np.eye(M, dtype=Ls.dtype), lower=True, unit_diagonal=True)
    coeffs = d[:, None] * Linv_s / d[None, :]
    if np.iscomplexobj(coeffs):
        coeffs = coeffs.real
    A = tuple(float(coeffs[n, n - 1]) if n >= 1 else 0.0 for n in range(M))
    B = tuple(float(coeffs[n, n - 2]) if n >= 2 else 0.0 for n in range(M))
    log_z = math.lgamma(N + 1) + math.fsum(log_h[:N])
    return OrthoSummary(N, tuple(float(v) for v in log_h[:N]), A, B, float(log_z), coeffs,
                        achieved_tolerance, float(np.min(log_pivots)))


def oracle(p: ModelParams, N: int, M: int | None = None, q: QuadratureSpec = QuadratureSpec(),
           weight_scale: float | None = None) -> OrthoSummary:
    M = N + 2 if M is None else M
    mm = moment_matrix(p, N, M, q, weight_scale)
    return ortho_from_moments(mm.G, N, mm.achieved_tolerance)


# ----------------------------------------------------------------------------
# Deformation identities


@dataclass(frozen=True)
class DeformationCheck:
    residual: float
    residual_half_step: float
    finite_difference: float
    identity_value: float

    @property
    def richardson_ratio(self) -> float:
        return self.residual / self.residual_half_step if self.residual_half_step else math.inf


def _central(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def a_identity_rhs(p: ModelParams, N: int, summary: OrthoSummary) -> float:
    return 2 * N / (1 + p.tau) * summary.A_coeffs[N]


def tau_identity_rhs(p: ModelParams, N: int, A_NN: float, B_NN: float, A_N1N: float, B_N1N: float) -> float:
    t = p.tau
    bracket = (t * (1 + 2 * p.c) * N + t + (B_NN + B_N1N - A_NN * A_N1N)
               - 2 * t * p.a / (1 + t) * A_NN)
    return -N / (1 - t * t) * bracket


def deformation_check_a(p: ModelParams, N: int, q: QuadratureSpec = QuadratureSpec(),
                        h_step: float = 1e-4) -> DeformationCheck:
    base = oracle(p, N, N + 1, q)
    rhs = a_identity_rhs(p, N, base)

    def logz(a):
        return oracle(p.replace(a=a), N, N, q).log_Z

    fd = _central(logz, p.a, h_step)
    fd2 = _central(logz, p.a, h_step / 2)
    return DeformationCheck(abs(fd - rhs), abs(fd2 - rhs), fd, rhs)


def deformation_residual_a(p: ModelParams, N: int, q: QuadratureSpec = QuadratureSpec(),
                           h_step: float = 1e-4) -> float:
    return deformation_check_a(p, N, q, h_step).residual


def deformation_check_tau(p: ModelParams, N: int, q: QuadratureSpec = QuadratureSpec(),
                          h_step: float = 1e-4) -> DeformationCheck:
    base = oracle(p, N, N + 2, q)
    rhs = tau_identity_rhs(p, N, base.A_coeffs[N], base.B_coeffs[N], base.A_coeffs[N + 1], base.B_coeffs[N + 1])

    def logz(t):
        return oracle(p.replace(tau=t), N, N, q).log_Z

    fd = _central(logz, p.tau, h_step)
    fd2 = _central(logz, p.tau, h_step / 2)
    return DeformationCheck(abs(fd - rhs), abs(fd2 - rhs), fd, rhs)


def deformation_residual_tau(p: ModelParams, N: int, q: QuadratureSpec = QuadratureSpec(),
                             h_step: float = 1e-4) -> float:
    return deformation_check_tau(p, N, q, h_step).residual


def scaling_identity_residual(p: ModelParams, n: int, N: int, q: QuadratureSpec = QuadratureSpec()) -> float:
    """Max deviation between P_{n,N}(z; a, c) and (n/N)^{n/2} P_{n,n}(sqrt(N/n) z; sqrt(N/n) a, (N/n) c)."""
    left = oracle(p, N, n + 1, q).monic(n)
    r = N / n
    p2 = p.replace(a=p.a * math.sqrt(r), c=p.c * r)
    right = oracle(p2, n, n + 1, q).monic(n)
    j = np.arange(n + 1)
    rescaled = right * (1 / r) ** ((n - j) / 2)
    return float(np.max(np.abs(left - rescaled)))


def rescaled_log_z(p: ModelParams, N: int, q: QuadratureSpec = QuadratureSpec()) -> float:
    """log Z_N via the potential rescaled by sqrt(1-tau^2) plus the explicit prefactor."""
    t0 = p.t0
    tilde = p.replace(a=p.a / math.sqrt(t0))
    base = oracle(tilde, N, N, q, weight_scale=1.0).log_Z
    return ((1 + 2 * p.c) / 2 * N * N + N / 2) * math.log(t0) + base


# ----------------------------------------------------------------------------
# Coefficient predictions


@dataclass(frozen=True)
class RegimeICoefficients:
    A_NN: float
    B_NN: float
    A_N1N: float
    B_N1N: float


def predicted_coefficients_regime_i(p: ModelParams, N: int, check_phase: bool = True) -> RegimeICoefficients:
    if check_phase and classify_phase(p).regime is not Regime.I:
        raise PhaseError("Regime I coefficients need Regime I parameters")
    a, c, t = p.a, p.c, p.tau
    b = c * c * a * a * N * N / 2 + (c * a * a / 2 - t * (1 + c) ** 2 / 2) * N
    return RegimeICoefficients(a * c * N, b + t * (1 + c) / 2, a * c * N, b - t * (1 + c) / 2)


@dataclass(frozen=True)
class HoleFilling:
    degree: int
    subleading: float
    subsubleading: float
    hermite_subsubleading: float


def hole_filling(p: ModelParams, N: int, summary: OrthoSummary) -> HoleFilling:
    """Top coefficients of (z - a)^{cN} P_{N,N}(z) against the elliptic Hermite pattern."""
    m = integer_charge(p, N)
    poly = np.polynomial.polynomial.polymul(
        np.polynomial.polynomial.polypow([-p.a, 1.0], m), summary.monic(N))
    n = N + m
    return HoleFilling(n, float(poly[n - 1]), float(poly[n - 2]),
                       -p.tau * (1 + p.c) * ((1 + p.c) * N - 1) / 2)


def predicted_a_regime_ii(p: ModelParams, m: ExteriorMap, N: int, phase=None) -> float:
    """A_{N,N} ~ -M1/(1-tau^2) N + f1/N for a simply connected droplet."""
    phase = phase or classify_phase(p)
    if phase.regime is not Regime.II:
        raise PhaseError("Regime II prediction needs Regime II parameters")
    _, m1 = droplet_area_and_m1(p, phase)
    return -m1 / p.t0 * N + f1_leading_coefficient(m, p) / N
