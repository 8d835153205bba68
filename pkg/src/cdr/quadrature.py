"""Homodyne quadrature statistics of the resonator field.

Quadrature convention: x_phi = (a e^{-i phi} + a^dag e^{i phi}) / 2, so a coherent
state has standard deviation 1/2 in every direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erfc, eval_genlaguerre, gammaln

SIGMA_COH = 0.5
# exp(-x^2) underflows to zero past this point
_X_LIMIT = 26.0


class GridError(ValueError):
    """Sampling grid does not cover the distribution."""


@dataclass(frozen=True)
class DetectionParams:
    eta: float = 1.0
    phi: float | str = "auto"

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"detection efficiency eta must be in (0, 1], got {self.eta}")
        if isinstance(self.phi, str) and self.phi != "auto":
            raise ValueError(f"phi must be a number or 'auto', got {self.phi!r}")


@dataclass
class QuadratureDistribution:
    x: np.ndarray
    values: np.ndarray
    phi: float
    eta: float

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def mass(self) -> float:
        return float(np.sum(self.values) * self.h)

    def mean(self) -> float:
        return float(np.sum(self.x * self.values) * self.h)

    def variance(self) -> float:
        m = self.mean()
        return float(np.sum((self.x - m) ** 2 * self.values) * self.h)


@dataclass
class ErrorReport:
    error: float
    threshold_error: float
    threshold: float


def hermite_functions(x, n_max: int) -> np.ndarray:
    """Oscillator eigenfunctions psi_0..psi_{n_max-1} at ``x``, shape (len(x), n_max).

    Normalized for x = (a + a^dag)/2, i.e. psi_0(x) = (2/pi)^(1/4) exp(-x^2).
    Uses the three-term recurrence on the normalized functions themselves.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size and np.max(np.abs(x)) > _X_LIMIT:
        raise GridError(f"|x| = {np.max(np.abs(x)):.3g} beyond the representable range")
    xi = math.sqrt(2.0) * x
    out = np.empty((x.size, n_max))
    out[:, 0] = (2.0 / math.pi) ** 0.25 * np.exp(-x * x)
    if n_max > 1:
        out[:, 1] = math.sqrt(2.0) * xi * out[:, 0]
    for n in range(1, n_max - 1):
        out[:, n + 1] = (math.sqrt(2.0 / (n + 1)) * xi * out[:, n]
                         - math.sqrt(n / (n + 1.0)) * out[:, n - 1])
    return out


def moments(rho: np.ndarray) -> tuple[complex, complex, float]:
    """(<a>, <a^2>, <a^dag a>) of a Fock-space density matrix."""
    n_max = rho.shape[0]
    sq = np.sqrt(np.arange(1, n_max))
    a1 = complex(np.sum(sq * np.diagonal(rho, -1)))
    a2 = complex(np.sum(sq[:-1] * sq[1:] * np.diagonal(rho, -2))) if n_max > 2 else 0j
    nbar = float(np.sum(np.arange(n_max) * np.diagonal(rho).real))
    return a1, a2, nbar


def quadrature_variance(rho: np.ndarray, phi: float) -> float:
    a1, a2, nbar = moments(rho)
    return (0.25 + 0.5 * nbar - 0.5 * abs(a1) ** 2
            + 0.5 * (np.exp(-2j * phi) * (a2 - a1 * a1)).real)


def squeezing(rho: np.ndarray, phi: float) -> float:
    """Normalized quadrature variance 4 Var(x_phi); below 1 means squeezed."""
    return 4.0 * quadrature_variance(rho, phi)


def conv_sigma(eta: float) -> float:
    return math.sqrt(1.0 / eta - 1.0) * SIGMA_COH


def make_grid(rhos, phi: float, eta: float = 1.0, n_points: int = 4096) -> np.ndarray:
    """Symmetric uniform grid wide enough for every state in ``rhos``."""
    half = 0.0
    for rho in rhos:
        a1, _, _ = moments(rho)
        mean = (a1 * np.exp(-1j * phi)).real
        sd = math.sqrt(max(quadrature_variance(rho, phi), 0.0) + conv_sigma(eta) ** 2)
        pops = np.diagonal(rho).real
        top = int(np.nonzero(pops > 1e-14)[0].max()) if np.any(pops > 1e-14) else 0
        half = max(half, abs(mean) + 8.0 * sd, math.sqrt(top + 0.5) + 3.0 + 8.0 * conv_sigma(eta))
    half = min(half, _X_LIMIT)
    return np.linspace(-half, half, n_points)


def ideal_density(rho: np.ndarray, phi: float, psi: np.ndarray) -> np.ndarray:
    """P(x) = sum_nm psi_n rho_nm psi_m e^{-i(n-m)phi} for precomputed ``psi``."""
    n = np.arange(rho.shape[0])
    rot = np.exp(-1j * n * phi)
    r = rot[:, None] * rho * rot.conj()[None, :]
    P = np.einsum("xn,xn->x", psi @ r, psi)
    if np.max(np.abs(P.imag)) > 1e-10:
        raise ValueError("quadrature density has an imaginary residue")
    return P.real


def gaussian_kernel(sigma: float, h: float) -> np.ndarray:
    m = int(math.ceil(8.0 * sigma / h))
    k = np.exp(-0.5 * (np.arange(-m, m + 1) * h / sigma) ** 2)
    return k / k.sum()


def apply_efficiency(values: np.ndarray, h: float, eta: float) -> np.ndarray:
    if eta == 1.0:
        return values
    k = gaussian_kernel(conv_sigma(eta), h)
    if k.size >= 2 * values.size:
        raise GridError("efficiency kernel wider than the grid")
    out = np.convolve(values, k, mode="same")
    return out / (np.sum(out) * h)


def distribution(rho: np.ndarray, det: DetectionParams | None = None, phi: float | None = None,
                 x: np.ndarray | None = None, n_points: int = 4096,
                 psi: np.ndarray | None = None) -> QuadratureDistribution:
    """Homodyne distribution of quadrature ``phi`` including detection efficiency."""
    det = det or DetectionParams()
    if phi is None:
        if det.phi == "auto":
            raise ValueError("phi='auto' needs both branches; pass phi explicitly")
        phi = float(det.phi)
    if x is None:
        x = make_grid([rho], phi, det.eta, n_points)
    if psi is None:
        psi = hermite_functions(x, rho.shape[0])
    h = float(x[1] - x[0])
    P = ideal_density(rho, phi, psi)
    trace = float(np.trace(rho).real)
    lost = trace - np.sum(P) * h
    if lost > 1e-8:
        raise GridError(f"probability mass {lost:.3g} lies outside the grid")
    P = P / (np.sum(P) * h)
    P = apply_efficiency(P, h, det.eta)
    return QuadratureDistribution(x=np.asarray(x), values=P, phi=phi, eta=det.eta)


def error_from_distributions(P0: QuadratureDistribution, P1: QuadratureDistribution) -> ErrorReport:
    """Min-overlap error 1/2 int min(P0, P1) dx, plus the best single-threshold error."""
    if P0.x.shape != P1.x.shape or not np.array_equal(P0.x, P1.x):
        raise ValueError("distributions are on different grids")
    if P0.phi != P1.phi or P0.eta != P1.eta:
        raise ValueError("distributions differ in phi or eta")
    h = P0.h
    err = 0.5 * trapezoid(np.minimum(P0.values, P1.values), dx=h)
    c0 = np.concatenate([[0.0], np.cumsum(P0.values) * h])
    c1 = np.concatenate([[0.0], np.cumsum(P1.values) * h])
    m0, m1 = c0[-1], c1[-1]
    # threshold between grid cells k-1 and k; assign x >= threshold to one branch
    e_a = 0.5 * ((m0 - c0) + c1)      # branch 1 below, branch 0 above
    e_b = 0.5 * (c0 + (m1 - c1))      # branch 0 below, branch 1 above
    e = np.minimum(e_a, e_b)
    k = int(np.argmin(e))
    edges = np.concatenate([[P0.x[0] - 0.5 * h], P0.x + 0.5 * h])
    return ErrorReport(error=float(err), threshold_error=float(e[k]), threshold=float(edges[k]))


def analytic_error(delta_lambda: float, eta: float = 1.0) -> float:
    """Coherent-state error (1 - erf(|dl| sqrt(eta/2)))/2."""
    if delta_lambda < 0:
        raise ValueError("delta_lambda must be >= 0")
    return 0.5 * float(erfc(delta_lambda * math.sqrt(eta / 2.0)))


def pair_error(rho0: np.ndarray, rho1: np.ndarray, phi: float, eta: float = 1.0,
               n_points: int = 4096, x=None, psi=None) -> tuple[ErrorReport, QuadratureDistribution,
                                                               QuadratureDistribution]:
    """Error for discriminating two field states along quadrature ``phi``."""
    if x is None:
        x = make_grid([rho0, rho1], phi, eta, n_points)
    if psi is None:
        psi = hermite_functions(x, rho0.shape[0])
    det = DetectionParams(eta=eta, phi=phi)
    P0 = distribution(rho0, det, phi, x=x, psi=psi)
    P1 = distribution(rho1, det, phi, x=x, psi=psi)
    return error_from_distributions(P0, P1), P0, P1


def phi_scan(rho0: np.ndarray, rho1: np.ndarray, eta: float = 1.0, n_angles: int = 64,
             n_points: int = 2048) -> tuple[float, float]:
    """Brute-force search over quadrature angles; returns (best phi, best error)."""
    best = (0.0, 1.0)
    for phi in np.linspace(0.0, math.pi, n_angles, endpoint=False):
        rep, _, _ = pair_error(rho0, rho1, float(phi), eta, n_points)
        if rep.error < best[1]:
            best = (float(phi), rep.error)
    return best


def wigner(rho: np.ndarray, xvec: np.ndarray, pvec: np.ndarray) -> np.ndarray:
    """Wigner function W(x, p) on a grid, normalized over dx dp, alpha = x + i p.

    Returns an array of shape (len(pvec), len(xvec)).
    """
    X, P = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float))
    alpha = X + 1j * P
    B = 4.0 * np.abs(alpha) ** 2
    log2a = np.log(np.maximum(2.0 * np.abs(alpha), 1e-300))
    phase = np.exp(1j * np.angle(alpha))
    W = np.zeros_like(X)
    n_max = rho.shape[0]
    for m in range(n_max):
        if abs(rho[m, m]) > 1e-15:
            W += (rho[m, m] * (-1) ** m).real * eval_genlaguerre(m, 0, B) * np.exp(-B / 2)
        for n in range(m + 1, n_max):
            if abs(rho[m, n]) < 1e-15:
                continue
            k = n - m
            mag = np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)) + k * log2a - B / 2)
            term = rho[m, n] * (-1) ** m * phase ** k * mag * eval_genlaguerre(m, k, B)
            W += 2.0 * term.real
    return (2.0 / math.pi) * W
