"""Closed-form and quadrature models used as oracles for the numerical propagation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erfcinv

from .hilbert import SystemParams
from .pulse import QubitFreqPulse, detuning, lambda_in

QUAD_TOL = 1e-10
RATE_FLOOR = 1e-9  # rad/ns, below numerical noise of |dl|


def _integrate(f, a: float, b: float, p: QubitFreqPulse, tol: float = QUAD_TOL) -> float:
    if b == a:
        return 0.0
    # ramp centers as breakpoints keep the adaptive rule from stepping over them
    pts = [c for c in (p.t_q, p.t_qe) if min(a, b) < c < max(a, b)]
    val, _ = quad(f, a, b, epsabs=tol, epsrel=0.0, limit=500, points=pts or None)
    return val


@dataclass(frozen=True)
class DispersiveModel:
    g: float
    qubit_pulse: QubitFreqPulse
    lam_in: complex
    t_D: float

    @classmethod
    def from_params(cls, p: SystemParams) -> "DispersiveModel":
        return cls(g=p.g, qubit_pulse=p.qubit_pulse, lam_in=lambda_in(p.drive), t_D=p.drive.center)

    @property
    def n_bar(self) -> float:
        return abs(self.lam_in) ** 2

    def validity_ratio(self, t_end: float) -> float:
        """min |Delta| / (g sqrt(n_bar + 1)) over [0, t_end]; large means dispersive."""
        if self.g == 0:
            return math.inf
        t = np.linspace(0.0, t_end, 2001)
        return float(np.min(np.abs(detuning(t, self.qubit_pulse)))
                     / (self.g * math.sqrt(self.n_bar + 1.0)))


@dataclass
class DispersivePhases:
    phi: float
    lam0: complex
    lam1: complex

    @property
    def delta_lambda(self) -> float:
        return abs(self.lam1 - self.lam0)


def dispersive_phase(t: float, m: DispersiveModel, tol: float = QUAD_TOL) -> float:
    """phi(t) = int_0^t g^2 / Delta(t') dt'."""
    ts = np.linspace(0.0, t, 513)
    d = detuning(ts, m.qubit_pulse)
    if np.any(d == 0) or np.any(np.sign(d) != np.sign(d[0])):
        raise ValueError("detuning crosses zero; dispersive phase undefined")
    if m.g == 0:
        return 0.0
    return _integrate(lambda s: m.g ** 2 / float(detuning(s, m.qubit_pulse)), 0.0, t,
                      m.qubit_pulse, tol)


def dispersive_phases(t: float, m: DispersiveModel, tol: float = QUAD_TOL) -> DispersivePhases:
    """Linear-dispersive amplitudes lambda_0 = lam_in e^{-i phi}, lambda_1 = lam_in e^{i phi}."""
    phi = dispersive_phase(t, m, tol)
    return DispersivePhases(phi=phi, lam0=m.lam_in * np.exp(-1j * phi),
                            lam1=m.lam_in * np.exp(1j * phi))


def separation(lam_in: complex, phi: float) -> float:
    return 2.0 * abs(lam_in) * abs(math.sin(phi))


def adiabatic_phase(n: int, branch: int, t: float, p: SystemParams, tol: float = QUAD_TOL) -> float:
    """Phase of the dressed ladder state with n photons, accumulated from t_D to t.

    Branch 1 uses the (n+1)-excitation doublet, so phase(n, 1) == phase(n+1, 0).
    """
    if branch not in (0, 1):
        raise ValueError("branch must be 0 or 1")
    t_D = p.drive.center
    if t < t_D:
        raise ValueError(f"t = {t} precedes the disperse stage start t_D = {t_D}")
    k = 4.0 * p.g ** 2 * (n + branch)
    if k == 0:
        return 0.0

    def rate(s):
        d = float(detuning(s, p.qubit_pulse))
        return 0.5 * (math.sqrt(d * d + k) - d)

    return _integrate(rate, t_D, t, p.qubit_pulse, tol)


def lambda_eff_approx(branch: int, t: float, p: SystemParams, tol: float = QUAD_TOL) -> complex:
    """Large-amplitude estimate of lambda_eff including the JC nonlinearity."""
    lam = lambda_in(p.drive)
    if p.g == 0 or t <= p.drive.center:
        return complex(lam)
    n_eff = abs(lam) ** 2 + branch
    sign = -1.0 if branch == 0 else 1.0

    def rate(s):
        d = float(detuning(s, p.qubit_pulse))
        return p.g ** 2 / math.sqrt(d * d + 4.0 * p.g ** 2 * n_eff)

    return complex(lam * np.exp(sign * 1j * _integrate(rate, p.drive.center, t, p.qubit_pulse, tol)))


def nonlinearity_ratio(p: SystemParams) -> float:
    """|lambda_in|^2 / (Delta^2 / 4 g^2); above 1 is the nonlinear regime."""
    D = p.qubit_pulse.Delta
    return abs(lambda_in(p.drive)) ** 2 * 4.0 * p.g ** 2 / (D * D) if D else math.inf


def saturated_angular_speed(p: SystemParams) -> float:
    """Limit of |d arg(lambda_eff)/dt| for 4 g^2 |lambda_in|^2 >> Delta^2."""
    return p.g / (2.0 * abs(lambda_in(p.drive)))


@dataclass
class RateReport:
    max_rate: float
    ratio: float
    violated: bool


def separation_rate_bound(t, delta_lambda, g: float, headroom: float = 1.1) -> RateReport:
    """Largest finite-difference d|dl|/dt compared with the bound g."""
    t = np.asarray(t, dtype=float)
    dl = np.asarray(delta_lambda, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 records")
    rate = float(np.max(np.gradient(dl, t)))
    rate = max(rate, 0.0)
    if g > 0:
        ratio = rate / g
    else:
        # finite differences of a constant series are not exactly zero
        rate = 0.0 if rate <= RATE_FLOOR else rate
        ratio = 0.0 if rate == 0.0 else math.inf
    return RateReport(max_rate=rate, ratio=ratio, violated=ratio > headroom)


def min_photon_estimate(target_error: float, eta: float = 1.0,
                        separation_factor: float = math.sqrt(2.0)) -> float:
    """Crude photon number needed to reach ``target_error`` with coherent states.

    Assumes the two branches end up separated by |dl| = separation_factor * |lambda_in|
    (sqrt(2): a quarter turn between them; 2: opposite amplitudes).
    """
    if not 0.0 < target_error <= 0.5:
        raise ValueError("target error must be in (0, 0.5]")
    dl = float(erfcinv(2.0 * target_error)) * math.sqrt(2.0 / eta)
    return (dl / separation_factor) ** 2
