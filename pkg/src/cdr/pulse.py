"""Control waveforms: the erf-smoothed drive envelope and qubit-frequency trajectory.

Angular frequencies are in rad/ns and times in ns throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

TWO_PI = 2.0 * math.pi
_SQRT2 = math.sqrt(2.0)


def mhz(f_over_2pi: float) -> float:
    """Convert an ordinary frequency in MHz to rad/ns."""
    return TWO_PI * f_over_2pi * 1e-3


def ghz(f_over_2pi: float) -> float:
    """Convert an ordinary frequency in GHz to rad/ns."""
    return TWO_PI * f_over_2pi


@dataclass(frozen=True)
class DrivePulse:
    """Resonator drive B(t) = B0/2 {erf[(t-t_B)/sqrt2 s_B] - erf[(t-t_B-tau_B)/sqrt2 s_B]}."""

    B0: float
    t_B: float = 3.0
    tau_B: float = 1.0
    sigma_B: float = 1.0

    def __post_init__(self):
        if self.B0 < 0:
            raise ValueError(f"drive amplitude B0 must be >= 0, got {self.B0}")
        if self.tau_B <= 0:
            raise ValueError(f"drive plateau tau_B must be > 0, got {self.tau_B}")
        if self.sigma_B <= 0:
            raise ValueError(f"drive ramp sigma_B must be > 0, got {self.sigma_B}")

    @classmethod
    def from_photon_number(cls, n_bar: float, **kw) -> "DrivePulse":
        """Pulse whose integral gives |lambda_in|^2 = n_bar exactly."""
        tau_B = kw.get("tau_B", cls.tau_B)
        return cls(B0=math.sqrt(n_bar) / tau_B, **kw)

    @property
    def center(self) -> float:
        """Center of the pulse, used as the start of the disperse stage."""
        return self.t_B + 0.5 * self.tau_B


@dataclass(frozen=True)
class QubitFreqPulse:
    """Qubit frequency w_q(t) = w0 + (D0-D)/2 {erf[(t-t_q)/sqrt2 s_q] - erf[(t-t_qe)/sqrt2 s_qe]}."""

    omega0: float
    Delta0: float
    Delta: float
    t_q: float = 3.25
    t_qe: float = 30.0
    sigma_q: float = 3.0
    sigma_qe: float = 1.0

    def __post_init__(self):
        if self.sigma_q <= 0 or self.sigma_qe <= 0:
            raise ValueError("qubit ramp widths sigma_q, sigma_qe must be > 0")

    @property
    def omega_r(self) -> float:
        return self.omega0 + self.Delta0


@dataclass(frozen=True)
class Schedule:
    t_f: float
    t_D: float
    dt: float = 5e-4

    def __post_init__(self):
        if not self.t_f > self.t_D > 0:
            raise ValueError(f"need t_f > t_D > 0, got t_f={self.t_f}, t_D={self.t_D}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    @classmethod
    def from_pulses(cls, drive: DrivePulse, qubit: QubitFreqPulse, dt: float = 5e-4) -> "Schedule":
        return cls(t_f=qubit.t_qe + 2.0 * qubit.sigma_qe, t_D=drive.center, dt=dt)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_f / self.dt)))

    @property
    def step(self) -> float:
        """Actual step, adjusted so that n_steps * step == t_f."""
        return self.t_f / self.n_steps


def _step_window(t, center0, sigma0, center1, sigma1):
    return 0.5 * (erf((t - center0) / (_SQRT2 * sigma0)) - erf((t - center1) / (_SQRT2 * sigma1)))


def drive_envelope(t, p: DrivePulse):
    """B(t) in rad/ns; accepts scalars or arrays."""
    return p.B0 * _step_window(np.asarray(t, dtype=float), p.t_B, p.sigma_B,
                               p.t_B + p.tau_B, p.sigma_B)


def qubit_freq(t, p: QubitFreqPulse):
    """w_q(t) in rad/ns; accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    return p.omega0 + (p.Delta0 - p.Delta) * _step_window(t, p.t_q, p.sigma_q, p.t_qe, p.sigma_qe)


def detuning(t, p: QubitFreqPulse):
    """Instantaneous detuning w_r - w_q(t)."""
    return p.omega_r - qubit_freq(t, p)


def lambda_in(p: DrivePulse) -> complex:
    """Coherent amplitude loaded by the drive, -i * integral of B(t) (closed form)."""
    return -1j * p.B0 * p.tau_B


def n_bar_integral(p: DrivePulse) -> float:
    return abs(lambda_in(p)) ** 2
