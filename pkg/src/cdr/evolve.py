"""Time propagation of the driven JC system and the per-step readout log."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .hilbert import (JointState, SystemParams, build_hamiltonian, check_truncation,
                      dressed_basis, initial_state, reduced_field)
from .pulse import drive_envelope, lambda_in, qubit_freq
from .quadrature import (DetectionParams, conv_sigma, distribution, error_from_distributions,
                         hermite_functions, moments, squeezing)

log = logging.getLogger(__name__)

NORM_ABORT = 1e-6


class PropagationError(RuntimeError):
    pass


@dataclass
class FieldState:
    """Reduced resonator density matrix rho_nm."""

    rho: np.ndarray
    time: float
    joint: JointState | None = field(default=None, repr=False)

    def check(self, atol_herm: float = 1e-10, atol_tr: float = 1e-8, atol_pop: float = 1e-10):
        r = self.rho
        if np.max(np.abs(r - r.conj().T)) > atol_herm:
            raise ValueError("field density matrix is not Hermitian")
        if abs(np.trace(r).real - 1.0) > atol_tr:
            raise ValueError(f"field trace {np.trace(r).real} deviates from 1")
        if np.diagonal(r).real.min() < -atol_pop:
            raise ValueError("negative photon-number population")

    def moments(self):
        return moments(self.rho)


def effective_amplitude(f: FieldState | np.ndarray, check: bool = True) -> complex:
    """lambda_eff = sum_n sqrt(n) rho_{n,n-1}, cross-checked against Tr(a rho)."""
    rho = f.rho if isinstance(f, FieldState) else f
    n = rho.shape[0]
    lam = complex(np.sum(np.sqrt(np.arange(1, n)) * rho[np.arange(1, n), np.arange(0, n - 1)]))
    if check:
        a = np.diag(np.sqrt(np.arange(1, n)), 1)
        tr = complex(np.trace(a @ rho))
        if abs(tr - lam) > 1e-12 * max(1.0, abs(lam)):
            raise AssertionError(f"lambda_eff {lam} != Tr(a rho) {tr}")
    return lam


def _samples(p: SystemParams, n_steps: int, dt: float):
    t = np.arange(2 * n_steps + 1) * (0.5 * dt)
    d = qubit_freq(t, p.qubit_pulse) - p.omega_r
    cols = [np.zeros_like(d), d]
    if p.n_levels == 3:
        cols.append(2.0 * d - p.anharmonicity)
    energies = np.ascontiguousarray(np.stack(cols, axis=1))
    drive = np.ascontiguousarray(drive_envelope(t, p.drive))
    return energies, drive


Observer = Callable[[float, Sequence[np.ndarray]], None]


def propagate_many(states: Sequence[JointState], p: SystemParams, observer: Observer | None = None,
                   log_every: int = 50, dt: float | None = None, t_end: float | None = None,
                   method: str = "rk4") -> list[JointState]:
    """Propagate several joint states in lockstep from t = 0 to ``t_end`` (default t_f).

    ``observer(t, psis)`` is called at t = 0, every ``log_every`` steps and at the end;
    the arrays it receives are views that must not be modified.
    """
    t_end = p.schedule.t_f if t_end is None else t_end
    dt = p.schedule.dt if dt is None else dt
    n_steps = max(1, int(round(t_end / dt)))
    dt = t_end / n_steps
    for s in states:
        if s.time != 0.0:
            raise ValueError("propagation starts at t = 0")
        if not s.is_pure:
            raise ValueError("propagation works on pure states")
    L, N = p.n_levels, p.n_max
    psis = [np.array(s.data, dtype=complex).reshape(L, N) for s in states]
    norms0 = [np.vdot(x, x).real for x in psis]
    energies, drive = _samples(p, n_steps, dt)
    sq = np.sqrt(np.arange(max(L, N) + 1, dtype=float))
    if observer is not None:
        observer(0.0, [x.ravel() for x in psis])
    i = 0
    while i < n_steps:
        j = min(n_steps, i + log_every)
        for x in psis:
            if method == "rk4":
                _kernels.rk4_chunk(x, i, j, dt, energies, drive, p.g, sq)
            elif method == "expm":
                _expm_chunk(x, i, j, dt, p)
            else:
                raise ValueError(f"unknown method {method!r}")
        i = j
        for x, n0 in zip(psis, norms0):
            drift = abs(np.vdot(x, x).real - n0)
            if not math.isfinite(drift) or drift > NORM_ABORT:
                raise PropagationError(
                    f"norm drift {drift:.3g} at t = {i * dt:.4f} ns exceeds {NORM_ABORT:g}; "
                    f"reduce dt (currently {dt * 1e3:.3g} ps)")
        if observer is not None:
            observer(i * dt, [x.ravel() for x in psis])
    return [JointState(x.ravel().copy(), L, N, t_end) for x in psis]


def _expm_chunk(psi: np.ndarray, i0: int, i1: int, dt: float, p: SystemParams):
    flat = psi.ravel()
    for i in range(i0, i1):
        H = build_hamiltonian((i + 0.5) * dt, p)
        flat[:] = expm(-1j * dt * H) @ flat


def propagate(state: JointState, p: SystemParams, observer: Callable | None = None,
              **kw) -> JointState:
    """Propagate one state through the schedule; ``observer(t, psi)`` sees each log point."""
    obs = None if observer is None else (lambda t, psis: observer(t, psis[0]))
    return propagate_many([state], p, obs, **kw)[0]


@dataclass
class TimeSeries:
    """Synchronized per-record log of both qubit branches."""

    t: np.ndarray
    lam: np.ndarray          # (2, T) lambda_eff per branch
    a_mean: np.ndarray       # (2, T) <a>
    a2_mean: np.ndarray      # (2, T) <a^2>
    n_mean: np.ndarray       # (2, T) <a^dag a>
    populations: np.ndarray  # (2, T, n_levels) qubit level populations
    phi: np.ndarray
    squeeze: np.ndarray      # (2, T) 4 Var(x_phi)
    error: np.ndarray

    @property
    def delta_lambda(self) -> np.ndarray:
        return np.abs(self.lam[1] - self.lam[0])

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t_ns": self.t,
            "re_lam0": self.lam[0].real, "im_lam0": self.lam[0].imag,
            "re_lam1": self.lam[1].real, "im_lam1": self.lam[1].imag,
            "delta_lambda": self.delta_lambda, "phi_rad": self.phi,
            "squeeze0": self.squeeze[0], "squeeze1": self.squeeze[1],
            "error": self.error,
        }


def measurement_angle(lam0: complex, lam1: complex, det: DetectionParams) -> float:
    if det.phi == "auto":
        return float(np.angle(lam1 - lam0))
    return float(det.phi)


def series_grid(n_max: int, eta: float, n_points: int) -> np.ndarray:
    """Fixed grid covering every Fock state inside the truncation."""
    half = min(math.sqrt(n_max + 0.5) + 3.0 + 8.0 * conv_sigma(eta), 26.0)
    return np.linspace(-half, half, n_points)


def run_both_branches(p: SystemParams, det: DetectionParams | None = None, log_every: int = 50,
                      series_points: int = 1024, error_every: int = 1, **kw):
    """Propagate the |0> and dressed |1,0> branches; returns (TimeSeries, field0, field1).

    The error column is evaluated every ``error_every`` records (NaN elsewhere) on a
    ``series_points`` grid; the final-time error should be taken from
    :func:`final_readout`, which uses the full grid.
    """
    det = det or DetectionParams()
    lam = lambda_in(p.drive)
    states = [initial_state(0, lam, p), initial_state(1, lam, p)]
    x = series_grid(p.n_max, det.eta, series_points)
    psi_x = hermite_functions(x, p.n_max)
    rec = {k: [] for k in ("t", "lam", "a2", "n", "pops", "phi", "sq", "err")}

    def observer(t, psis):
        rhos = [reduced_field(s, p.n_levels, p.n_max) for s in psis]
        mom = [moments(r) for r in rhos]
        lams = [effective_amplitude(r) for r in rhos]
        phi = measurement_angle(lams[0], lams[1], det)
        rec["t"].append(t)
        rec["lam"].append(lams)
        rec["a2"].append([m[1] for m in mom])
        rec["n"].append([m[2] for m in mom])
        rec["pops"].append([np.sum(np.abs(s.reshape(p.n_levels, p.n_max)) ** 2, axis=1) for s in psis])
        rec["phi"].append(phi)
        rec["sq"].append([squeezing(r, phi) for r in rhos])
        if (len(rec["t"]) - 1) % error_every == 0:
            d = DetectionParams(eta=det.eta, phi=phi)
            P0 = distribution(rhos[0], d, phi, x=x, psi=psi_x)
            P1 = distribution(rhos[1], d, phi, x=x, psi=psi_x)
            rec["err"].append(error_from_distributions(P0, P1).error)
        else:
            rec["err"].append(np.nan)

    finals = propagate_many(states, p, observer, log_every=log_every, **kw)
    lam_arr = np.array(rec["lam"]).T
    series = TimeSeries(
        t=np.array(rec["t"]), lam=lam_arr, a_mean=lam_arr.copy(),
        a2_mean=np.array(rec["a2"]).T, n_mean=np.array(rec["n"]).T,
        populations=np.transpose(np.array(rec["pops"]), (1, 0, 2)),
        phi=np.array(rec["phi"]), squeeze=np.array(rec["sq"]).T, error=np.array(rec["err"]))
    fields = [FieldState(reduced_field(s.data, p.n_levels, p.n_max), s.time, s) for s in finals]
    return series, fields[0], fields[1]


def final_fields(p: SystemParams, **kw) -> tuple[FieldState, FieldState]:
    """Final field states of both branches without per-step logging."""
    lam = lambda_in(p.drive)
    states = [initial_state(0, lam, p), initial_state(1, lam, p)]
    finals = propagate_many(states, p, None, log_every=kw.pop("log_every", 1 << 30), **kw)
    f = [FieldState(reduced_field(s.data, p.n_levels, p.n_max), s.time, s) for s in finals]
    return f[0], f[1]


@dataclass
class Readout:
    error: float
    threshold_error: float
    threshold: float
    phi: float
    delta_lambda: float
    lam0: complex
    lam1: complex
    squeeze0: float
    squeeze1: float
    P0: object
    P1: object


def final_readout(f0: FieldState, f1: FieldState, det: DetectionParams | None = None,
                  n_points: int = 4096) -> Readout:
    """Readout statistics from the field states at t_f (instantaneous release)."""
    from .quadrature import pair_error
    det = det or DetectionParams()
    lam0, lam1 = effective_amplitude(f0), effective_amplitude(f1)
    phi = measurement_angle(lam0, lam1, det)
    rep, P0, P1 = pair_error(f0.rho, f1.rho, phi, det.eta, n_points)
    return Readout(error=rep.error, threshold_error=rep.threshold_error, threshold=rep.threshold,
                   phi=phi, delta_lambda=abs(lam1 - lam0), lam0=lam0, lam1=lam1,
                   squeeze0=squeezing(f0.rho, phi), squeeze1=squeezing(f1.rho, phi), P0=P0, P1=P1)


def survival(psi: np.ndarray, level: int, p: SystemParams, U: np.ndarray | None = None) -> float:
    """Probability of the dressed (at Delta0) qubit level ``level`` with any photon number."""
    U = dressed_basis(p.qubit_pulse.Delta0, p) if U is None else U
    c = U.conj().T @ psi
    return float(np.sum(np.abs(c[level * p.n_max:(level + 1) * p.n_max]) ** 2))


def non_qndness(p: SystemParams, finals: Sequence[JointState] | None = None, **kw) -> dict:
    """Probability that the readout changes the initial qubit state.

    Returns {"value": 1 - min survival, "branch0": ..., "branch1": ...}.
    """
    if finals is None:
        f0, f1 = final_fields(p, **kw)
        finals = [f0.joint, f1.joint]
    U = dressed_basis(p.qubit_pulse.Delta0, p)
    loss = [1.0 - survival(s.data, q, p, U) for q, s in enumerate(finals)]
    return {"value": max(loss), "branch0": loss[0], "branch1": loss[1]}
