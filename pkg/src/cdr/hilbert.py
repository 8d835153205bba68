"""Truncated qubit x Fock space, the driven JC Hamiltonian and dressed states.

Basis ordering: |q, n> sits at index q * n_max + n.  The Hamiltonian is written in
the frame rotating at w_r for both the qubit and the resonator, so the resonator
term drops out and the qubit levels carry the (time-dependent) detuning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .pulse import (DrivePulse, QubitFreqPulse, Schedule, drive_envelope, ghz, mhz,
                    qubit_freq)


class TruncationError(ValueError):
    """Coherent-state tail does not fit in the Fock truncation."""


@dataclass(frozen=True)
class SpaceSpec:
    n_levels: int = 2
    n_max: int = 40

    def __post_init__(self):
        if self.n_levels not in (2, 3):
            raise ValueError(f"n_levels must be 2 or 3, got {self.n_levels}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_levels * self.n_max

    def index(self, q: int, n: int) -> int:
        return q * self.n_max + n


@dataclass(frozen=True)
class SystemParams:
    g: float
    omega_r: float
    drive: DrivePulse
    qubit_pulse: QubitFreqPulse
    schedule: Schedule
    space: SpaceSpec = field(default_factory=SpaceSpec)
    anharmonicity: float = 0.0
    tail_tol: float = 1e-9

    def __post_init__(self):
        if self.g < 0:
            raise ValueError(f"coupling g must be >= 0, got {self.g}")
        if self.space.n_levels == 3 and not self.anharmonicity > 0:
            raise ValueError("three-level qubit needs anharmonicity > 0")
        if not math.isclose(self.qubit_pulse.omega_r, self.omega_r, rel_tol=1e-12):
            raise ValueError("qubit pulse omega0 + Delta0 must equal omega_r")

    @property
    def n_levels(self) -> int:
        return self.space.n_levels

    @property
    def n_max(self) -> int:
        return self.space.n_max

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


def reference_params(Delta_mhz: float = 50.0, n_bar: float | None = None, t_qe: float = 30.0,
                 sigma_q: float = 3.0, t_q: float = 3.25, sigma_qe: float = 1.0,
                 n_levels: int = 2, anharmonicity_mhz: float = 200.0, n_max: int = 40,
                 g_mhz: float = 30.0, B0_mhz: float = 497.4, dt: float = 5e-4) -> SystemParams:
    """Parameter set of the reference two-stage readout (w_r/2pi = 7 GHz, w0/2pi = 6 GHz).

    With ``n_bar`` given, the drive amplitude is set so that |lambda_in|^2 = n_bar;
    otherwise ``B0_mhz`` is used as quoted.
    """
    omega_r, omega0 = ghz(7.0), ghz(6.0)
    if n_bar is None:
        drive = DrivePulse(B0=mhz(B0_mhz), t_B=3.0, tau_B=1.0, sigma_B=1.0)
    else:
        drive = DrivePulse.from_photon_number(n_bar, t_B=3.0, tau_B=1.0, sigma_B=1.0)
    qp = QubitFreqPulse(omega0=omega0, Delta0=omega_r - omega0, Delta=mhz(Delta_mhz),
                        t_q=t_q, t_qe=t_qe, sigma_q=sigma_q, sigma_qe=sigma_qe)
    return SystemParams(g=mhz(g_mhz), omega_r=omega_r, drive=drive, qubit_pulse=qp,
                        schedule=Schedule.from_pulses(drive, qp, dt=dt),
                        space=SpaceSpec(n_levels, n_max),
                        anharmonicity=mhz(anharmonicity_mhz) if n_levels == 3 else 0.0)


# -- operators ---------------------------------------------------------------

def destroy(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), 1).astype(complex)


def qubit_lower(n_levels: int) -> np.ndarray:
    """Ladder lowering operator with harmonic matrix elements sqrt(q)."""
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1).astype(complex)


def field_op(op: np.ndarray, n_levels: int) -> np.ndarray:
    return np.kron(np.eye(n_levels), op)


def qubit_op(op: np.ndarray, n_max: int) -> np.ndarray:
    return np.kron(op, np.eye(n_max))


def level_energies(omega_q: float, p: SystemParams) -> np.ndarray:
    """Rotating-frame qubit level energies for qubit frequency ``omega_q``."""
    d = omega_q - p.omega_r
    e = [0.0, d]
    if p.n_levels == 3:
        e.append(2.0 * d - p.anharmonicity)
    return np.array(e)


def static_parts(p: SystemParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coupling, drive quadrature a + a^dag, level projector weights) on the full space."""
    a = field_op(destroy(p.n_max), p.n_levels)
    sm = qubit_op(qubit_lower(p.n_levels), p.n_max)
    coupling = p.g * (a @ sm.conj().T + sm @ a.conj().T)
    return coupling, a + a.conj().T, a


def build_hamiltonian(t: float, p: SystemParams, drive_on: bool = True) -> np.ndarray:
    if not 0.0 <= t <= p.schedule.t_f * (1 + 1e-12):
        raise ValueError(f"t = {t} outside schedule [0, {p.schedule.t_f}]")
    coupling, xq, _ = static_parts(p)
    e = level_energies(float(qubit_freq(t, p.qubit_pulse)), p)
    H = coupling + np.diag(np.repeat(e, p.n_max)).astype(complex)
    if drive_on:
        H = H + float(drive_envelope(t, p.drive)) * xq
    return H


# -- dressed states ----------------------------------------------------------

@dataclass
class DressedPair:
    """Eigen-decomposition of one excitation block.

    ``labels[k]`` is the bare state (q, n - q) continuously connected to
    eigenvalue ``energies[k]`` / column ``vectors[:, k]``.
    """

    Delta: float
    n: int
    labels: list[tuple[int, int]]
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def splitting(self) -> float:
        return float(self.energies.max() - self.energies.min())


def _block(Delta: float, n: int, p: SystemParams):
    labels = [(q, n - q) for q in range(p.n_levels) if 0 <= n - q < p.n_max]
    omega_q = p.omega_r - Delta
    e = level_energies(omega_q, p)
    H = np.diag([e[q] for q, _ in labels]).astype(float)
    for i in range(1, len(labels)):
        q, m = labels[i]
        H[i, i - 1] = H[i - 1, i] = p.g * math.sqrt(q) * math.sqrt(m + 1)
    return labels, H


def _match(prev: np.ndarray, vecs: np.ndarray, vals: np.ndarray):
    overlap = np.abs(prev.conj().T @ vecs)
    order = np.argmax(overlap, axis=1)
    if len(set(order.tolist())) != len(order):
        raise ValueError("dressed-state labeling failed: ambiguous overlaps")
    v = vecs[:, order]
    # fix sign so the continuation stays smooth
    signs = np.sign(np.real(np.sum(prev.conj() * v, axis=0)))
    signs[signs == 0] = 1.0
    return vals[order], v * signs


def dressed_eigensystem(Delta: float, n: int, p: SystemParams, n_path: int = 64) -> DressedPair:
    """Dressed states of the n-excitation block at detuning ``Delta``.

    Labels are assigned at Delta0 (where |Delta0| >> g) by maximum overlap with the
    bare basis and then carried to ``Delta`` along a straight detuning path.
    """
    if n < 0:
        raise ValueError("excitation number must be >= 0")
    Delta0 = p.qubit_pulse.Delta0
    labels, H = _block(Delta0, n, p)
    if len(labels) == 0:
        raise ValueError(f"excitation number {n} outside truncation")
    vals, vecs = np.linalg.eigh(H)
    vals, vecs = _match(np.eye(len(labels)), vecs, vals)
    path = np.linspace(Delta0, Delta, n_path + 1)[1:] if Delta != Delta0 else []
    for d in path:
        _, H = _block(d, n, p)
        w, v = np.linalg.eigh(H)
        if len(w) > 1 and np.min(np.diff(w)) < 1e-12:
            raise ValueError("dressed-state labeling failed: degenerate eigenvalues")
        vals, vecs = _match(vecs, v, w)
    return DressedPair(Delta=Delta, n=n, labels=labels, energies=vals, vectors=vecs)


def dressed_basis(Delta: float, p: SystemParams) -> np.ndarray:
    """Unitary whose column at index(q, m) is the dressed state connected to |q, m>."""
    U = np.zeros((p.space.dim, p.space.dim), dtype=complex)
    for n in range(p.n_max + p.n_levels - 1):
        pair = dressed_eigensystem(Delta, n, p)
        idx = [p.space.index(q, m) for q, m in pair.labels]
        for k, (q, m) in enumerate(pair.labels):
            U[idx, p.space.index(q, m)] = pair.vectors[:, k]
    return U


# -- states -----------------------------------------------------------------

def required_n_max(n_bar: float, n_levels: int, tol: float) -> int:
    """Smallest truncation whose Poisson tail beyond n_max - n_levels is below ``tol``."""
    n_max = 2
    while poisson.sf(n_max - n_levels, n_bar) >= tol:
        n_max += 1
    return n_max


def check_truncation(n_bar: float, p: SystemParams) -> float:
    tail = float(poisson.sf(p.n_max - p.n_levels, n_bar))
    if tail >= p.tail_tol:
        raise TruncationError(
            f"Poisson tail {tail:.3g} beyond n_max - n_levels = {p.n_max - p.n_levels} "
            f"exceeds tolerance {p.tail_tol:.3g} for n_bar = {n_bar:.4g}; "
            f"need n_max >= {required_n_max(n_bar, p.n_levels, p.tail_tol)}")
    return tail


def coherent_amplitudes(lam: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes of |lam>, truncated (not renormalized)."""
    c = np.zeros(n_max, dtype=complex)
    if lam == 0:
        c[0] = 1.0
        return c
    n = np.arange(n_max)
    logmag = -0.5 * abs(lam) ** 2 + n * math.log(abs(lam)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * np.angle(lam))


@dataclass
class JointState:
    """Pure state vector or density matrix over the |q, n> product basis."""

    data: np.ndarray
    n_levels: int
    n_max: int
    time: float = 0.0

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def check(self, atol_norm: float = 1e-8, atol_herm: float = 1e-10, atol_psd: float = 1e-8):
        if self.is_pure:
            norm = np.vdot(self.data, self.data).real
            if abs(norm - 1) > atol_norm:
                raise ValueError(f"state norm {norm} deviates from 1")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > atol_herm:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1) > atol_norm:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        if np.linalg.eigvalsh(rho).min() < -atol_psd:
            raise ValueError("density matrix is not positive semidefinite")


def initial_state(qubit_init: int, lam: complex, p: SystemParams) -> JointState:
    """Empty resonator with the qubit in |0> or in the dressed |1,0> at t = 0."""
    check_truncation(abs(lam) ** 2, p)
    psi = np.zeros(p.space.dim, dtype=complex)
    if qubit_init == 0:
        psi[p.space.index(0, 0)] = 1.0
    elif qubit_init == 1:
        H0 = build_hamiltonian(0.0, p, drive_on=False)
        w, v = np.linalg.eigh(H0)
        k = int(np.argmax(np.abs(v[p.space.index(1, 0)])))
        psi = v[:, k]
        psi = psi * np.exp(-1j * np.angle(psi[p.space.index(1, 0)]))
    else:
        raise ValueError(f"qubit_init must be 0 or 1, got {qubit_init}")
    return JointState(psi, p.n_levels, p.n_max, 0.0)


def reduced_field(psi: np.ndarray, n_levels: int, n_max: int) -> np.ndarray:
    """Partial trace over the qubit of a pure joint state."""
    m = psi.reshape(n_levels, n_max)
    return m.T @ m.conj()
