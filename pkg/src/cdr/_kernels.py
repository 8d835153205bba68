"""numba kernels for the structured JC Hamiltonian.

psi has shape (n_levels, n_max).  The action of H is applied directly from its
ladder structure; no matrix is formed.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def apply_h(psi, e, b, g, sq, out):
    L, N = psi.shape
    for q in range(L):
        for n in range(N):
            acc = e[q] * psi[q, n]
            if n > 0:
                acc += b * sq[n] * psi[q, n - 1]
            if n < N - 1:
                acc += b * sq[n + 1] * psi[q, n + 1]
                if q > 0:
                    acc += g * sq[q] * sq[n + 1] * psi[q - 1, n + 1]
            if q < L - 1 and n > 0:
                acc += g * sq[q + 1] * sq[n] * psi[q + 1, n - 1]
            out[q, n] = acc


@njit(cache=True)
def _deriv(psi, e, b, g, sq, out):
    apply_h(psi, e, b, g, sq, out)
    for q in range(psi.shape[0]):
        for n in range(psi.shape[1]):
            out[q, n] = -1j * out[q, n]


@njit(cache=True)
def rk4_chunk(psi, i0, i1, dt, energies, drive, g, sq):
    """Advance psi in place from step i0 to i1.

    energies[k] and drive[k] are sampled at t = k * dt / 2, so step i uses
    samples 2i, 2i + 1 and 2i + 2.
    """
    k1 = np.empty_like(psi)
    k2 = np.empty_like(psi)
    k3 = np.empty_like(psi)
    k4 = np.empty_like(psi)
    tmp = np.empty_like(psi)
    h = dt
    for i in range(i0, i1):
        j = 2 * i
        _deriv(psi, energies[j], drive[j], g, sq, k1)
        for q in range(psi.shape[0]):
            for n in range(psi.shape[1]):
                tmp[q, n] = psi[q, n] + 0.5 * h * k1[q, n]
        _deriv(tmp, energies[j + 1], drive[j + 1], g, sq, k2)
        for q in range(psi.shape[0]):
            for n in range(psi.shape[1]):
                tmp[q, n] = psi[q, n] + 0.5 * h * k2[q, n]
        _deriv(tmp, energies[j + 1], drive[j + 1], g, sq, k3)
        for q in range(psi.shape[0]):
            for n in range(psi.shape[1]):
                tmp[q, n] = psi[q, n] + h * k3[q, n]
        _deriv(tmp, energies[j + 2], drive[j + 2], g, sq, k4)
        for q in range(psi.shape[0]):
            for n in range(psi.shape[1]):
                psi[q, n] += h / 6.0 * (k1[q, n] + 2.0 * k2[q, n] + 2.0 * k3[q, n] + k4[q, n])
