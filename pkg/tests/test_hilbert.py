import math

import numpy as np
import pytest
from dataclasses import replace

from cdr.hilbert import (SpaceSpec, TruncationError, build_hamiltonian, check_truncation, destroy,
                         dressed_basis, dressed_eigensystem, initial_state, reference_params,
                         reduced_field, required_n_max)
from cdr.pulse import DrivePulse, QubitFreqPulse, detuning, ghz, mhz


def flat(Delta_mhz, **kw):
    """Constant detuning (no qubit ramp) and no drive."""
    p = reference_params(**kw)
    omega_r = p.omega_r
    qp = QubitFreqPulse(omega0=omega_r - mhz(Delta_mhz), Delta0=mhz(Delta_mhz), Delta=mhz(Delta_mhz))
    return replace(p, qubit_pulse=qp, drive=DrivePulse(B0=0.0))


def test_uncoupled_hamiltonian_is_diagonal():
    p = replace(reference_params(g_mhz=0.0), drive=DrivePulse(B0=0.0))
    t = 12.0
    H = build_hamiltonian(t, p)
    assert np.count_nonzero(H - np.diag(np.diag(H))) == 0
    d = np.diag(H).real.reshape(2, p.n_max)
    np.testing.assert_allclose(d[0], 0.0)
    np.testing.assert_allclose(d[1], -detuning(t, p.qubit_pulse), rtol=1e-14)


def test_single_excitation_block():
    p = replace(flat(0.0), space=SpaceSpec(2, 2))
    H = build_hamiltonian(1.0, p)
    i01, i10 = p.space.index(0, 1), p.space.index(1, 0)
    assert H[i01, i10] == pytest.approx(p.g)
    assert H[i10, i01] == pytest.approx(p.g)


def test_three_level_ladder_elements():
    p = flat(300.0, n_levels=3, n_max=12)
    H = build_hamiltonian(2.0, p)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)
    for n in range(2, 12):
        el = H[p.space.index(2, n - 2), p.space.index(1, n - 1)]
        assert el == pytest.approx(math.sqrt(2) * p.g * math.sqrt(n - 1), rel=1e-14)
    # only blocks of equal excitation number couple when the drive is off
    N = np.add.outer(np.arange(3), np.arange(12)).ravel()
    rows, cols = np.nonzero(np.abs(H) > 0)
    assert np.all(N[rows] == N[cols])


def test_hamiltonian_hermitian_at_random_times():
    rng = np.random.default_rng(3)
    for n_levels in (2, 3):
        p = reference_params(n_levels=n_levels, n_max=20)
        for t in rng.uniform(0, p.schedule.t_f, 50):
            H = build_hamiltonian(t, p)
            assert np.max(np.abs(H - H.conj().T)) < 1e-12


def test_hamiltonian_rejects_time_outside_schedule():
    p = reference_params()
    with pytest.raises(ValueError):
        build_hamiltonian(-1.0, p)
    with pytest.raises(ValueError):
        build_hamiltonian(p.schedule.t_f + 1.0, p)


def test_ladder_algebra_below_truncation_edge():
    a = destroy(12)
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(11), atol=1e-14)
    n_op = a.conj().T @ a
    for n in range(1, 12):
        ket = np.zeros(12); ket[n] = 1
        np.testing.assert_allclose(n_op @ (a @ ket), (n - 1) * (a @ ket), atol=1e-13)


def test_resonant_doublet():
    p = flat(300.0)
    pair = dressed_eigensystem(0.0, 1, p)
    assert pair.splitting == pytest.approx(2 * p.g, rel=1e-12)
    for k in range(2):
        v = np.abs(pair.vectors[:, k])
        np.testing.assert_allclose(v, [1 / math.sqrt(2)] * 2, atol=1e-12)


def test_uncoupled_dressed_states_are_bare():
    p = flat(300.0, g_mhz=1e-9)
    D = mhz(80)
    pair = dressed_eigensystem(D, 5, p)
    assert pair.labels == [(0, 5), (1, 4)]
    np.testing.assert_allclose(np.abs(pair.vectors), np.eye(2), atol=1e-9)
    np.testing.assert_allclose(pair.energies, [0.0, -D], atol=1e-9)


@pytest.mark.parametrize("n", [1, 4, 9, 20])
@pytest.mark.parametrize("D_mhz", [-200.0, 0.0, 50.0, 1000.0])
def test_block_splitting_closed_form(n, D_mhz):
    p = flat(300.0)
    D = mhz(D_mhz)
    pair = dressed_eigensystem(D, n, p)
    assert pair.splitting == pytest.approx(math.sqrt(D ** 2 + 4 * p.g ** 2 * n), rel=1e-10)


def test_reference_splitting():
    p = flat(1000.0)
    pair = dressed_eigensystem(ghz(1.0), 9, p)
    assert pair.splitting / (2 * math.pi) == pytest.approx(math.sqrt(1 + 4 * 0.03 ** 2 * 9), rel=1e-10)
    assert pair.splitting / (2 * math.pi) == pytest.approx(1.01606, abs=2e-5)


def test_labels_follow_continuation_through_resonance():
    p = flat(1000.0)
    far = dressed_eigensystem(ghz(1.0), 3, p)
    near = dressed_eigensystem(mhz(-300.0), 3, p)
    # the avoided crossing keeps the |0,3> branch on top; past resonance it is mostly |1,2>
    assert far.energies[0] > far.energies[1]
    assert near.energies[0] > near.energies[1]
    assert abs(far.vectors[0, 0]) > 0.99
    assert abs(near.vectors[1, 0]) > 0.98


def test_three_level_block():
    p = flat(1000.0, n_levels=3, n_max=12)
    pair = dressed_eigensystem(mhz(60), 5, p)
    assert pair.labels == [(0, 5), (1, 4), (2, 3)]
    U = pair.vectors
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)


def test_dressed_basis_unitary():
    p = flat(1000.0, n_max=15)
    U = dressed_basis(p.qubit_pulse.Delta0, p)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(p.space.dim), atol=1e-12)


def test_initial_ground_state():
    p = reference_params()
    s = initial_state(0, -3j, p)
    e = np.zeros(p.space.dim); e[0] = 1
    np.testing.assert_array_equal(s.data, e)
    s.check()


def test_initial_excited_state_without_coupling():
    p = flat(1000.0, g_mhz=0.0)
    s = initial_state(1, -3j, p)
    assert abs(s.data[p.space.index(1, 0)]) == pytest.approx(1.0, abs=1e-15)


def test_initial_excited_state_overlap():
    p = flat(1000.0)
    s = initial_state(1, -3j, p)
    overlap = abs(s.data[p.space.index(1, 0)]) ** 2
    ratio = p.g / p.qubit_pulse.Delta0
    exact = 0.5 * (1 + 1 / math.sqrt(1 + 4 * ratio ** 2))
    assert overlap == pytest.approx(exact, abs=1e-12)
    assert abs(overlap - (1 - ratio ** 2)) < 3 * ratio ** 4
    assert overlap == pytest.approx(0.9991, abs=1e-4)


def test_truncation_check():
    p = reference_params()
    assert check_truncation(9.0, p) < 1e-9
    with pytest.raises(TruncationError):
        initial_state(0, math.sqrt(15.0), p)
    n = required_n_max(15.0, 2, 1e-9)
    assert check_truncation(15.0, replace(p, space=SpaceSpec(2, n))) < 1e-9
    with pytest.raises(TruncationError):
        check_truncation(15.0, replace(p, space=SpaceSpec(2, n - 1)))


def test_reduced_field_trace():
    p = reference_params(n_max=10)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=p.space.dim) + 1j * rng.normal(size=p.space.dim)
    psi /= np.linalg.norm(psi)
    rho = reduced_field(psi, 2, 10)
    full = np.outer(psi, psi.conj()).reshape(2, 10, 2, 10)
    np.testing.assert_allclose(rho, np.einsum("qnqm->nm", full), atol=1e-14)


@pytest.mark.parametrize("kw", [dict(n_levels=4), dict(n_max=1)])
def test_space_spec_rejects(kw):
    with pytest.raises(ValueError):
        SpaceSpec(**kw)


def test_three_level_needs_anharmonicity():
    with pytest.raises(ValueError):
        reference_params(n_levels=3, anharmonicity_mhz=0.0)
