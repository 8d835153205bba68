import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid
from scipy.special import eval_hermite, factorial

from cdr.quadrature import (DetectionParams, GridError, QuadratureDistribution, analytic_error,
                            apply_efficiency, distribution, error_from_distributions,
                            hermite_functions, make_grid, moments, pair_error, phi_scan,
                            quadrature_variance, squeezing, wigner)

from conftest import coherent_rho

X = np.linspace(-12, 12, 4001)


def psi_direct(n, x):
    """Textbook form via Hermite polynomials, valid for moderate n."""
    xi = math.sqrt(2) * x
    return (2 / math.pi) ** 0.25 / math.sqrt(2.0 ** n * factorial(n)) * eval_hermite(n, xi) * np.exp(-x * x)


def test_hermite_matches_polynomial_form():
    psi = hermite_functions(X, 25)
    for n in range(25):
        np.testing.assert_allclose(psi[:, n], psi_direct(n, X), atol=1e-10)


def test_hermite_normalization():
    psi = hermite_functions(X, 40)
    norms = trapezoid(psi ** 2, X, axis=0)
    np.testing.assert_allclose(norms, 1.0, atol=1e-8)
    gram = trapezoid(psi[:, :, None] * psi[:, None, :], X, axis=0)
    np.testing.assert_allclose(gram, np.eye(40), atol=1e-8)


def test_hermite_parity_and_vacuum_variance():
    psi = hermite_functions(np.array([0.0]), 5)
    assert psi[0, 1] == 0.0
    psi0 = hermite_functions(X, 1)[:, 0]
    assert trapezoid(X ** 2 * psi0 ** 2, X) == pytest.approx(0.25, abs=1e-12)


def test_hermite_guard():
    with pytest.raises(GridError):
        hermite_functions(np.array([40.0]), 3)


@pytest.mark.parametrize("phi", [0.0, 0.7, -2.0])
def test_vacuum_distribution(phi):
    P = distribution(coherent_rho(0), phi=phi)
    assert P.mass() == pytest.approx(1.0, abs=1e-6)
    assert P.mean() == pytest.approx(0.0, abs=1e-12)
    assert P.variance() == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize("lam,phi", [(2 - 1j, 0.0), (2 - 1j, 1.1), (-1.5j, -0.4), (3.0, math.pi / 3)])
def test_coherent_distribution_is_shifted_gaussian(lam, phi):
    # generous cutoff: the amplitude tail enters the density linearly
    P = distribution(coherent_rho(lam, 70), phi=phi)
    mean = (lam * np.exp(-1j * phi)).real
    gauss = np.exp(-(P.x - mean) ** 2 / (2 * 0.25)) / math.sqrt(2 * math.pi * 0.25)
    np.testing.assert_allclose(P.values, gauss, atol=1e-9)
    assert P.mean() == pytest.approx(mean, abs=1e-8)
    assert P.variance() == pytest.approx(0.25, abs=1e-6)


def test_unit_efficiency_is_identity():
    v = np.random.default_rng(1).random(100)
    assert apply_efficiency(v, 0.1, 1.0) is v
    rho = coherent_rho(1 + 1j)
    x = make_grid([rho], 0.3)
    a = distribution(rho, DetectionParams(eta=1.0), phi=0.3, x=x)
    from cdr.quadrature import ideal_density
    b = ideal_density(rho, 0.3, hermite_functions(x, 40))
    np.testing.assert_array_equal(a.values, b / (np.sum(b) * (x[1] - x[0])))


def test_efficiency_broadens_to_expected_variance():
    rho = coherent_rho(1.2 - 0.5j)
    P = distribution(rho, DetectionParams(eta=0.5), phi=0.0)
    # coherent variance 1/4 plus kernel variance (1/eta - 1)/4
    assert P.variance() == pytest.approx(0.5, rel=1e-4)
    assert P.mass() == pytest.approx(1.0, abs=1e-10)


def test_grid_coverage_violation():
    rho = coherent_rho(3.0)
    with pytest.raises(GridError):
        distribution(rho, phi=0.0, x=np.linspace(-2, 2, 512))


def test_auto_phi_needs_explicit_angle():
    with pytest.raises(ValueError):
        distribution(coherent_rho(0), DetectionParams(phi="auto"))


def _coherent_pair(dl, phi=0.4, offset=0.3 - 0.8j):
    d = 0.5 * dl * np.exp(1j * phi)
    return coherent_rho(offset - d), coherent_rho(offset + d), phi


def test_identical_distributions():
    rho = coherent_rho(1 - 1j)
    rep, _, _ = pair_error(rho, rho, 0.2)
    assert rep.error == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("eta,expected", [(1.0, 1.35e-3), (0.5, 1.69e-2)])
def test_coherent_pair_error(eta, expected):
    r0, r1, phi = _coherent_pair(3.0)
    rep, _, _ = pair_error(r0, r1, phi, eta)
    oracle = 0.5 * math.erfc(3.0 * math.sqrt(eta / 2))
    assert rep.error == pytest.approx(oracle, rel=1e-3)
    assert rep.error == pytest.approx(expected, rel=0.01)
    # symmetric Gaussians: the best threshold sits midway and gives the same error
    assert rep.threshold_error == pytest.approx(rep.error, rel=1e-3)


def test_threshold_location_midway():
    r0, r1, phi = _coherent_pair(2.0, phi=0.0, offset=0.5)
    rep, _, _ = pair_error(r0, r1, phi)
    assert rep.threshold == pytest.approx(0.5, abs=0.01)


def test_error_requires_common_grid():
    P0 = QuadratureDistribution(np.linspace(-1, 1, 5), np.ones(5), 0.0, 1.0)
    P1 = QuadratureDistribution(np.linspace(-2, 2, 5), np.ones(5), 0.0, 1.0)
    with pytest.raises(ValueError):
        error_from_distributions(P0, P1)


def test_analytic_error_limits():
    assert analytic_error(0.0) == 0.5
    assert analytic_error(60.0) == 0.0
    assert analytic_error(3.0) == pytest.approx(1.35e-3, rel=2e-3)
    with pytest.raises(ValueError):
        analytic_error(-1.0)


@settings(max_examples=25, deadline=None)
@given(dl=st.floats(0.5, 5.0), eta=st.sampled_from([1.0, 0.5]), phi=st.floats(-math.pi, math.pi))
def test_grid_error_matches_closed_form(dl, eta, phi):
    r0, r1, phi = _coherent_pair(dl, phi)
    rep, _, _ = pair_error(r0, r1, phi, eta)
    assert rep.error == pytest.approx(analytic_error(dl, eta), rel=1e-3)


@settings(max_examples=15, deadline=None)
@given(e1=st.floats(0.2, 1.0), e2=st.floats(0.2, 1.0), seed=st.integers(0, 1000))
def test_error_monotone_in_efficiency(e1, e2, seed):
    hi, lo = max(e1, e2), min(e1, e2)
    rng = np.random.default_rng(seed)
    r0 = _random_rho(rng, 12)
    r1 = _random_rho(rng, 12)
    x = make_grid([r0, r1], 0.0, lo, 2048)
    E_hi = pair_error(r0, r1, 0.0, hi, x=x)[0].error
    E_lo = pair_error(r0, r1, 0.0, lo, x=x)[0].error
    assert E_hi <= E_lo + 1e-12


def _random_rho(rng, n):
    A = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    A *= np.exp(-0.3 * np.arange(n))[:, None]
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), phi=st.floats(-math.pi, math.pi))
def test_distribution_moments_match_operator_moments(seed, phi):
    rho = _random_rho(np.random.default_rng(seed), 15)
    P = distribution(rho, phi=phi)
    a1, _, _ = moments(rho)
    assert P.mass() == pytest.approx(1.0, abs=1e-6)
    assert np.all(P.values >= -1e-12)
    assert P.mean() == pytest.approx((a1 * np.exp(-1j * phi)).real, abs=1e-8)
    assert P.variance() == pytest.approx(quadrature_variance(rho, phi), abs=1e-6)


def test_moments_of_coherent_state():
    lam = 1.3 - 0.4j
    a1, a2, n = moments(coherent_rho(lam))
    assert a1 == pytest.approx(lam, abs=1e-12)
    assert a2 == pytest.approx(lam ** 2, abs=1e-12)
    assert n == pytest.approx(abs(lam) ** 2, abs=1e-12)


@pytest.mark.parametrize("lam", [0, 1 + 1j, -2.5j, 3.0])
def test_squeezing_of_coherent_state(lam):
    for phi in np.linspace(0, math.pi, 7):
        assert squeezing(coherent_rho(lam), phi) == pytest.approx(1.0, abs=1e-10)


def test_squeezed_vacuum_variance():
    # S(r) vacuum: Var(x_0) = e^{-2r}/4 with x = (a + a^dag)/2
    r, n_max = 0.4, 40
    c = np.zeros(n_max, dtype=complex)
    for m in range(n_max // 2):
        n = 2 * m
        c[n] = (-np.tanh(r)) ** m * math.sqrt(math.factorial(n)) / (2 ** m * math.factorial(m))
    c /= math.sqrt(math.cosh(r))
    rho = np.outer(c, c.conj())
    assert squeezing(rho, 0.0) == pytest.approx(math.exp(-2 * r), rel=1e-8)
    assert squeezing(rho, math.pi / 2) == pytest.approx(math.exp(2 * r), rel=1e-8)
    P = distribution(rho, phi=0.0)
    assert 4 * P.variance() == pytest.approx(math.exp(-2 * r), rel=1e-6)


def test_wigner_vacuum():
    xs = np.linspace(-4, 4, 161)
    W = wigner(coherent_rho(0, 10), xs, xs)
    assert W[80, 80] == pytest.approx(2 / math.pi, rel=1e-12)
    h = xs[1] - xs[0]
    assert W.sum() * h * h == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("lam", [1.5 - 0.5j, -2j])
def test_wigner_coherent_is_displaced_vacuum(lam):
    xs = np.linspace(-6, 6, 121)
    W = wigner(coherent_rho(lam, 50), xs, xs)
    X, P = np.meshgrid(xs, xs)
    expected = 2 / math.pi * np.exp(-2 * ((X - lam.real) ** 2 + (P - lam.imag) ** 2))
    np.testing.assert_allclose(W, expected, atol=1e-9)


def test_wigner_marginal_reproduces_distribution():
    rho = _random_rho(np.random.default_rng(7), 12)
    xs = np.linspace(-7, 7, 281)
    W = wigner(rho, xs, xs)
    h = xs[1] - xs[0]
    marginal = W.sum(axis=0) * h
    P = distribution(rho, phi=0.0, x=xs)
    np.testing.assert_allclose(marginal, P.values, atol=1e-4)
    assert W.sum() * h * h == pytest.approx(1.0, abs=1e-4)


def test_phi_scan_finds_separation_direction():
    r0, r1, phi = _coherent_pair(2.0, phi=0.9)
    best_phi, best_err = phi_scan(r0, r1, n_angles=64)
    assert best_err == pytest.approx(analytic_error(2.0), rel=0.02)
    assert min(abs(best_phi - 0.9), abs(best_phi - 0.9 - math.pi)) < math.pi / 64 + 1e-9


def test_detection_params_validation():
    with pytest.raises(ValueError):
        DetectionParams(eta=0.0)
    with pytest.raises(ValueError):
        DetectionParams(eta=1.2)
    with pytest.raises(ValueError):
        DetectionParams(phi="best")
