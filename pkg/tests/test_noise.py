import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from pamlab.grid_spectral import BoxSpec, forward_transform, ortho_to_true
from pamlab.noise import (
    MollifierSpec,
    UnderResolvedError,
    bump,
    bump_autocorrelation,
    calibrate_log_law,
    counterterm,
    covariance_diag_1d,
    covariance_matrix_1d,
    enhance,
    mode_variances,
    mollify,
    renorm_constant_exact,
    renorm_constant_log,
    rho_profile,
    sample_white_noise,
    shell_index,
)

# counterterm slope at L = 64 over eps = 2^-3..2^-8, frozen from a reference run
FROZEN_SLOPE_L64 = 0.3182522376294124


def test_shell_index_is_a_bijection():
    N = 12
    k = np.arange(N)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    idx = np.sort(shell_index(K1, K2).ravel())
    assert np.array_equal(idx, np.arange(N * N))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**40), st.sampled_from([9, 17, 33]))
def test_noise_nested_across_resolutions(seed, n_coarse):
    fine = sample_white_noise(BoxSpec(3.0, 65), seed)
    coarse = sample_white_noise(BoxSpec(3.0, n_coarse), seed)
    assert np.array_equal(coarse.g, fine.g[:n_coarse, :n_coarse])
    assert np.array_equal(fine.restricted(BoxSpec(3.0, n_coarse)).g, coarse.g)


def test_noise_deterministic_and_standard():
    a = sample_white_noise(BoxSpec(4.0, 129), 7)
    b = sample_white_noise(BoxSpec(4.0, 129), 7)
    assert np.array_equal(a.g, b.g)
    assert abs(a.g.mean()) < 5 / 129
    assert a.g.var() == pytest.approx(1.0, abs=5 * np.sqrt(2) / 129)
    with pytest.raises(ValueError):
        sample_white_noise(BoxSpec(4.0, 9), -1)


def test_bump_unit_mass_and_support():
    x, w = np.polynomial.legendre.leggauss(200)
    assert np.sum(0.5 * w * bump(0.5 * x)) == pytest.approx(1.0, rel=1e-12)
    assert bump(np.array([0.5, -0.6]))[0] == 0.0
    s = np.linspace(-1, 1, 4001)
    assert np.trapezoid(bump_autocorrelation(s), s) == pytest.approx(1.0, rel=1e-6)


def test_rho_profile_two_routes():
    z, w = np.polynomial.legendre.leggauss(200)
    z = 0.5 * (z + 1)
    w = 0.5 * w
    R = bump_autocorrelation(z)
    for x in (0.0, 1.3, 4.0, 11.0):
        direct = 2.0 * np.sum(w * R * np.cos(x * z))
        assert rho_profile(np.array([x]))[0] == pytest.approx(direct, abs=1e-12)


def test_convolution_covariance_against_quadrature():
    L, eps = 2.0, 0.5
    A = covariance_matrix_1d(6, L, eps)

    def n(k, x):
        return (1 / np.sqrt(L) if k == 0 else np.sqrt(2 / L)) * np.cos(np.pi * k * x / L)

    for k, l in [(0, 0), (1, 1), (2, 4), (3, 1), (5, 5)]:

        def f(y, x):
            return n(k, x) * n(l, y) * bump_autocorrelation(np.array([(x - y) / eps]))[0] / eps

        v, _ = integrate.dblquad(f, 0, L, lambda x: max(0, x - eps), lambda x: min(L, x + eps), epsabs=1e-11)
        assert A[k, l] == pytest.approx(v, abs=1e-9)
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() > -1e-12
    assert np.allclose(covariance_diag_1d(6, L, eps), np.diag(A))


@pytest.mark.parametrize("route", ["fourier", "convolution"])
def test_mollified_variance_matches_mode_variances(route):
    box = BoxSpec(2.0, 17)
    spec = MollifierSpec(0.25, route)
    coeffs = np.stack(
        [ortho_to_true(forward_transform(mollify(sample_white_noise(box, s), spec)).coeffs, box) for s in range(600)]
    )
    emp = coeffs.var(axis=0)[:5, :5]
    exact = mode_variances(box, spec)[:5, :5]
    assert np.all(np.abs(emp - exact) < 5 * np.sqrt(2.0 / 600) * exact + 1e-12)


def test_under_resolved_mollifier_rejected():
    with pytest.raises(UnderResolvedError):
        mollify(sample_white_noise(BoxSpec(4.0, 17), 0), MollifierSpec(0.1))


def test_renorm_constant_exact_matches_bruteforce():
    L, eps = 2.0, 0.5
    K = int(L / eps) + 1
    k = np.arange(-K, K + 1)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    from pamlab.grid_spectral import plateau

    tau = plateau(eps * K1 / L) * plateau(eps * K2 / L)
    brute = np.sum(tau**2 / (L**2 + 0.5 * np.pi**2 * (K1**2 + K2**2)))
    assert renorm_constant_exact(L, eps) == pytest.approx(brute, rel=1e-12)


def test_renorm_constant_unbounded_profile_converges():
    gauss = lambda x: np.exp(-(x**2))  # noqa: E731
    a = renorm_constant_exact(4.0, 0.25, profile=gauss, support=None, tol=1e-10)
    b = renorm_constant_exact(4.0, 0.25, profile=gauss, support=None, tol=1e-12)
    assert a == pytest.approx(b, abs=1e-9)


def test_renorm_constant_log_law():
    assert renorm_constant_log(np.exp(-2.0), 0.3, prefactor=0.5) == pytest.approx(1.3)
    with pytest.raises(ValueError):
        renorm_constant_log(0.0, 1.0)


def test_counterterm_slope_frozen():
    slope, _ = calibrate_log_law(64.0)
    assert slope == pytest.approx(FROZEN_SLOPE_L64, rel=1e-10)
    assert slope * np.pi == pytest.approx(1.0, abs=0.005)


def test_counterterm_matches_quarter_exact_constant_slope():
    eps = [2.0**-j for j in range(3, 8)]
    L = 8.0
    ct = [counterterm(BoxSpec(L, int(2 * L / e) + 1), MollifierSpec(e)) for e in eps]
    ex = [0.25 * renorm_constant_exact(L, e) for e in eps]
    x = np.log(1 / np.array(eps))
    assert np.polyfit(x, ct, 1)[0] == pytest.approx(np.polyfit(x, ex, 1)[0], rel=0.02)


def test_enhance_rejects_nonfinite_constant():
    xi = mollify(sample_white_noise(BoxSpec(2.0, 17), 0), MollifierSpec(0.25))
    with pytest.raises(ValueError):
        enhance(xi, float("nan"))
    en = enhance(xi, 0.7)
    assert en.c_eps == 0.7 and en.Xi.box == xi.box


def test_mode_variance_and_independence_monte_carlo():
    box = BoxSpec(2.0, 9)
    g = np.stack([sample_white_noise(box, s).g for s in range(10_000)])
    modes = [(0, 0), (1, 0), (0, 1), (2, 3), (4, 4), (8, 1), (5, 7), (3, 8), (6, 2), (8, 8)]
    for k in modes:
        assert 0.97 <= g[:, k[0], k[1]].var() <= 1.03
    for k, l in zip(modes, modes[1:]):
        assert abs(np.mean(g[:, k[0], k[1]] * g[:, l[0], l[1]])) < 0.03


def test_large_eps_keeps_only_constant_mode():
    box = BoxSpec(2.0, 17)
    nc = sample_white_noise(box, 3)
    xi = mollify(nc, MollifierSpec(2.0))
    assert np.allclose(xi.values, nc.g[0, 0] / box.L, atol=1e-12)


def test_convolution_covariance_parity_and_limit():
    A = covariance_matrix_1d(12, 3.0, 0.5)
    k = np.arange(12)
    odd = (k[:, None] + k[None, :]) % 2 == 1
    assert np.all(A[odd] == 0.0)
    from pamlab.noise import covariance_kernel

    assert covariance_kernel((0, 0), (0, 0), 1e-4, 3.0) == pytest.approx(1.0, abs=1e-3)
    assert covariance_kernel((1, 2), (2, 2), 0.5, 3.0) == 0.0


def test_rho_profile_even_and_normalized():
    x = np.linspace(0.0, 30.0, 61)
    assert rho_profile(np.array([0.0]))[0] == pytest.approx(1.0, rel=1e-12)
    assert np.array_equal(rho_profile(x), rho_profile(-x))


def test_exact_constant_differences_shrink_in_L():
    c = [renorm_constant_exact(L, 2.0**-5) for L in (4.0, 8.0, 16.0)]
    assert abs(c[2] - c[1]) < abs(c[1] - c[0])


def test_log_law_halving_step():
    a = renorm_constant_log(0.1, 0.2)
    b = renorm_constant_log(0.05, 0.2)
    assert b - a == pytest.approx(np.log(2.0) / (2.0 * np.pi), rel=1e-12)
    assert renorm_constant_log(1.0, 0.0) == 0.0


def test_enhance_zero_noise():
    from pamlab.grid_spectral import GridField

    box = BoxSpec(2.0, 17)
    en = enhance(GridField(box, np.zeros((17, 17))), 0.0)
    assert np.array_equal(en.Xi.values, np.zeros((17, 17)))
