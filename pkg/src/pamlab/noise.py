"""White noise on a box, mollification, covariance kernels and renormalization constants.

White noise on ``Q_L`` is represented by one standard normal ``g_k`` per cosine
mode ``k in N_0^2``.  Normals are drawn from a Philox stream keyed by the seed in
a shell ordering of the modes, so a realization on a coarse grid is exactly the
low-mode corner of the same realization on a finer grid.

Two mollification routes are provided:

* ``fourier``: ``xi_eps = sum_k tau(eps k_1/L) tau(eps k_2/L) g_k n_k``;
* ``convolution``: ``xi_eps`` is the box projection of ``psi_eps * xi`` with
  ``psi = phi (x) phi`` a product bump.  Its coefficients are jointly Gaussian
  with covariance ``a(k_1,l_1) a(k_2,l_2)``, where ``a`` is the 1D Gram matrix
  returned by :func:`covariance_matrix_1d`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from numba import njit

from .grid_spectral import (
    BoxSpec,
    GridField,
    SpectralField,
    apply_multiplier,
    inverse_transform,
    mode_grid,
    plateau,
    sigma_symbol,
    true_to_ortho,
)

Route = Literal["fourier", "convolution"]


class UnderResolvedError(ValueError):
    """Raised when the mollification scale is below two grid spacings."""


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------


def shell_index(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Position of mode (k1, k2) in the square-shell enumeration of N_0^2.

    Shell ``m = max(k1, k2)`` occupies positions ``m^2 .. m^2 + 2m``, so the
    first ``N^2`` positions are exactly the modes with ``max(k) < N``.
    """
    k1 = np.asarray(k1, dtype=np.int64)
    k2 = np.asarray(k2, dtype=np.int64)
    m = np.maximum(k1, k2)
    return np.where(k1 == m, m * m + k2, m * m + m + 1 + k1)


@dataclass(frozen=True)
class NoiseCoeffs:
    """One standard normal per Neumann mode of ``box``; ``g[k1, k2]``."""

    box: BoxSpec
    g: np.ndarray
    seed: int

    def restricted(self, box: BoxSpec) -> "NoiseCoeffs":
        """Same realization on a coarser grid of the same box."""
        if box.L != self.box.L or box.N > self.box.N:
            raise ValueError("can only restrict to a coarser grid on the same box")
        return NoiseCoeffs(box, self.g[: box.N, : box.N].copy(), self.seed)


def sample_white_noise(box: BoxSpec, seed: int) -> NoiseCoeffs:
    """Draw the Neumann-mode coefficients of white noise on ``box``."""
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    N = box.N
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    z = rng.standard_normal(N * N)
    k = np.arange(N)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    g = z[shell_index(K1, K2)]
    return NoiseCoeffs(box.with_boundary("neumann"), g, int(seed))


def white_noise_field(nc: NoiseCoeffs) -> GridField:
    """Unmollified projection of the noise onto all grid modes."""
    return inverse_transform(SpectralField(nc.box, true_to_ortho(nc.g, nc.box)))


# --------------------------------------------------------------------------
# Mollifier profiles
# --------------------------------------------------------------------------


def _bump_raw(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 0.5
    out = np.zeros_like(x)
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * x[inside] ** 2))
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(400)


def _gl(a: float | np.ndarray, b: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to [a, b] (broadcast over arrays)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
    w = 0.5 * (b - a) * _GL_W
    return x, w


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    x, w = _gl(-0.5, 0.5)
    return float(np.sum(w * _bump_raw(x)))


def bump(x: np.ndarray) -> np.ndarray:
    """Unit-mass even bump supported in (-1/2, 1/2)."""
    return _bump_raw(x) / _bump_mass()


def bump_autocorrelation(s: np.ndarray) -> np.ndarray:
    """``R(s) = (phi * phi)(s)``, supported in [-1, 1] with unit mass."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    m = s < 1.0
    y, w = _gl(s[m] - 0.5, np.full(m.sum(), 0.5))
    out[m] = np.sum(w * bump(y) * bump(y - s[m][:, None]), axis=-1)
    return out


def rho_profile(x: np.ndarray) -> np.ndarray:
    """``rho(x) = 2 int_0^1 R(z) cos(xz) dz``, computed as the squared cosine transform of the bump."""
    x = np.asarray(x, dtype=float)
    y, w = _gl(-0.5, 0.5)
    phat = np.sum(w * bump(y) * np.cos(np.multiply.outer(x, y)), axis=-1)
    return phat**2


# --------------------------------------------------------------------------
# Mollification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MollifierSpec:
    """Mollification scale and route.  ``profile`` is the 1D Fourier cutoff."""

    eps: float
    route: Route = "fourier"
    profile: Callable[[np.ndarray], np.ndarray] = plateau
    allow_underresolved: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.eps) or self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.route not in ("fourier", "convolution"):
            raise ValueError(f"unknown route {self.route!r}")

    def check(self, box: BoxSpec) -> bool:
        """Return True when resolved; raise unless under-resolution is allowed."""
        ok = self.eps >= 2.0 * box.dx * (1 - 1e-12)
        if not ok and not self.allow_underresolved:
            raise UnderResolvedError(
                f"eps={self.eps} is below two grid spacings (dx={box.dx}) on L={box.L}, N={box.N}"
            )
        return ok


def fourier_cutoff(box: BoxSpec, spec: MollifierSpec) -> np.ndarray:
    x1, x2 = mode_grid(box)
    return spec.profile(spec.eps * x1) * spec.profile(spec.eps * x2)


def mollify_fourier(nc: NoiseCoeffs, spec: MollifierSpec) -> GridField:
    spec.check(nc.box)
    coeffs = nc.g * fourier_cutoff(nc.box, spec)
    return inverse_transform(SpectralField(nc.box, true_to_ortho(coeffs, nc.box)))


def mollify_convolution(nc: NoiseCoeffs, spec: MollifierSpec) -> GridField:
    spec.check(nc.box)
    S = _gram_sqrt(nc.box.N, float(nc.box.L), float(spec.eps))
    coeffs = S @ nc.g @ S
    return inverse_transform(SpectralField(nc.box, true_to_ortho(coeffs, nc.box)))


def mollify(nc: NoiseCoeffs, spec: MollifierSpec) -> GridField:
    if spec.route == "fourier":
        return mollify_fourier(nc, spec)
    return mollify_convolution(nc, spec)


# --------------------------------------------------------------------------
# Convolution-route covariance
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _kernel_moments(M: int, L: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """``S_m = int_0^pi K(z) sin(mz) dz`` and ``T_m = int_0^pi K(z)(1 - z/pi) cos(mz) dz``.

    ``K`` is the rescaled 1D covariance kernel on [-pi, pi]; after substituting
    ``z = pi eps s / L`` both reduce to integrals of ``R(s)`` over [0, 1].
    """
    if eps > L:
        raise ValueError("kernel support exceeds the box; need eps <= L")
    s, w = _gl(0.0, 1.0)
    R = bump_autocorrelation(s)
    m = np.arange(M)[:, None]
    phase = m * np.pi * eps * s[None, :] / L
    S = np.sum(w * R * np.sin(phase), axis=1)
    T = np.sum(w * R * (1.0 - eps * s / L) * np.cos(phase), axis=1)
    return S, T


def covariance_matrix_1d(N: int, L: float, eps: float) -> np.ndarray:
    """Gram matrix ``a[k, l] = <n_k, K_eps * n_l>`` on [0, L] for ``k, l < N``."""
    S, T = _kernel_moments(N, float(L), float(eps))
    k = np.arange(N)
    K, Lm = np.meshgrid(k, k, indexing="ij")
    c = np.where(k == 0, 1.0 / np.sqrt(L), np.sqrt(2.0 / L))
    with np.errstate(divide="ignore", invalid="ignore"):
        off = 2.0 * (Lm * S[Lm] - K * S[K]) / (K**2 - Lm**2)
        diag = np.where(k == 0, 2.0 * np.pi * T[0], -S / np.where(k == 0, 1, k) + np.pi * T)
    I = np.where((K + Lm) % 2 == 1, 0.0, off)
    I[k, k] = diag
    return np.outer(c, c) * (L / np.pi) * I


@lru_cache(maxsize=16)
def _gram_sqrt(N: int, L: float, eps: float) -> np.ndarray:
    A = covariance_matrix_1d(N, L, eps)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def covariance_kernel(k: tuple[int, int], l: tuple[int, int], eps: float, L: float) -> float:
    """``E[<xi_eps, n_k><xi_eps, n_l>]`` for the convolution route."""
    N = max(max(k), max(l)) + 1
    A = covariance_matrix_1d(N, L, eps)
    return float(A[k[0], l[0]] * A[k[1], l[1]])


# --------------------------------------------------------------------------
# Renormalization constants
# --------------------------------------------------------------------------


@njit(cache=True)
def _lattice_sum(t: np.ndarray, L: float) -> float:
    K = t.size
    b = 0.5 * np.pi * np.pi
    total = 0.0
    for k1 in range(K):
        if t[k1] == 0.0:
            continue
        a = L * L + b * k1 * k1
        inner = 0.0
        for k2 in range(K):
            w2 = 1.0 if k2 == 0 else 2.0
            inner += w2 * t[k2] / (a + b * k2 * k2)
        w1 = 1.0 if k1 == 0 else 2.0
        total += w1 * t[k1] * inner
    return total


def renorm_constant_exact(
    L: float,
    eps: float,
    profile: Callable[[np.ndarray], np.ndarray] = plateau,
    support: float | None = 1.0,
    tol: float = 1e-8,
) -> float:
    """``c_{L,eps} = sum_{k in Z^2} tau(eps k/L)^2 / (L^2 + pi^2 |k|^2 / 2)``, ``tau = profile (x) profile``.

    With ``support`` given the sum is finite.  Otherwise it is truncated once
    a bound on the remaining lattice tail drops below ``tol``.
    """
    if eps <= 0 or L <= 0:
        raise ValueError("L and eps must be positive")
    if support is not None:
        K = int(np.floor(support * L / eps)) + 1
        t = profile(eps * np.arange(K) / L) ** 2
        return float(_lattice_sum(np.ascontiguousarray(t, dtype=float), float(L)))
    K = int(np.ceil(4 * L / eps))
    while True:
        k_tail = np.arange(K, 64 * K)
        t_tail = profile(eps * k_tail / L) ** 2
        A = L * L + 0.5 * np.pi**2 * k_tail.astype(float) ** 2
        bound = 2.0 * np.sum(t_tail * (1.0 / A + np.sqrt(2.0 / A)))
        if bound < tol:
            break
        if K > 2**22:
            raise ValueError(f"tail bound {bound:.3e} above tolerance {tol:.1e}")
        K *= 2
    t = profile(eps * np.arange(K) / L) ** 2
    return float(_lattice_sum(np.ascontiguousarray(t, dtype=float), float(L)))


def renorm_constant_log(eps: float, C: float, prefactor: float = 1.0 / (2.0 * np.pi)) -> float:
    """Logarithmic law ``prefactor * log(1/eps) + C``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(prefactor * np.log(1.0 / eps) + C)


def covariance_diag_1d(N: int, L: float, eps: float) -> np.ndarray:
    """Diagonal of :func:`covariance_matrix_1d` without forming the matrix."""
    S, T = _kernel_moments(N, float(L), float(eps))
    k = np.arange(N)
    c2 = np.where(k == 0, 1.0 / L, 2.0 / L)
    diag = np.where(k == 0, 2.0 * np.pi * T[0], -S / np.where(k == 0, 1, k) + np.pi * T)
    return c2 * (L / np.pi) * diag


def mode_variances_1d(box: BoxSpec, spec: MollifierSpec) -> np.ndarray:
    """Per-axis factor of ``E[<xi_eps, n_k>^2]``; the 2D variances are its outer product."""
    if spec.route == "fourier":
        return spec.profile(spec.eps * box.modes / box.L) ** 2
    return covariance_diag_1d(box.N, box.L, spec.eps)


def mode_variances(box: BoxSpec, spec: MollifierSpec) -> np.ndarray:
    """``E[<xi_eps, n_k>^2]`` on the grid modes of ``box``."""
    a = mode_variances_1d(box, spec)
    return np.outer(a, a)


@njit(cache=True)
def _sigma_lattice_sum(a: np.ndarray, L: float) -> float:
    c = 0.5 * np.pi**2 / (L * L)
    total = 0.0
    for i in range(a.size):
        if a[i] == 0.0:
            continue
        row = 0.0
        for j in range(a.size):
            row += a[j] / (1.0 + c * (i * i + j * j))
        total += a[i] * row
    return total / (L * L)


def counterterm(box: BoxSpec, spec: MollifierSpec) -> float:
    """Box average of ``E[xi_eps * sigma(D) xi_eps]`` over the grid modes."""
    a = np.ascontiguousarray(mode_variances_1d(box, spec), dtype=float)
    nz = np.flatnonzero(a)
    a = a[: nz[-1] + 1] if nz.size else a[:1] * 0.0
    return float(_sigma_lattice_sum(a, float(box.L)))


def calibrate_log_law(
    L: float,
    route: Route = "fourier",
    eps_values: tuple[float, ...] = tuple(2.0**-j for j in range(3, 9)),
) -> tuple[float, float]:
    """Least-squares fit ``counterterm ~ slope * log(1/eps) + intercept``."""
    xs, ys = [], []
    for eps in eps_values:
        N = int(np.ceil(2 * L / eps)) + 1
        box = BoxSpec(L, N)
        xs.append(np.log(1.0 / eps))
        ys.append(counterterm(box, MollifierSpec(eps, route)))
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


# --------------------------------------------------------------------------
# Enhancement
# --------------------------------------------------------------------------


@dataclass
class EnhancedNoise:
    """Pair ``(xi_eps, Xi_eps)`` with ``Xi_eps = xi_eps resonant sigma(D) xi_eps - c_eps``."""

    xi: GridField
    Xi: GridField
    c_eps: float
    spec: MollifierSpec | None = None


def enhance(xi: GridField, c_eps: float, spec: MollifierSpec | None = None, dealias: bool = True) -> EnhancedNoise:
    from .paracontrolled import resonant

    if not np.isfinite(c_eps):
        raise ValueError(f"c_eps must be finite, got {c_eps}")
    sx = apply_multiplier(xi, sigma_symbol)
    Xi = resonant(xi, sx, dealias=dealias) - c_eps
    return EnhancedNoise(xi, Xi, float(c_eps), spec)
