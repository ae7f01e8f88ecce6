"""Dirichlet Anderson Hamiltonian ``H = Delta/2 + V`` on a box grid and its top eigenpairs.

The operator acts on interior grid values.  Two Laplacians are available, both
diagonal in the orthonormal DST-I basis:

* ``spectral``: symbol ``-(pi k/L)^2`` per axis (exact on sine modes);
* ``fd``: the 5-point stencil, symbol ``-(2/dx)^2 sin^2(pi k / (2(N-1)))`` per axis.

Small problems are solved densely.  Larger ones use preconditioned LOBPCG,
warm-started from the same problem on the grid with every other point
removed, recursively.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lobpcg

from .grid_spectral import BoxSpec, GridField, SpectralField, forward_transform, inverse_transform
from .noise import MollifierSpec, Route, calibrate_log_law, mollify, renorm_constant_log, sample_white_noise

log = logging.getLogger(__name__)

Laplacian = Literal["spectral", "fd"]

DENSE_MAX_N = 64
COARSE_N = 33
COARSE_MAXITER = 60
PRECOND_SHIFT = 1.0


class EigenSolverError(RuntimeError):
    """Raised when the eigensolver fails to reach the residual tolerance."""

    def __init__(self, message: str, residual_history: list[np.ndarray] | None = None) -> None:
        super().__init__(message)
        self.residual_history = residual_history or []


def dirichlet_symbol(box: BoxSpec, kind: Laplacian) -> np.ndarray:
    """1D eigenvalues of the Dirichlet Laplacian on modes k = 1..N-2."""
    k = np.arange(1, box.N - 1)
    if kind == "spectral":
        return -((np.pi * k / box.L) ** 2)
    if kind == "fd":
        return -((2.0 / box.dx) ** 2) * np.sin(np.pi * k / (2.0 * (box.N - 1))) ** 2
    raise ValueError(f"unknown laplacian {kind!r}")


def _dst(x: np.ndarray) -> np.ndarray:
    return sfft.dstn(x, type=1, norm="ortho", axes=(0, 1))


def _idst(x: np.ndarray) -> np.ndarray:
    return sfft.idstn(x, type=1, norm="ortho", axes=(0, 1))


@dataclass
class OperatorSpec:
    """``Delta_h/2 + V`` with Dirichlet conditions; ``potential`` holds full-grid values."""

    box: BoxSpec
    potential: np.ndarray
    laplacian: Laplacian = "spectral"

    def __post_init__(self) -> None:
        if isinstance(self.potential, GridField):
            self.potential = self.potential.values
        self.box = self.box.with_boundary("dirichlet")
        self.potential = np.asarray(self.potential, dtype=float)
        if self.potential.shape != (self.box.N, self.box.N):
            raise ValueError("potential does not match the grid")
        if not np.all(np.isfinite(self.potential)):
            raise ValueError("potential has non-finite values")
        if self.laplacian not in ("spectral", "fd"):
            raise ValueError(f"unknown laplacian {self.laplacian!r}")

    @property
    def n(self) -> int:
        return self.box.N - 2

    @property
    def V(self) -> np.ndarray:
        return self.potential[1:-1, 1:-1]

    @property
    def kinetic_symbol(self) -> np.ndarray:
        lam = dirichlet_symbol(self.box, self.laplacian)
        return 0.5 * (lam[:, None] + lam[None, :])

    def shifted(self, c: float) -> "OperatorSpec":
        return replace(self, potential=self.potential + c)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply H to interior arrays of shape (n, n) or (n, n, m)."""
        sym = self.kinetic_symbol
        V = self.V
        if u.ndim == 3:
            sym = sym[..., None]
            V = V[..., None]
        return _idst(sym * _dst(u)) + V * u

    def heat_multiplier(self, dt: float) -> np.ndarray:
        return np.exp(dt * self.kinetic_symbol)


def assemble(op: OperatorSpec) -> LinearOperator:
    """Matrix-free operator on flattened interior vectors."""
    n = op.n

    def mv(x: np.ndarray) -> np.ndarray:
        X = np.asarray(x).reshape(n, n, -1)
        return op.apply(X).reshape(n * n, -1).squeeze()

    def mm(x: np.ndarray) -> np.ndarray:
        X = np.asarray(x).reshape(n, n, -1)
        return op.apply(X).reshape(n * n, -1)

    return LinearOperator((n * n, n * n), matvec=mv, matmat=mm, dtype=float)


def fd_matrix(op: OperatorSpec) -> sp.csr_matrix:
    """Sparse 5-point matrix of ``Delta_h/2 + V`` (only for ``laplacian='fd'``)."""
    if op.laplacian != "fd":
        raise ValueError("sparse assembly is only defined for the finite-difference Laplacian")
    n, h = op.n, op.box.dx
    d1 = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2
    eye = sp.identity(n)
    lap = sp.kron(d1, eye) + sp.kron(eye, d1)
    return (0.5 * lap + sp.diags(op.V.ravel())).tocsr()


def dense_matrix(op: OperatorSpec) -> np.ndarray:
    n = op.n
    basis = np.eye(n * n).reshape(n, n, n * n)
    return op.apply(basis).reshape(n * n, n * n)


@dataclass
class Spectrum:
    """Top eigenpairs in descending order; vectors are normalized in discrete L^2."""

    box: BoxSpec
    values: np.ndarray
    vectors: list[GridField]
    residuals: np.ndarray
    method: str = ""
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def _normalize_signs(V: np.ndarray) -> np.ndarray:
    out = V.copy()
    for j in range(V.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]
        if col[idx] < 0:
            out[:, j] = -col
    return out


def _residuals(op: OperatorSpec, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    n = op.n
    X = vecs.reshape(n, n, -1)
    R = op.apply(X) - vals[None, None, :] * X
    return np.linalg.norm(R.reshape(n * n, -1), axis=0) / np.linalg.norm(vecs, axis=0)


def _prolong(vecs: np.ndarray, coarse: BoxSpec, fine: BoxSpec) -> np.ndarray:
    """Interpolate interior vectors by zero-padding their sine coefficients."""
    nc, nf = coarse.N - 2, fine.N - 2
    out = np.empty((nf * nf, vecs.shape[1]))
    for j in range(vecs.shape[1]):
        vals = np.zeros((coarse.N, coarse.N))
        vals[1:-1, 1:-1] = vecs[:, j].reshape(nc, nc)
        c = forward_transform(GridField(coarse, vals)).coeffs
        cf = np.zeros((nf, nf))
        cf[:nc, :nc] = c
        out[:, j] = inverse_transform(SpectralField(fine, cf)).values[1:-1, 1:-1].ravel()
    return out


def _initial_block(op: OperatorSpec, m: int) -> np.ndarray:
    """Approximate top-``m`` block from the subsampled problem, or a fixed random block."""
    N = op.box.N
    coarse_n = (N - 1) // 2 + 1
    if (N - 1) % 2 == 0 and coarse_n >= COARSE_N:
        coarse_box = BoxSpec(op.box.L, coarse_n, "dirichlet")
        coarse = OperatorSpec(coarse_box, op.potential[::2, ::2], op.laplacian)
        size = coarse.n * coarse.n
        if coarse_n <= DENSE_MAX_N:
            _, vecs = sla.eigh(dense_matrix(coarse), subset_by_index=[size - m, size - 1])
        else:
            _, vecs, _ = _lobpcg(coarse, _initial_block(coarse, m), 1e-4, COARSE_MAXITER)
        return _prolong(vecs, coarse_box, op.box)
    rng = np.random.default_rng(12345)
    return rng.standard_normal((op.n * op.n, m))


def _lobpcg(
    op: OperatorSpec, X0: np.ndarray, tol: float, maxiter: int
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Preconditioned LOBPCG for the top of the spectrum; returns descending pairs."""
    size = op.n * op.n
    A = assemble(op)
    sym = op.kinetic_symbol

    def precond(x: np.ndarray) -> np.ndarray:
        X = np.asarray(x).reshape(op.n, op.n, -1)
        return _idst(_dst(X) / (PRECOND_SHIFT - sym)[..., None]).reshape(size, -1)

    neg = LinearOperator((size, size), matvec=lambda x: -A.matvec(x), matmat=lambda x: -A.matmat(x), dtype=float)
    M = LinearOperator((size, size), matvec=precond, matmat=precond, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        w, v, hist = lobpcg(neg, X0, M=M, tol=tol, maxiter=maxiter, largest=False, retResidualNormsHistory=True)
    order = np.argsort(w)
    return -w[order], v[:, order], [np.asarray(r) for r in hist]


def _guess_block(op: OperatorSpec, guesses: list[GridField], m: int) -> np.ndarray:
    cols = []
    for g in guesses[:m]:
        if g.box.L != op.box.L:
            raise ValueError("initial guesses must live on the same box")
        vec = g.values[1:-1, 1:-1].ravel()[:, None]
        cols.append(vec if g.box.N == op.box.N else _prolong(vec, g.box, op.box))
    X = np.column_stack(cols)
    if X.shape[1] < m:
        rng = np.random.default_rng(12345)
        X = np.column_stack([X, rng.standard_normal((X.shape[0], m - X.shape[1]))])
    return X


def top_eigenpairs(
    op: OperatorSpec,
    n: int = 1,
    tol: float = 1e-8,
    method: Literal["auto", "dense", "iterative"] = "auto",
    maxiter: int = 1000,
    block: int | None = None,
    x0: list[GridField] | None = None,
) -> Spectrum:
    """Largest ``n`` eigenvalues of ``op`` with eigenvectors and residuals.

    ``block`` is the LOBPCG block width (default ``n + 1``).  ``x0`` seeds the
    iteration with eigenvector guesses, possibly from a coarser grid of the
    same box; they are interpolated spectrally.
    """
    size = op.n * op.n
    if n < 1 or n > size:
        raise ValueError(f"cannot request {n} eigenpairs from a {size}-dimensional problem")
    if method == "auto":
        method = "dense" if op.box.N <= DENSE_MAX_N else "iterative"
    iterations = 0
    if method == "dense":
        w, v = sla.eigh(dense_matrix(op), subset_by_index=[size - n, size - 1])
        vals, vecs = w[::-1], v[:, ::-1]
    else:
        m = min(block or n + 1, size)
        X0 = _guess_block(op, x0, m) if x0 else _initial_block(op, m)
        w, v, hist = _lobpcg(op, X0, 0.1 * tol, maxiter)
        iterations = len(hist)
        vals, vecs = w[:n], v[:, :n]
        res = _residuals(op, vals, vecs)
        if np.any(res > tol):
            raise EigenSolverError(f"eigensolver stalled: residuals {res} above {tol}", hist)
    vecs = _normalize_signs(vecs / np.linalg.norm(vecs, axis=0))
    res = _residuals(op, vals, vecs)
    fields = []
    for j in range(vecs.shape[1]):
        full = np.zeros((op.box.N, op.box.N))
        full[1:-1, 1:-1] = vecs[:, j].reshape(op.n, op.n) / op.box.dx
        fields.append(GridField(op.box, full))
    return Spectrum(op.box, np.asarray(vals), fields, res, method, iterations)


# --------------------------------------------------------------------------
# Noise-driven spectra
# --------------------------------------------------------------------------


@lru_cache(maxsize=32)
def calibrated_law(L: float, route: Route) -> tuple[float, float]:
    """Slope and intercept of the counterterm's logarithmic law (cached)."""
    return calibrate_log_law(L, route)


def renorm_constant(L: float, eps: float, route: Route = "fourier") -> float:
    slope, intercept = calibrated_law(float(L), route)
    return renorm_constant_log(eps, intercept, prefactor=slope)


def grid_for(L: float, eps: float, eps_per_dx: float = 2.0) -> BoxSpec:
    """Box grid with ``eps = eps_per_dx * dx``."""
    N = int(round(eps_per_dx * L / eps)) + 1
    return BoxSpec(L, N, "neumann")


def noise_potential(
    L: float, eps: float, seed: int, route: Route = "fourier", eps_per_dx: float = 2.0
) -> GridField:
    box = grid_for(L, eps, eps_per_dx)
    nc = sample_white_noise(box, seed)
    return mollify(nc, MollifierSpec(eps, route))


def renormalized_eigenvalues(
    L: float,
    eps: float,
    seed: int,
    n: int = 1,
    route: Route = "fourier",
    c_eps: float | None = None,
    laplacian: Laplacian = "spectral",
    eps_per_dx: float = 2.0,
) -> Spectrum:
    """Top eigenpairs of ``Delta/2 + xi_eps - c_eps`` on ``Q_L`` (Dirichlet)."""
    xi = noise_potential(L, eps, seed, route, eps_per_dx)
    c = renorm_constant(L, eps, route) if c_eps is None else c_eps
    op = OperatorSpec(xi.box, xi.values - c, laplacian)
    spec = top_eigenpairs(op, n)
    spec.extra.update(c_eps=c, eps=eps, seed=seed, route=route)
    return spec


def eigenvalue_scaling_experiment(
    L_values: list[float],
    seeds: list[int],
    eps: float,
    n: int = 1,
    route: Route = "fourier",
    laplacian: Laplacian = "spectral",
    eps_per_dx: float = 2.0,
) -> list[dict]:
    """Rows ``(L, seed, eps, n, lambda_n_renormalized, residual)``."""
    rows = []
    for L in L_values:
        for seed in seeds:
            spec = renormalized_eigenvalues(L, eps, seed, n, route, None, laplacian, eps_per_dx)
            for j in range(n):
                rows.append(
                    {
                        "L": float(L),
                        "seed": int(seed),
                        "eps": float(eps),
                        "n": j + 1,
                        "lambda_n_renormalized": float(spec.values[j]),
                        "residual": float(spec.residuals[j]),
                    }
                )
            log.info("L=%s seed=%s lambda_1=%.6f", L, seed, spec.values[0])
    return rows
