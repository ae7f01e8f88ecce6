"""Box grids, cosine/sine transforms, Fourier multipliers and Littlewood-Paley blocks.

Fields live on the collocated grid ``x_j = -L/2 + j*dx`` with ``dx = L/(N-1)``
on the box ``Q_L = [-L/2, L/2]^2``.  Neumann fields are expanded in the cosine
basis

    n_k(x) = prod_i c_{k_i} cos(pi k_i (x_i + L/2) / L),   c_0 = 1/sqrt(L), c_k = sqrt(2/L),

and Dirichlet fields in the matching sine basis.  A multiplier ``m`` acts as
``m(D) f = sum_k m(k/L) <f, n_k> n_k`` so that ``-Delta n_k = pi^2 |k/L|^2 n_k``.

Coefficients use the orthonormal type-I DCT/DST, so Parseval holds exactly for
trapezoid quadrature.  The only mode whose coefficient differs from the L^2
inner product is the cosine Nyquist mode, which carries a factor sqrt(2) per
axis (its discrete norm is doubled); :func:`ortho_to_true` undoes this.

Operations that must mix parities (gradients, products, paraproducts) run on
the ``2L``-periodic extension with FFTs.  A field's parity per axis records
whether it extends evenly (+1) or oddly (-1) across the box faces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import scipy.fft as sfft

Boundary = Literal["neumann", "dirichlet"]
Parity = tuple[int, int]
Multiplier = Callable[[np.ndarray, np.ndarray], np.ndarray]

_MAGIC = b"PAMGRID1"
_HEADER = struct.Struct("<8sqdBbb5x")
assert _HEADER.size == 32


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def plateau(x: np.ndarray) -> np.ndarray:
    """Smooth even cutoff equal to 1 on |x| <= 1/2 and 0 on |x| >= 1."""
    return 1.0 - smooth_step(2.0 * np.abs(np.asarray(x, dtype=float)) - 1.0)


def radial(profile: Callable[[np.ndarray], np.ndarray]) -> Multiplier:
    """Lift a function of |xi| to a two-argument multiplier."""

    def m(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return profile(np.hypot(x1, x2))

    return m


def sigma_symbol(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Symbol of (1 - Delta/2)^{-1} in the k/L convention."""
    return 1.0 / (1.0 + 0.5 * np.pi**2 * (x1**2 + x2**2))


def laplacian_symbol(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return -(np.pi**2) * (x1**2 + x2**2)


# --------------------------------------------------------------------------
# Grid description and field containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxSpec:
    """Square box of side ``L`` sampled on an ``N x N`` collocated grid."""

    L: float
    N: int
    boundary: Boundary = "neumann"

    def __post_init__(self) -> None:
        if not np.isfinite(self.L) or self.L < 1.0:
            raise ValueError(f"box side must be >= 1, got {self.L}")
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"grid size must be an integer >= 8, got {self.N}")
        if self.boundary not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def dx(self) -> float:
        return self.L / (self.N - 1)

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(-self.L / 2, self.L / 2, self.N)

    @property
    def native_parity(self) -> Parity:
        return (1, 1) if self.boundary == "neumann" else (-1, -1)

    @property
    def modes(self) -> np.ndarray:
        """1D mode indices carried by the transform."""
        if self.boundary == "neumann":
            return np.arange(self.N)
        return np.arange(1, self.N - 1)

    @property
    def nyquist(self) -> int:
        return self.N - 1

    @property
    def lp_depth(self) -> int:
        """Index J of the last Littlewood-Paley block; higher frequencies fold into it."""
        return max(0, int(np.floor(np.log2(self.nyquist / self.L))))

    def with_boundary(self, boundary: Boundary) -> "BoxSpec":
        return BoxSpec(self.L, self.N, boundary)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights (N x N) including the dx^2 factor."""
        w = np.ones(self.N)
        w[0] = w[-1] = 0.5
        return np.outer(w, w) * self.dx**2


@dataclass
class GridField:
    """Real samples ``values[i, j] = f(x_i, x_j)`` on the box grid."""

    box: BoxSpec
    values: np.ndarray
    parity: Parity | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.box.N, self.box.N):
            raise ValueError(f"values shape {self.values.shape} does not match N={self.box.N}")
        if self.parity is None:
            self.parity = self.box.native_parity
        self.parity = (int(self.parity[0]), int(self.parity[1]))

    def __add__(self, other: "GridField | float") -> "GridField":
        if isinstance(other, GridField):
            _check_same(self, other)
            return GridField(self.box, self.values + other.values, self.parity)
        return GridField(self.box, self.values + other, self.parity)

    __radd__ = __add__

    def __sub__(self, other: "GridField | float") -> "GridField":
        if isinstance(other, GridField):
            _check_same(self, other)
            return GridField(self.box, self.values - other.values, self.parity)
        return GridField(self.box, self.values - other, self.parity)

    def __mul__(self, s: float) -> "GridField":
        return GridField(self.box, self.values * s, self.parity)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return GridField(self.box, -self.values, self.parity)

    def integral(self) -> float:
        return float(np.sum(self.box.quadrature_weights() * self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.box.quadrature_weights() * self.values**2)))

    def save(self, path: str | Path) -> None:
        save_field(self, path)

    def to_csv(self, path: str | Path) -> None:
        export_csv(self, path)


@dataclass
class SpectralField:
    """Orthonormal-transform coefficients indexed by (k1, k2)."""

    box: BoxSpec
    coeffs: np.ndarray


@dataclass
class LPDecomposition:
    """Blocks ``Delta_{-1} f, ..., Delta_J f``; ``blocks[i + 1]`` holds block i."""

    box: BoxSpec
    blocks: list[GridField] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.blocks) - 2

    def block(self, i: int) -> GridField:
        return self.blocks[i + 1]

    def total(self) -> GridField:
        return GridField(self.box, sum(b.values for b in self.blocks), self.blocks[0].parity)


def _check_same(a: GridField, b: GridField) -> None:
    if a.box != b.box:
        raise ValueError("fields live on different boxes")


# --------------------------------------------------------------------------
# Native transforms
# --------------------------------------------------------------------------


def _endpoint_weights(N: int) -> np.ndarray:
    a = np.ones(N)
    a[0] = a[-1] = np.sqrt(0.5)
    return a


def forward_transform(f: GridField) -> SpectralField:
    """Coefficients of ``f`` in the box's native basis (orthonormal DCT-I / DST-I)."""
    box = f.box
    if f.parity != box.native_parity:
        raise ValueError("forward_transform needs the box's native parity")
    if box.boundary == "neumann":
        a = _endpoint_weights(box.N)
        g = f.values * np.outer(a, a) * box.dx
        return SpectralField(box, sfft.dctn(g, type=1, norm="ortho"))
    inner = f.values[1:-1, 1:-1] * box.dx
    return SpectralField(box, sfft.dstn(inner, type=1, norm="ortho"))


def inverse_transform(s: SpectralField) -> GridField:
    box = s.box
    if box.boundary == "neumann":
        a = _endpoint_weights(box.N)
        g = sfft.idctn(s.coeffs, type=1, norm="ortho")
        return GridField(box, g / (np.outer(a, a) * box.dx))
    out = np.zeros((box.N, box.N))
    out[1:-1, 1:-1] = sfft.idstn(s.coeffs, type=1, norm="ortho") / box.dx
    return GridField(box, out)


def ortho_to_true(coeffs: np.ndarray, box: BoxSpec) -> np.ndarray:
    """Convert orthonormal-transform coefficients to L^2 inner products."""
    if box.boundary == "dirichlet":
        return coeffs.copy()
    out = coeffs.copy()
    out[-1, :] /= np.sqrt(2.0)
    out[:, -1] /= np.sqrt(2.0)
    return out


def true_to_ortho(coeffs: np.ndarray, box: BoxSpec) -> np.ndarray:
    if box.boundary == "dirichlet":
        return coeffs.copy()
    out = coeffs.copy()
    out[-1, :] *= np.sqrt(2.0)
    out[:, -1] *= np.sqrt(2.0)
    return out


def mode_grid(box: BoxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (k1/L, k2/L) matching the native coefficient layout."""
    k = box.modes / box.L
    return np.meshgrid(k, k, indexing="ij")


def basis_mode(box: BoxSpec, k1: int, k2: int) -> GridField:
    """Sampled basis function n_{(k1,k2)} (cosine for Neumann, sine for Dirichlet)."""
    x = box.coords + box.L / 2

    def one(k: int) -> np.ndarray:
        if box.boundary == "neumann":
            c = 1.0 / np.sqrt(box.L) if k == 0 else np.sqrt(2.0 / box.L)
            return c * np.cos(np.pi * k * x / box.L)
        return np.sqrt(2.0 / box.L) * np.sin(np.pi * k * x / box.L)

    return GridField(box, np.outer(one(k1), one(k2)))


def apply_multiplier(f: GridField, m: Multiplier) -> GridField:
    """Apply ``m(D)`` where ``m`` is evaluated at (k1/L, k2/L)."""
    if f.parity == f.box.native_parity:
        s = forward_transform(f)
        x1, x2 = mode_grid(f.box)
        return inverse_transform(SpectralField(f.box, s.coeffs * m(x1, x2)))
    hat = torus_hat(f)
    x1, x2 = torus_frequencies(f.box)
    return from_torus_hat(hat * m(x1, x2), f.box, f.parity)


# --------------------------------------------------------------------------
# Periodic extension machinery
# --------------------------------------------------------------------------


def even_extension(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Even reflection across both faces: length N -> 2(N-1) periodic samples."""
    v = np.moveaxis(values, axis, 0)
    ext = np.concatenate([v, v[-2:0:-1]], axis=0)
    return np.moveaxis(ext, 0, axis)


def odd_extension(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Odd reflection across both faces; face values are forced to zero."""
    v = np.moveaxis(values, axis, 0).copy()
    v[0] = 0.0
    v[-1] = 0.0
    ext = np.concatenate([v, -v[-2:0:-1]], axis=0)
    return np.moveaxis(ext, 0, axis)


def extend(values: np.ndarray, parity: Parity) -> np.ndarray:
    out = values
    for axis, p in enumerate(parity):
        out = even_extension(out, axis) if p > 0 else odd_extension(out, axis)
    return out


def restrict(values: np.ndarray, N: int) -> np.ndarray:
    return values[:N, :N]


def torus_frequencies(box: BoxSpec) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies n/L of the 2L-periodic extension, FFT ordering."""
    M = 2 * (box.N - 1)
    n = np.fft.fftfreq(M, d=1.0 / M) / box.L
    return np.meshgrid(n, n, indexing="ij")


def torus_hat(f: GridField) -> np.ndarray:
    return sfft.fft2(extend(f.values, f.parity))


def from_torus_hat(hat: np.ndarray, box: BoxSpec, parity: Parity) -> GridField:
    vals = restrict(sfft.ifft2(hat).real, box.N)
    return GridField(box, vals, parity)


def gradient(f: GridField) -> tuple[GridField, GridField]:
    """Spectral gradient; each component flips the parity of its axis."""
    hat = torus_hat(f)
    x1, x2 = torus_frequencies(f.box)
    M = 2 * (f.box.N - 1)
    nyq = np.abs(x1 * f.box.L) == M // 2
    d1 = np.where(nyq, 0.0, 1j * np.pi * x1)
    nyq2 = np.abs(x2 * f.box.L) == M // 2
    d2 = np.where(nyq2, 0.0, 1j * np.pi * x2)
    p1 = (-f.parity[0], f.parity[1])
    p2 = (f.parity[0], -f.parity[1])
    return from_torus_hat(hat * d1, f.box, p1), from_torus_hat(hat * d2, f.box, p2)


def laplacian(f: GridField) -> GridField:
    return apply_multiplier(f, laplacian_symbol)


# --------------------------------------------------------------------------
# Littlewood-Paley blocks and Besov norms
# --------------------------------------------------------------------------


def _cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 on r <= 1, 0 on r >= 2."""
    return 1.0 - smooth_step(np.asarray(r) - 1.0)


def lp_symbol(i: int, J: int) -> Multiplier:
    """Multiplier of block ``i`` in a partition with blocks -1..J.

    Block -1 is ``h(2r)``, block ``j`` is ``h(r/2^j) - h(r/2^(j-1))`` for
    ``0 <= j < J`` and block ``J`` absorbs everything above, so the symbols sum
    to one identically.
    """
    if i < -1 or i > J:
        raise ValueError(f"block index {i} outside -1..{J}")

    def m(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        r = np.hypot(x1, x2)
        if i == -1:
            return _cutoff(2.0 * r) if J >= 0 else np.ones_like(r)
        lower = _cutoff(r * 2.0 ** (-i + 1))
        if i == J:
            return 1.0 - lower
        return _cutoff(r * 2.0**-i) - lower

    return m


def lp_block(f: GridField, i: int) -> GridField:
    return apply_multiplier(f, lp_symbol(i, f.box.lp_depth))


def lp_decompose(f: GridField) -> LPDecomposition:
    J = f.box.lp_depth
    if f.parity == f.box.native_parity:
        s = forward_transform(f)
        x1, x2 = mode_grid(f.box)
        blocks = [
            inverse_transform(SpectralField(f.box, s.coeffs * lp_symbol(i, J)(x1, x2)))
            for i in range(-1, J + 1)
        ]
    else:
        hat = torus_hat(f)
        x1, x2 = torus_frequencies(f.box)
        blocks = [
            from_torus_hat(hat * lp_symbol(i, J)(x1, x2), f.box, f.parity)
            for i in range(-1, J + 1)
        ]
    for b in blocks:
        b.parity = f.parity
    return LPDecomposition(f.box, blocks)


def lp_norm(f: GridField, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    w = f.box.quadrature_weights()
    return float(np.sum(w * np.abs(f.values) ** p) ** (1.0 / p))


def besov_norm(
    f: GridField | tuple[GridField, ...],
    alpha: float,
    p: float = np.inf,
    q: float = np.inf,
) -> float:
    """Grid-truncated Besov norm ``|| (2^{i alpha} ||Delta_i f||_p)_i ||_{l^q}``.

    A tuple of fields is treated as a vector field; its norm is the maximum
    over components.
    """
    if isinstance(f, tuple):
        return max(besov_norm(c, alpha, p, q) for c in f)
    dec = lp_decompose(f)
    terms = np.array(
        [2.0 ** (i * alpha) * lp_norm(dec.block(i), p) for i in range(-1, dec.depth + 1)]
    )
    if np.isinf(q):
        return float(terms.max())
    return float(np.sum(terms**q) ** (1.0 / q))


# --------------------------------------------------------------------------
# Dealiased products on the periodic extension
# --------------------------------------------------------------------------


def pad_hat(hat: np.ndarray, P: int) -> np.ndarray:
    """Zero-pad a 2D FFT (size M) to size P >= M, splitting the Nyquist bin."""
    M = hat.shape[0]
    h = M // 2

    def pad1(a: np.ndarray, axis: int) -> np.ndarray:
        a = np.moveaxis(a, axis, 0)
        out = np.zeros((P,) + a.shape[1:], dtype=complex)
        out[:h] = a[:h]
        out[P - h + 1 :] = a[h + 1 :]
        out[h] = 0.5 * a[h]
        out[P - h] = 0.5 * a[h]
        return np.moveaxis(out, 0, axis)

    return pad1(pad1(hat, 0), 1) * (P / M) ** 2


def truncate_hat(hat: np.ndarray, M: int) -> np.ndarray:
    """Inverse of :func:`pad_hat` for band-limited input; folds the Nyquist pair."""
    P = hat.shape[0]
    h = M // 2

    def cut1(a: np.ndarray, axis: int) -> np.ndarray:
        a = np.moveaxis(a, axis, 0)
        out = np.empty((M,) + a.shape[1:], dtype=complex)
        out[:h] = a[:h]
        out[h + 1 :] = a[P - h + 1 :]
        out[h] = a[h] + a[P - h]
        return np.moveaxis(out, 0, axis)

    return cut1(cut1(hat, 0), 1) * (M / P) ** 2


class ProductEngine:
    """Evaluates sums of products of fields on one box, with optional 3/2 dealiasing.

    Factors are supplied as torus spectra; products are accumulated on the
    (possibly padded) physical grid and mapped back once, so a sum of products
    is exactly the product of sums up to rounding.
    """

    def __init__(self, box: BoxSpec, dealias: bool = True) -> None:
        self.box = box
        self.M = 2 * (box.N - 1)
        self.P = (3 * self.M) // 2 if dealias else self.M
        self.dealias = dealias

    def physical(self, hat: np.ndarray) -> np.ndarray:
        if self.dealias:
            hat = pad_hat(hat, self.P)
        return sfft.ifft2(hat).real

    def finish(self, acc: np.ndarray, parity: Parity) -> GridField:
        hat = sfft.fft2(acc)
        if self.dealias:
            hat = truncate_hat(hat, self.M)
        return from_torus_hat(hat, self.box, parity)


def product(u: GridField, v: GridField, dealias: bool = True) -> GridField:
    """Pointwise product, optionally dealiased by 3/2 zero padding."""
    _check_same(u, v)
    parity = (u.parity[0] * v.parity[0], u.parity[1] * v.parity[1])
    if not dealias:
        return GridField(u.box, u.values * v.values, parity)
    eng = ProductEngine(u.box, True)
    acc = eng.physical(torus_hat(u)) * eng.physical(torus_hat(v))
    return eng.finish(acc, parity)


def dot(u: tuple[GridField, ...], v: tuple[GridField, ...], dealias: bool = True) -> GridField:
    """Sum of componentwise products of two vector fields."""
    out = product(u[0], v[0], dealias)
    for a, b in zip(u[1:], v[1:]):
        out = out + product(a, b, dealias)
    return out


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def save_field(f: GridField, path: str | Path) -> None:
    """Write a 32-byte header followed by little-endian float64 row-major values."""
    flag = 0 if f.box.boundary == "neumann" else 1
    header = _HEADER.pack(_MAGIC, f.box.N, float(f.box.L), flag, f.parity[0], f.parity[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path: str | Path) -> GridField:
    raw = Path(path).read_bytes()
    magic, N, L, flag, p1, p2 = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a grid field file")
    vals = np.frombuffer(raw[_HEADER.size :], dtype="<f8")
    if vals.size != N * N:
        raise ValueError(f"{path}: expected {N * N} values, found {vals.size}")
    box = BoxSpec(L, N, "neumann" if flag == 0 else "dirichlet")
    return GridField(box, vals.reshape(N, N).copy(), (p1, p2))


def export_csv(f: GridField, path: str | Path) -> None:
    x = f.box.coords
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    data = np.column_stack([X1.ravel(), X2.ravel(), f.values.ravel()])
    np.savetxt(path, data, delimiter=",", header="x,y,value", comments="", fmt="%.17g")
