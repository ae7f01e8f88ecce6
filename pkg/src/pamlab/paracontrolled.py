"""Bony decomposition of products and the renormalized square of the gradient of Z.

For fields ``u, v`` with Littlewood-Paley blocks ``u_i, v_j``:

    u < v  = sum_{i <= j-2} u_i v_j      (paraproduct, low u times high v)
    u o v  = sum_{|i-j| <= 1} u_i v_j    (resonant product)
    u > v  = sum_{i >= j+2} u_i v_j

so ``u < v + u o v + u > v = u v``.  Block products are accumulated on the
(optionally 3/2-padded) periodic extension and mapped back once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_spectral import (
    GridField,
    ProductEngine,
    apply_multiplier,
    dot,
    gradient,
    lp_symbol,
    product,
    torus_frequencies,
    torus_hat,
)

Vector = tuple[GridField, ...]


@dataclass
class ProductTriple:
    """``(u < v, u o v, u > v)`` for one pair of (vector) fields."""

    lower: GridField
    resonant: GridField
    upper: GridField

    def total(self) -> GridField:
        return self.lower + self.resonant + self.upper


@dataclass
class WickSquare:
    """Renormalized ``|grad Z|^2 / 2`` and its three building blocks."""

    value: GridField
    para: GridField
    zz_resonant: GridField
    theta: GridField


def _as_vector(u: GridField | Vector) -> Vector:
    return (u,) if isinstance(u, GridField) else tuple(u)


def _block_physical(f: GridField, eng: ProductEngine) -> list[np.ndarray]:
    hat = torus_hat(f)
    x1, x2 = torus_frequencies(f.box)
    J = f.box.lp_depth
    return [eng.physical(hat * lp_symbol(i, J)(x1, x2)) for i in range(-1, J + 1)]


def paraproduct(
    u: GridField | Vector,
    v: GridField | Vector,
    dealias: bool = True,
    parts: tuple[str, ...] = ("lower", "resonant", "upper"),
) -> ProductTriple:
    """Bony decomposition of ``u . v``; vector arguments are contracted componentwise."""
    us, vs = _as_vector(u), _as_vector(v)
    if len(us) != len(vs):
        raise ValueError("vector fields must have the same number of components")
    box = us[0].box
    if any(f.box != box for f in us + vs):
        raise ValueError("fields live on different boxes")
    parity = (us[0].parity[0] * vs[0].parity[0], us[0].parity[1] * vs[0].parity[1])
    for a, b in zip(us, vs):
        if (a.parity[0] * b.parity[0], a.parity[1] * b.parity[1]) != parity:
            raise ValueError("component products have inconsistent parities")
    eng = ProductEngine(box, dealias)
    acc = {name: 0.0 for name in ("lower", "resonant", "upper")}
    for a, b in zip(us, vs):
        ua = _block_physical(a, eng)
        vb = _block_physical(b, eng)
        nb = len(ua)
        su = np.cumsum(ua, axis=0)
        sv = np.cumsum(vb, axis=0)
        # list index n holds block n - 1, so S_{j-2} sits at cumsum index n - 2
        if "lower" in parts:
            acc["lower"] = acc["lower"] + sum(su[n - 2] * vb[n] for n in range(2, nb))
        if "upper" in parts:
            acc["upper"] = acc["upper"] + sum(ua[n] * sv[n - 2] for n in range(2, nb))
        if "resonant" in parts:
            r = 0.0
            for n in range(nb):
                lo, hi = max(0, n - 1), min(nb - 1, n + 1)
                near = sv[hi] - (sv[lo - 1] if lo > 0 else 0.0)
                r = r + ua[n] * near
            acc["resonant"] = acc["resonant"] + r
    out = {}
    for name in ("lower", "resonant", "upper"):
        val = acc[name]
        if np.isscalar(val):
            val = np.zeros((eng.P, eng.P))
        out[name] = eng.finish(val, parity)
    return ProductTriple(out["lower"], out["resonant"], out["upper"])


def resonant(u: GridField | Vector, v: GridField | Vector, dealias: bool = True) -> GridField:
    return paraproduct(u, v, dealias, parts=("resonant",)).resonant


def para_lower(u: GridField | Vector, v: GridField | Vector, dealias: bool = True) -> GridField:
    return paraproduct(u, v, dealias, parts=("lower",)).lower


def wick_square_grad_z(Z: GridField, Theta: GridField, dealias: bool = True) -> WickSquare:
    """``|grad Z|^2/2`` renormalized as ``grad Z < grad Z - (1 - Delta/4)(Z o Z) + Theta``.

    ``Theta`` is the renormalized resonant product ``theta o sigma(D) theta - c``
    of the field ``theta = (1 - Delta/2) Z``.
    """
    gZ = gradient(Z)
    para = para_lower(gZ, gZ, dealias)
    zz = resonant(Z, Z, dealias)
    smooth = apply_multiplier(zz, lambda x1, x2: 1.0 + 0.25 * np.pi**2 * (x1**2 + x2**2))
    return WickSquare(para - smooth + Theta, para, zz, Theta)


def half_grad_square(Z: GridField, dealias: bool = True) -> GridField:
    """Plain ``|grad Z|^2 / 2`` with the same product convention."""
    gZ = gradient(Z)
    return 0.5 * dot(gZ, gZ, dealias)


__all__ = [
    "ProductTriple",
    "WickSquare",
    "half_grad_square",
    "para_lower",
    "paraproduct",
    "product",
    "resonant",
    "wick_square_grad_z",
]
