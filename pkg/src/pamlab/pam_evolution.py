"""Parabolic Anderson model ``du/dt = Delta u/2 + V u`` on a Dirichlet box.

Time stepping is Strang splitting: half a step of ``exp(V dt/2)``, an exact heat
step in the sine basis, and another potential half step.  With the ``fd``
Laplacian the heat step is the semigroup of the 5-point stencil, which is
positivity preserving.  Magnitudes are tracked as ``u = exp(log_scale) * w`` so
that masses far beyond the float range stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .grid_spectral import BoxSpec, GridField
from .hamiltonian import (
    Laplacian,
    OperatorSpec,
    Spectrum,
    _dst,
    _idst,
    noise_potential,
    renorm_constant,
    top_eigenpairs,
)
from .noise import Route
from .noise import bump as bump_1d

InitialKind = Literal["delta_at_origin", "uniform_one", "grid_field"]

_RESCALE_HI = 1e200
_RESCALE_LO = 1e-200
TAIL_TOL = 1e-8


@dataclass
class InitialCondition:
    """``delta_at_origin`` is a unit-mass bump of support radius ``smoothing`` (default 2 dx)."""

    kind: InitialKind = "delta_at_origin"
    smoothing: float | None = None
    field: GridField | None = None

    def realize(self, box: BoxSpec) -> GridField:
        box = box.with_boundary("dirichlet")
        if self.kind == "uniform_one":
            vals = np.zeros((box.N, box.N))
            vals[1:-1, 1:-1] = 1.0
            return GridField(box, vals)
        if self.kind == "grid_field":
            if self.field is None or self.field.values.shape != (box.N, box.N):
                raise ValueError("grid_field initial condition does not match the grid")
            vals = np.array(self.field.values, dtype=float)
            vals[0, :] = vals[-1, :] = vals[:, 0] = vals[:, -1] = 0.0
            return GridField(box, vals)
        if self.kind != "delta_at_origin":
            raise ValueError(f"unknown initial condition {self.kind!r}")
        eta = 2.0 * box.dx if self.smoothing is None else self.smoothing
        prof = bump_1d(box.coords / (2.0 * eta))
        vals = np.outer(prof, prof)
        vals[0, :] = vals[-1, :] = vals[:, 0] = vals[:, -1] = 0.0
        total = vals.sum() * box.dx**2
        if total <= 0:
            raise ValueError("bump width is below the grid resolution")
        return GridField(box, vals / total)


def inner_box_mask(box: BoxSpec, side: float) -> np.ndarray:
    """Grid points of the centred box ``Q_side``; never empty (contains the point nearest 0)."""
    half = max(0.5 * side, np.abs(box.coords).min())
    x = np.abs(box.coords) <= half + 1e-12
    return np.outer(x, x)


@dataclass
class EvolutionResult:
    """Per-time ``log U``, ``log sup u`` and ``log inf`` over ``Q_{t^a}``; final state as ``exp(log_scale) * u``."""

    times: list[float] = field(default_factory=list)
    mass_log: list[float] = field(default_factory=list)
    sup_log: list[float] = field(default_factory=list)
    inf_log: list[float] = field(default_factory=list)
    snapshots: list[GridField] = field(default_factory=list)
    u: GridField | None = None
    log_scale: float = 0.0

    @property
    def mass(self) -> np.ndarray:
        return np.exp(np.asarray(self.mass_log))

    def rows(self, lambda1: float = float("nan")) -> list[dict]:
        return [
            {"t": t, "mass_log": m, "sup_log": s, "inf_log": i, "lambda1": lambda1}
            for t, m, s, i in zip(self.times, self.mass_log, self.sup_log, self.inf_log)
        ]


def _log(x: float) -> float:
    return math.log(x) if x > 0 else float("-inf")


def evolve(
    op: OperatorSpec,
    ic: InitialCondition | GridField,
    T: float,
    dt: float | None = None,
    record_times: list[float] | None = None,
    inner_exponent: float = 0.5,
    keep_snapshots: bool = False,
) -> EvolutionResult:
    """Strang-split evolution up to ``T``, recording at ``record_times`` (default ``[T]``)."""
    if T <= 0:
        raise ValueError("T must be positive")
    box = op.box
    u0 = ic.realize(box) if isinstance(ic, InitialCondition) else ic
    if u0.values.shape != (box.N, box.N):
        raise ValueError("initial condition does not match the operator grid")
    w = np.array(u0.values[1:-1, 1:-1], dtype=float)
    if np.any(w < 0):
        raise ValueError("initial condition must be non-negative")
    dt = min(0.01, box.dx) if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    rec_times = sorted({float(t) for t in (record_times or [T])})
    if rec_times[0] <= 0 or rec_times[-1] > T + 1e-12:
        raise ValueError("record times must lie in (0, T]")
    targets = sorted(set(rec_times) | {float(T)})
    res = EvolutionResult()
    log_scale = 0.0
    t_now = 0.0
    for target in targets:
        steps = max(1, int(math.ceil((target - t_now) / dt - 1e-9)))
        h = (target - t_now) / steps
        half = np.exp(0.5 * h * op.V)
        full = half * half
        heat = op.heat_multiplier(h)
        w = w * half
        for s in range(steps):
            w = _idst(heat * _dst(w))
            w *= full if s < steps - 1 else half
            peak = float(np.abs(w).max())
            if peak > _RESCALE_HI or 0 < peak < _RESCALE_LO:
                w /= peak
                log_scale += math.log(peak)
        t_now = target
        if target in rec_times:
            inner = inner_box_mask(box, target**inner_exponent)[1:-1, 1:-1]
            res.times.append(target)
            res.mass_log.append(_log(float(w.sum()) * box.dx**2) + log_scale)
            res.sup_log.append(_log(float(w.max())) + log_scale)
            res.inf_log.append(_log(float(w[inner].min())) + log_scale)
            if keep_snapshots:
                res.snapshots.append(_embed(box, w * math.exp(log_scale)))
    res.u = _embed(box, w)
    res.log_scale = log_scale
    return res


def _embed(box: BoxSpec, w: np.ndarray) -> GridField:
    full = np.zeros((box.N, box.N))
    full[1:-1, 1:-1] = w
    return GridField(box, full)


# --------------------------------------------------------------------------
# Spectral representation
# --------------------------------------------------------------------------


@dataclass
class SpectralExpansion:
    """Truncated eigen-expansion and the weight ``exp(t (lambda_n - lambda_1))`` of its last term."""

    value: GridField | float
    tail_ratio: float
    resolved: bool


def _terms(spectrum: Spectrum, n_terms: int | None) -> int:
    n = len(spectrum.values) if n_terms is None else n_terms
    if n < 1 or n > len(spectrum.values):
        raise ValueError(f"spectrum holds {len(spectrum.values)} eigenpairs, {n} requested")
    return n


def _tail(spectrum: Spectrum, n: int, t: float) -> tuple[float, bool]:
    vals = spectrum.values
    if n == vals.size and spectrum.method == "dense" and vals.size == (spectrum.box.N - 2) ** 2:
        return 0.0, True
    ratio = math.exp(t * (vals[n - 1] - vals[0]))
    return ratio, ratio <= TAIL_TOL


def _point_index(box: BoxSpec, x: tuple[float, float]) -> tuple[int, int]:
    return tuple(int(np.abs(box.coords - xi).argmin()) for xi in x)


def spectral_solution(
    spectrum: Spectrum,
    x: tuple[float, float],
    t: float,
    n_terms: int | None = None,
    y: tuple[float, float] | None = None,
) -> SpectralExpansion:
    """``u^{delta_x}(t, .) = sum_n exp(t lambda_n) v_n(x) v_n(.)``, at grid point ``y`` if given."""
    n = _terms(spectrum, n_terms)
    box = spectrum.box
    ix = _point_index(box, x)
    weights = np.exp(t * spectrum.values[:n]) * np.array([v.values[ix] for v in spectrum.vectors[:n]])
    ratio, ok = _tail(spectrum, n, t)
    if y is not None:
        iy = _point_index(box, y)
        return SpectralExpansion(float(sum(c * v.values[iy] for c, v in zip(weights, spectrum.vectors))), ratio, ok)
    vals = np.tensordot(weights, np.stack([v.values for v in spectrum.vectors[:n]]), axes=1)
    return SpectralExpansion(GridField(box, vals), ratio, ok)


def spectral_mass_log(
    spectrum: Spectrum, ic: InitialCondition | GridField, t: float, n_terms: int | None = None
) -> SpectralExpansion:
    """``log sum_n exp(t lambda_n) <v_n, u_0> <v_n, 1>`` with grid inner products."""
    n = _terms(spectrum, n_terms)
    box = spectrum.box
    u0 = ic.realize(box) if isinstance(ic, InitialCondition) else ic
    h2 = box.dx**2
    V = np.stack([v.values for v in spectrum.vectors[:n]])
    a = np.tensordot(V, u0.values, axes=2) * h2
    b = V.sum(axis=(1, 2)) * h2
    lam = spectrum.values[:n]
    shift = t * lam[0]
    total = float(np.sum(a * b * np.exp(t * lam - shift)))
    ratio, ok = _tail(spectrum, n, t)
    return SpectralExpansion(_log(total) + shift, ratio, ok)


def full_spectrum(op: OperatorSpec) -> Spectrum:
    """Every eigenpair of a small operator (dense)."""
    if op.box.N > 72:
        raise ValueError("full spectral decomposition is limited to N <= 72")
    return top_eigenpairs(op, op.n * op.n, method="dense")


def dirichlet_series_mass(L: float, t: float, terms: int = 4001) -> float:
    """Continuum mass of the ``Delta/2`` heat flow from ``u_0 = 1`` on ``Q_L``."""
    k = np.arange(1, terms + 1, 2)
    one_d = np.sum(8.0 * L / (np.pi**2 * k**2) * np.exp(-(np.pi**2) * k**2 * t / (2.0 * L**2)))
    return float(one_d**2)


def dirichlet_series_value(L: float, t: float, x: tuple[float, float] = (0.0, 0.0), terms: int = 4001) -> float:
    """Continuum ``u(t, x)`` for the ``Delta/2`` heat flow from ``u_0 = 1`` on ``Q_L``."""
    k = np.arange(1, terms + 1, 2)
    out = 1.0
    for xi in x:
        s = np.sin(np.pi * k * (xi + L / 2) / L)
        out *= float(np.sum(4.0 / (np.pi * k) * s * np.exp(-(np.pi**2) * k**2 * t / (2.0 * L**2))))
    return out


def dirichlet_heat_kernel(L: float, t: float, x: tuple[float, float], y: tuple[float, float], terms: int = 400) -> float:
    """Continuum Dirichlet heat kernel of ``Delta/2`` on ``Q_L``."""
    k = np.arange(1, terms + 1)
    out = 1.0
    for xi, yi in zip(x, y):
        sx = np.sin(np.pi * k * (xi + L / 2) / L)
        sy = np.sin(np.pi * k * (yi + L / 2) / L)
        out *= float(np.sum(2.0 / L * sx * sy * np.exp(-(np.pi**2) * k**2 * t / (2.0 * L**2))))
    return out


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def _noise_operator(L: float, eps: float, seed: int, route: Route, eps_per_dx: float, laplacian: Laplacian):
    xi = noise_potential(L, eps, seed, route, eps_per_dx)
    c = renorm_constant(L, eps, route)
    return OperatorSpec(xi.box, xi.values - c, laplacian), c


def mass_vs_eigenvalue_experiment(
    L: float,
    eps: float,
    seed: int,
    T_list: list[float] = (2.0, 4.0, 8.0, 16.0),
    dt: float = 1e-3,
    route: Route = "fourier",
    eps_per_dx: float = 2.0,
    laplacian: Laplacian = "fd",
) -> dict:
    """``(1/t) log U_L(t)`` against ``lambda_1`` for a single noise sample.

    Rows hold ``t, mass_log, lambda1, gap`` and, for small grids, the relative
    gap to the eigen-expansion mass.  ``decay_exponent`` is minus the fitted
    slope of ``log |(1/t) log U - lambda_1|`` against ``log t``.
    """
    op, c = _noise_operator(L, eps, seed, route, eps_per_dx, laplacian)
    ic = InitialCondition("delta_at_origin")
    full = op.box.N <= 72
    spec = full_spectrum(op) if full else top_eigenpairs(op, 2)
    lam1, lam2 = float(spec.values[0]), float(spec.values[1])
    res = evolve(op, ic, max(T_list), dt, record_times=list(T_list))
    rows = []
    for t, ml, s, i in zip(res.times, res.mass_log, res.sup_log, res.inf_log):
        row = {
            "t": t,
            "mass_log": ml,
            "sup_log": s,
            "inf_log": i,
            "lambda1": lam1,
            "gap12": lam1 - lam2,
            "deviation": abs(ml / t - lam1),
        }
        if full:
            row["spectral_rel_gap"] = abs(math.expm1(ml - spectral_mass_log(spec, ic, t).value))
        rows.append(row)
    t = np.array([r["t"] for r in rows])
    dev = np.array([r["deviation"] for r in rows])
    slope = float(np.polyfit(np.log(t), np.log(dev), 1)[0])
    return {"rows": rows, "lambda1": lam1, "c_eps": c, "decay_exponent": -slope, "N": op.box.N}


def sup_inf_experiment(
    L: float,
    eps: float,
    seed: int,
    a: float = 0.5,
    T_list: list[float] = (2.0, 4.0, 8.0),
    dt: float = 1e-3,
    route: Route = "fourier",
    eps_per_dx: float = 2.0,
    laplacian: Laplacian = "fd",
) -> dict:
    """``log sup u``, ``log inf_{Q_{t^a}} u`` and ``log U`` for delta and uniform initial data."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    if max(T_list) ** a >= L / 2:
        raise ValueError("inner box Q_{t^a} exceeds the domain")
    op, _ = _noise_operator(L, eps, seed, route, eps_per_dx, laplacian)
    delta = evolve(op, InitialCondition("delta_at_origin"), max(T_list), dt, list(T_list), a)
    flat = evolve(op, InitialCondition("uniform_one"), max(T_list), dt, list(T_list), a)
    rows = []
    for k, t in enumerate(delta.times):
        lu = delta.mass_log[k]
        rows.append(
            {
                "t": t,
                "mass_log": lu,
                "sup_log": delta.sup_log[k],
                "inf_log": delta.inf_log[k],
                "mean_log": lu - 2.0 * math.log(L),
                "spread": (delta.sup_log[k] - delta.inf_log[k]) / abs(lu) if lu != 0 else float("inf"),
                "uniform_mass_log": flat.mass_log[k],
                "ic_gap": abs(flat.mass_log[k] - lu) / t,
            }
        )
    return {"rows": rows}
