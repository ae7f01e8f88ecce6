"""Feynman-Kac representation of the PAM mass after a partial Girsanov transform.

With ``Z = (1 - Delta/2)^{-1} xi`` and ``Y`` solving
``(eta - Delta/2) Y = |grad Z|^2/2 - c + grad Y . grad Z``, the diffusion
``dX = grad(Z + Y)(X) dt + dB`` carries the weight

    log D(r, t) = int_r^t (Z + eta Y + |grad Y|^2/2)(X_s) ds + (Z + Y)(X_r) - (Z + Y)(X_t)

and ``u^1(t, x) = E_x[D(0, t); X stays in Q_L]`` for ``du/dt = Delta u/2 + (xi - c) u``.
Paths are simulated by Euler-Maruyama with a Brownian-bridge correction for
exits between steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid_spectral import BoxSpec, GridField, apply_multiplier, besov_norm, dot, gradient, sigma_symbol
from .hamiltonian import OperatorSpec, noise_potential, renorm_constant
from .noise import Route
from .paracontrolled import half_grad_square

BATCH = 1024
DEFAULT_ALPHA = -9.0 / 8.0
DEFAULT_BETA = 5.0 / 4.0


class PicardError(RuntimeError):
    """Raised when the fixed-point iteration for Y fails to contract or converge."""

    def __init__(self, message: str, factors: list[float] | None = None) -> None:
        super().__init__(message)
        self.factors = factors or []


# --------------------------------------------------------------------------
# Z, Y and the drift
# --------------------------------------------------------------------------


def compute_Z(theta: GridField) -> GridField:
    """``Z = (1 - Delta/2)^{-1} theta``."""
    return apply_multiplier(theta, sigma_symbol)


def resolvent_symbol(eta: float):
    """Symbol of ``(eta - Delta/2)^{-1}`` in the ``k/L`` convention."""

    def m(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return 1.0 / (eta + 0.5 * np.pi**2 * (x1**2 + x2**2))

    return m


def _shifted_operator(eta: float):
    def m(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return eta + 0.5 * np.pi**2 * (x1**2 + x2**2)

    return m


@dataclass
class PicardResult:
    Y: GridField
    iterations: int
    residual: float
    factors: list[float]

    @property
    def contraction(self) -> float:
        """Geometric mean of the ratios of successive ``C^beta`` increments."""
        f = np.asarray([x for x in self.factors if x > 0])
        return float(np.exp(np.mean(np.log(f)))) if f.size else 0.0


def picard_residual(Y: GridField, f: GridField, g: tuple[GridField, GridField], eta: float) -> float:
    """``||(eta - Delta/2) Y - f - grad Y . g||_2 / ||f||_2`` (absolute if ``f = 0``)."""
    lhs = apply_multiplier(Y, _shifted_operator(eta))
    r = lhs - f - dot(gradient(Y), g)
    nf = f.l2_norm()
    return r.l2_norm() / nf if nf > 0 else r.l2_norm()


def picard_solve_Y(
    f: GridField,
    g: tuple[GridField, GridField],
    eta: float,
    beta: float = DEFAULT_BETA,
    tol: float = 1e-8,
    max_iter: int = 200,
    Y0: GridField | None = None,
) -> PicardResult:
    """Fixed point of ``v -> (eta - Delta/2)^{-1}(f + grad v . g)``.

    The contraction factor is the ratio of successive increments in ``C^beta``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    R = resolvent_symbol(eta)
    v = GridField(f.box, np.zeros_like(f.values)) if Y0 is None else Y0
    factors: list[float] = []
    prev = None
    for it in range(1, max_iter + 1):
        new = apply_multiplier(f + dot(gradient(v), g), R)
        inc = besov_norm(new - v, beta)
        v = new
        if prev is not None and prev > 0:
            factors.append(inc / prev)
            if len(factors) >= 3 and min(factors[-3:]) >= 1.0:
                raise PicardError(f"iteration does not contract at eta={eta:g}; increase eta", factors)
        prev = inc
        res = picard_residual(v, f, g, eta)
        if res <= tol:
            return PicardResult(v, it, res, factors)
    raise PicardError(f"no convergence in {max_iter} iterations (residual {res:.3e})", factors)


def contraction_factor(
    f: GridField, g: tuple[GridField, GridField], eta: float, beta: float = DEFAULT_BETA, iters: int = 8
) -> float:
    """Geometric-mean ratio of successive ``C^beta`` increments over ``iters`` Picard steps."""
    R = resolvent_symbol(eta)
    v = GridField(f.box, np.zeros_like(f.values))
    incs = []
    for _ in range(iters + 1):
        new = apply_multiplier(f + dot(gradient(v), g), R)
        incs.append(besov_norm(new - v, beta))
        v = new
        if incs[-1] == 0 or incs[-1] < 1e-300:
            break
    incs = np.array(incs)
    if incs.size < 3 or np.any(incs[1:] <= 0):
        # an exactly vanishing increment means the iteration has already converged
        return 0.0
    ratios = incs[2:] / incs[1:-1]
    return float(np.exp(np.mean(np.log(ratios))))


def _check_exponents(alpha: float, beta: float) -> None:
    if not -4.0 / 3.0 < alpha < -1.0:
        raise ValueError("alpha must lie in (-4/3, -1)")
    if not -alpha < beta < 2.0 * alpha + 4.0:
        raise ValueError("beta must lie in (-alpha, 2 alpha + 4)")


def eta_exponent(alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> float:
    _check_exponents(alpha, beta)
    return 2.0 / (2.0 * alpha + 4.0 - beta)


def eta_from_M(M: float, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA, C_cal: float = 1.0) -> float:
    """``C_cal (1 + M)^{2/(2 alpha + 4 - beta)}``."""
    if M < 0:
        raise ValueError("M must be non-negative")
    return float(C_cal * (1.0 + M) ** eta_exponent(alpha, beta))


def compute_M(Z: GridField, wick: GridField, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> float:
    """``max(||wick||_{C^{2 alpha + 2}}, ||grad Z||_{C^{alpha + 1}})``."""
    _check_exponents(alpha, beta)
    return max(besov_norm(wick, 2.0 * alpha + 2.0), besov_norm(gradient(Z), alpha + 1.0))


def calibrate_C(
    references: list[tuple[GridField, tuple[GridField, GridField], float]],
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    target: float = 0.5,
    log2_range: tuple[int, int] = (-30, 10),
) -> float:
    """Smallest power of two ``C`` whose ``eta_from_M`` gives contraction below ``target``.

    ``references`` holds ``(f, g, M)`` triples.  The factor is monotone in
    ``C`` in practice, so the exponent is found by bisection.
    """

    def ok(k: int) -> bool:
        C = 2.0**k
        return all(contraction_factor(f, g, eta_from_M(M, alpha, beta, C), beta) < target for f, g, M in references)

    lo, hi = log2_range
    if not ok(hi):
        raise PicardError(f"no C up to 2^{hi} contracts on the calibration set")
    if ok(lo):
        return 2.0**lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 2.0**hi


@dataclass
class DriftData:
    """Fields entering the transformed diffusion; ``W = Z + eta Y + |grad Y|^2/2``."""

    Z: GridField
    Y: GridField
    eta: float
    M: float
    gradZY: tuple[GridField, GridField]
    wick: GridField
    W: GridField
    F: GridField
    picard: PicardResult | None = None

    @property
    def box(self) -> BoxSpec:
        return self.Z.box

    @classmethod
    def zero(cls, box: BoxSpec) -> "DriftData":
        z = GridField(box, np.zeros((box.N, box.N)))
        return cls(z, z, 1.0, 0.0, gradient(z), z, z, z)

    @classmethod
    def constant(cls, box: BoxSpec, value: float) -> "DriftData":
        """``Z = value``, ``Y = 0``: no drift, weight ``exp(value * (t - r))``."""
        z = GridField(box, np.zeros((box.N, box.N)))
        c = GridField(box, np.full((box.N, box.N), float(value)))
        return cls(c, z, 1.0, 0.0, gradient(z), z, c, c)


def build_drift(
    xi: GridField,
    c_eps: float,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    C_cal: float = 1.0,
    eta: float | None = None,
    tol: float = 1e-8,
) -> DriftData:
    """Z, Y, eta and M for the mollified noise ``xi`` with counterterm ``c_eps``."""
    Z = compute_Z(xi)
    wick = half_grad_square(Z) - c_eps
    M = compute_M(Z, wick, alpha, beta)
    eta = eta_from_M(M, alpha, beta, C_cal) if eta is None else eta
    gZ = gradient(Z)
    pic = picard_solve_Y(wick, gZ, eta, beta, tol)
    Y = pic.Y
    gY = gradient(Y)
    grad = (gZ[0] + gY[0], gZ[1] + gY[1])
    W = Z + eta * Y + 0.5 * GridField(Y.box, gY[0].values ** 2 + gY[1].values ** 2)
    return DriftData(Z, Y, eta, M, grad, wick, W, Z + Y, pic)


# --------------------------------------------------------------------------
# Paths
# --------------------------------------------------------------------------


def interpolate(f: GridField, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of grid values at points ``pts[..., 2]`` (clamped to the box)."""
    box = f.box
    u = (np.clip(pts, -box.L / 2, box.L / 2) + box.L / 2) / box.dx
    i = np.clip(np.floor(u).astype(np.int64), 0, box.N - 2)
    a = u - i
    v = f.values
    i0, i1 = i[..., 0], i[..., 1]
    a0, a1 = a[..., 0], a[..., 1]
    return (
        (1 - a0) * (1 - a1) * v[i0, i1]
        + a0 * (1 - a1) * v[i0 + 1, i1]
        + (1 - a0) * a1 * v[i0, i1 + 1]
        + a0 * a1 * v[i0 + 1, i1 + 1]
    )


def _bridge_survival(x0: np.ndarray, x1: np.ndarray, half: float, dt: float) -> np.ndarray:
    """Probability that a Brownian bridge between ``x0`` and ``x1`` stays in ``[-half, half]^2``."""
    d0 = half - np.abs(x0)
    d1 = half - np.abs(x1)
    inside = np.all((d0 > 0) & (d1 > 0), axis=-1)
    p = np.ones(x0.shape[0])
    for side in (1.0, -1.0):
        a0 = half - side * x0
        a1 = half - side * x1
        cross = np.exp(-2.0 * np.clip(a0, 0, None) * np.clip(a1, 0, None) / dt)
        p *= np.prod(1.0 - cross, axis=-1)
    return np.where(inside, p, 0.0)


@dataclass
class PathBatch:
    """Outcome of ``n_paths`` simulated paths; ``stayed[side]`` flags paths never leaving ``Q_side``."""

    n_paths: int
    dt: float
    t_final: float
    seed: int
    x_final: np.ndarray
    log_D: np.ndarray
    alive: np.ndarray
    stayed: dict[float, np.ndarray] = field(default_factory=dict)
    positions: np.ndarray | None = None


def _rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(batch)])))


def simulate_paths(
    drift: DriftData,
    x0: tuple[float, float],
    t: float,
    dt: float,
    n_paths: int,
    seed: int,
    sub_boxes: tuple[float, ...] = (),
    record: int = 0,
) -> PathBatch:
    """Euler-Maruyama paths of ``dX = grad(Z + Y) dt + dB`` killed on leaving ``Q_L``.

    ``sub_boxes`` lists side lengths of centred boxes whose exits are flagged.
    ``record`` keeps the full trajectories of the first ``record`` paths.
    """
    if t <= 0 or dt <= 0:
        raise ValueError("t and dt must be positive")
    box = drift.box
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    h = t / steps
    sides = sorted(set(float(s) for s in sub_boxes) | {box.L})
    if sides[-1] > box.L + 1e-12:
        raise ValueError("sub-boxes must fit inside the drift box")
    x_out, logd_out, alive_out = [], [], []
    stayed_out = {s: [] for s in sides}
    traj = []
    for b, start in enumerate(range(0, n_paths, BATCH)):
        m = min(BATCH, n_paths - start)
        rng = _rng(seed, b)
        x = np.tile(np.asarray(x0, dtype=float), (m, 1))
        stay = {s: np.all(np.abs(x) < s / 2, axis=1) for s in sides}
        w_prev = interpolate(drift.W, x)
        acc = 0.5 * h * w_prev
        F0 = interpolate(drift.F, x)
        keep = min(record - start, m) if record > start else 0
        path = [x[:keep].copy()] if keep else None
        for _ in range(steps):
            drift_now = np.stack([interpolate(g, x) for g in drift.gradZY], axis=-1)
            x_new = x + h * drift_now + math.sqrt(h) * rng.standard_normal((m, 2))
            u = rng.random(m)
            for s in sides:
                stay[s] &= u < _bridge_survival(x, x_new, s / 2, h)
            x = x_new
            w_now = interpolate(drift.W, x)
            acc += h * w_now
            if path is not None:
                path.append(x[:keep].copy())
        acc -= 0.5 * h * w_now
        logd = acc + F0 - interpolate(drift.F, x)
        x_out.append(x)
        logd_out.append(logd)
        alive_out.append(stay[box.L])
        for s in sides:
            stayed_out[s].append(stay[s])
        if path is not None:
            traj.append(np.stack(path))
    return PathBatch(
        n_paths,
        h,
        t,
        seed,
        np.concatenate(x_out),
        np.concatenate(logd_out),
        np.concatenate(alive_out),
        {s: np.concatenate(v) for s, v in stayed_out.items()},
        np.concatenate(traj, axis=1) if traj else None,
    )


def weight_D(path: np.ndarray, drift: DriftData, r: float, t: float) -> np.ndarray:
    """``log D(r, t)`` for trajectories ``path[step, path_id, 2]`` sampled uniformly on ``[r, t]``."""
    steps = path.shape[0] - 1
    if steps < 1 or t <= r:
        raise ValueError("path must cover a non-empty interval")
    h = (t - r) / steps
    W = interpolate(drift.W, path)
    integral = h * (W.sum(axis=0) - 0.5 * (W[0] + W[-1]))
    return integral + interpolate(drift.F, path[0]) - interpolate(drift.F, path[-1])


# --------------------------------------------------------------------------
# Estimators
# --------------------------------------------------------------------------


@dataclass
class WeightedEstimate:
    """Monte Carlo mean of weights; ``log_domain`` when ``mean`` holds a logarithm."""

    mean: float
    stderr: float
    n_effective: float
    n_paths: int
    log_domain: bool = False
    degenerate: bool = False

    @property
    def log_mean(self) -> float:
        return self.mean if self.log_domain else (math.log(self.mean) if self.mean > 0 else float("-inf"))


def _estimate(log_w: np.ndarray, mask: np.ndarray) -> WeightedEstimate:
    n = log_w.size
    if not np.any(mask):
        return WeightedEstimate(0.0, 0.0, 0.0, n, degenerate=True)
    w = np.where(mask, np.exp(np.where(mask, log_w, 0.0)), 0.0)
    mean = float(w.mean())
    stderr = float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    n_eff = float(w.sum() ** 2 / np.sum(w**2))
    return WeightedEstimate(mean, stderr, n_eff, n)


def mc_total_mass(
    drift: DriftData,
    t: float,
    dt: float,
    n_paths: int,
    seed: int,
    x0: tuple[float, float] = (0.0, 0.0),
) -> WeightedEstimate:
    """``U_L^x(t) = E[D(0, t); X stays in Q_L]``."""
    batch = simulate_paths(drift, x0, t, dt, n_paths, seed)
    return _estimate(batch.log_D, batch.alive)


def escape_probability(
    drift: DriftData,
    r: float,
    t: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> WeightedEstimate:
    """Probability under the transformed measure that ``X`` leaves ``Q_r`` before ``t``."""
    if not 0 < r < drift.box.L + 1e-12:
        raise ValueError("r must lie in (0, L]")
    batch = simulate_paths(drift, (0.0, 0.0), t, dt, n_paths, seed, sub_boxes=(r,))
    ind = (~batch.stayed[float(r)]).astype(float)
    n = ind.size
    p = float(ind.mean())
    return WeightedEstimate(p, float(ind.std(ddof=1) / math.sqrt(n)), float(n), n)


def escape_bound(C: float, a: float, L: float, r: float, t: float) -> float:
    """Logarithm of ``C exp(C a^5 t (log L)^5 - r^2/(C t))``."""
    return math.log(C) + C * a**5 * t * math.log(L) ** 5 - r**2 / (C * t)


def weight_bound(C: float, a: float, L: float, t: float) -> float:
    """``C a^5 t (log L)^5``, the corridor for ``|log D|``."""
    return C * a**5 * t * math.log(L) ** 5


# --------------------------------------------------------------------------
# Brownian oracles
# --------------------------------------------------------------------------


def interval_survival(half: float, t: float, x: float = 0.0, terms: int = 4001) -> float:
    """``P(B stays in (-half, half) up to t | B_0 = x)`` for standard Brownian motion."""
    L = 2.0 * half
    k = np.arange(1, terms + 1, 2)
    s = np.sin(np.pi * k * (x + half) / L)
    return float(np.sum(4.0 / (np.pi * k) * s * np.exp(-(np.pi**2) * k**2 * t / (2.0 * L**2))))


def box_survival(side: float, t: float) -> float:
    """Planar Brownian motion from 0 staying in ``Q_side`` up to ``t``."""
    return interval_survival(side / 2.0, t) ** 2


def box_escape_oracle(side: float, t: float) -> float:
    return 1.0 - box_survival(side, t)


def reflection_escape_leading(side: float, t: float) -> float:
    """Leading-order escape probability ``4 * 2 P(B_t > side/2)`` from the reflection principle."""
    return 4.0 * math.erfc(side / 2.0 / math.sqrt(2.0 * t))


def annulus_oracle(inner: float, outer: float, t: float) -> float:
    """``P(leave Q_inner, stay in Q_outer) / P(stay in Q_inner)`` for planar Brownian motion."""
    s_in = box_survival(inner, t)
    return (box_survival(outer, t) - s_in) / s_in


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def noise_drift(
    L: float,
    eps: float,
    seed: int,
    route: Route = "fourier",
    eps_per_dx: float = 2.0,
    C_cal: float = 1.0,
    eta: float | None = None,
) -> tuple[DriftData, GridField, float]:
    """Drift, mollified noise and counterterm for one seed."""
    xi = noise_potential(L, eps, seed, route, eps_per_dx)
    c = renorm_constant(L, eps, route)
    return build_drift(xi, c, C_cal=C_cal, eta=eta), xi, c


def pde_reference(xi: GridField, c_eps: float, t: float, dt: float = 1e-3) -> float:
    """``u^1(t, 0)`` from the time stepper with the spectral Laplacian."""
    from .pam_evolution import InitialCondition, evolve

    box = xi.box.with_boundary("dirichlet")
    op = OperatorSpec(box, xi.values - c_eps, "spectral")
    res = evolve(op, InitialCondition("uniform_one"), t, dt)
    i = int(np.abs(box.coords).argmin())
    return float(res.u.values[i, i] * math.exp(res.log_scale))


def box_splitting_experiment(
    drift: DriftData,
    L_t: float,
    t: float,
    k_max: int = 1,
    dt: float = 1e-3,
    n_paths: int = 10_000,
    seed: int = 0,
) -> dict:
    """Split the mass on ``Q_{L_t^{k_max+1}}`` by the smallest box ``Q_{L_t^{k+1}}`` containing the path.

    ``U_k`` is the weighted mass of paths that leave ``Q_{L_t^k}`` (for k >= 1)
    but stay in ``Q_{L_t^{k+1}}``.
    """
    sides = [L_t ** (k + 1) for k in range(k_max + 1)]
    if sides[-1] > drift.box.L + 1e-9:
        raise ValueError("drift box is smaller than the outermost splitting box")
    batch = simulate_paths(drift, (0.0, 0.0), t, dt, n_paths, seed, sub_boxes=tuple(sides))
    parts = []
    prev = np.zeros(n_paths, dtype=bool)
    for s in sides:
        now = batch.stayed[float(s)]
        parts.append(_estimate(batch.log_D, now & ~prev))
        prev = now
    total = _estimate(batch.log_D, batch.stayed[float(sides[-1])])
    return {
        "L_t": L_t,
        "t": t,
        "sides": sides,
        "U": [p.mean for p in parts],
        "stderr": [p.stderr for p in parts],
        "total": total.mean,
        "total_stderr": total.stderr,
        "batch": batch,
    }


def annulus_ratio_estimate(batch: PathBatch, inner: float, outer: float, weighted: bool = True) -> tuple[float, float]:
    """``U_1 / U_0`` and its delta-method standard error from one path batch."""
    w = np.exp(batch.log_D) if weighted else np.ones(batch.n_paths)
    a = w * batch.stayed[float(inner)]
    b = w * (batch.stayed[float(outer)] & ~batch.stayed[float(inner)])
    ma, mb = a.mean(), b.mean()
    ratio = mb / ma
    n = a.size
    cov = np.cov(np.stack([a, b]), ddof=1) / n
    var = (cov[1, 1] - 2 * ratio * cov[0, 1] + ratio**2 * cov[0, 0]) / ma**2
    return float(ratio), float(math.sqrt(max(var, 0.0)))
