"""Acceptance criteria, one test per criterion; each records a PASS/FAIL line."""

import math
import statistics
import time

import numpy as np
import pytest

from pamlab.chi_variational import chi_two_methods
from pamlab.feynman_kac import (
    DriftData,
    annulus_oracle,
    annulus_ratio_estimate,
    box_escape_oracle,
    box_splitting_experiment,
    compute_M,
    compute_Z,
    contraction_factor,
    escape_probability,
    mc_total_mass,
    noise_drift,
    pde_reference,
    simulate_paths,
)
from pamlab.grid_spectral import BoxSpec, GridField, gradient, product
from pamlab.hamiltonian import (
    OperatorSpec,
    calibrated_law,
    noise_potential,
    renorm_constant,
    renormalized_eigenvalues,
    top_eigenpairs,
)
from pamlab.noise import renorm_constant_exact
from pamlab.pam_evolution import InitialCondition, dirichlet_series_value, evolve, mass_vs_eigenvalue_experiment
from pamlab.paracontrolled import half_grad_square, paraproduct

pytestmark = pytest.mark.acceptance

# frozen from the first full run: largest median of M / log L over L = 4..64 was 0.862
M_OVER_LOG_L_BOUND = 0.9
# reference value of chi from the shooting method
CHI_HAT = 0.3418541488094991


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_01_analytic_spectrum(report_criterion):
    with Timer() as tm:
        N = 257
        op = OperatorSpec(BoxSpec(1.0, N, "dirichlet"), np.zeros((N, N)), "fd")
        spec = top_eigenpairs(op, 3, tol=1e-10)
    lam = spec.values
    gap1 = abs(lam[0] + math.pi**2)
    deg = abs(lam[1] - lam[2])
    ok = gap1 <= 5e-3 and deg <= 1e-8 and tm.elapsed < 10
    detail = f"|lambda1+pi^2|={gap1:.2e} |lambda2-lambda3|={deg:.2e} time={tm.elapsed:.1f}s"
    assert report_criterion(1, "analytic spectrum", ok, detail), detail


def test_02_shift_gauge(report_criterion):
    worst_eig = worst_evo = 0.0
    rng = np.random.default_rng(2024)
    with Timer() as tm:
        for case in range(20):
            N = int(rng.choice([17, 21, 25]))
            L = float(rng.uniform(1.0, 4.0))
            c = float(rng.uniform(-3.0, 3.0))
            op = OperatorSpec(BoxSpec(L, N, "dirichlet"), rng.normal(size=(N, N)) * 2.0)
            a = top_eigenpairs(op, 3, method="dense").values
            b = top_eigenpairs(op.shifted(c), 3, method="dense").values
            worst_eig = max(worst_eig, float(np.max(np.abs(b - (a + c)) / np.abs(a + c))))
            t = 0.3
            u = evolve(op, InitialCondition("uniform_one"), t, 1e-2)
            v = evolve(op.shifted(c), InitialCondition("uniform_one"), t, 1e-2)
            ua = u.u.values * math.exp(u.log_scale + c * t)
            vb = v.u.values * math.exp(v.log_scale)
            worst_evo = max(worst_evo, float(np.abs(vb - ua).max() / np.abs(ua).max()))
    ok = worst_eig <= 1e-10 and worst_evo <= 1e-10 and tm.elapsed < 30
    detail = f"max rel eig={worst_eig:.2e} max rel evolve={worst_evo:.2e} time={tm.elapsed:.1f}s"
    assert report_criterion(2, "shift gauge", ok, detail), detail


def test_03_bony_reconstruction(report_criterion):
    box = BoxSpec(3.0, 129)
    rng = np.random.default_rng(3)
    worst = 0.0
    with Timer() as tm:
        for _ in range(100):
            u = GridField(box, rng.normal(size=(129, 129)))
            v = GridField(box, rng.normal(size=(129, 129)))
            ref = product(u, v).values
            got = paraproduct(u, v).total().values
            worst = max(worst, float(np.abs(got - ref).max() / np.abs(ref).max()))
    ok = worst <= 1e-9 and tm.elapsed < 30
    detail = f"max rel error={worst:.2e} time={tm.elapsed:.1f}s"
    assert report_criterion(3, "Bony reconstruction", ok, detail), detail


def test_04_renormalization_slope(report_criterion):
    with Timer() as tm:
        eps = np.array([2.0**-j for j in range(4, 13)])
        y = np.array([0.25 * renorm_constant_exact(8.0, e) for e in eps])
    x = np.log(1.0 / eps)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    r2 = 1.0 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    rel = abs(slope * math.pi - 1.0)
    ok = rel <= 0.02 and r2 >= 0.999 and tm.elapsed < 20
    detail = f"slope={slope:.6f} pi*slope={slope * math.pi:.5f} R2={r2:.6f} time={tm.elapsed:.1f}s"
    assert report_criterion(4, "renormalization slope", ok, detail), detail


def test_05_eigenvalue_stabilization(report_criterion):
    js = (3, 4, 5, 6)
    lam = np.zeros((10, len(js)))
    raw = np.zeros_like(lam)
    with Timer() as tm:
        for seed in range(10):
            for k, j in enumerate(js):
                spec = renormalized_eigenvalues(8.0, 2.0**-j, seed)
                lam[seed, k] = spec.values[0]
                raw[seed, k] = spec.values[0] + spec.extra["c_eps"]
    diffs = np.median(np.abs(np.diff(lam, axis=1)), axis=0)
    decreasing = bool(np.all(np.diff(diffs) < 0))
    x = np.log(2.0 ** np.array(js))
    raw_slope = float(np.polyfit(x, np.median(raw, axis=0), 1)[0])
    prefactor = calibrated_law(8.0, "fourier")[0]
    slope_ok = abs(raw_slope / prefactor - 1.0) <= 0.10
    ok = decreasing and slope_ok and tm.elapsed < 600
    detail = (
        f"median |dlambda|={np.array2string(diffs, precision=4)} raw slope={raw_slope:.4f} "
        f"prefactor={prefactor:.4f} time={tm.elapsed:.0f}s"
    )
    assert report_criterion(5, "renormalized eigenvalue stabilization", ok, detail), detail


def test_06_mass_vs_eigenvalue(report_criterion):
    exps, gaps = [], []
    with Timer() as tm:
        for seed in (1, 2, 3):
            out = mass_vs_eigenvalue_experiment(4.0, 0.25, seed, [2.0, 4.0, 8.0, 16.0], dt=1e-4)
            exps.append(out["decay_exponent"])
            gaps.append(max(r["spectral_rel_gap"] for r in out["rows"] if r["t"] >= 1))
    med = statistics.median(exps)
    ok = 0.8 <= med <= 1.2 and max(gaps) <= 1e-4 and tm.elapsed < 300
    detail = (
        f"decay exponents={[round(e, 3) for e in exps]} median={med:.3f} "
        f"max spectral gap={max(gaps):.2e} time={tm.elapsed:.0f}s"
    )
    assert report_criterion(6, "mass vs eigenvalue", ok, detail), detail


def test_07_feynman_kac_vs_pde(report_criterion):
    z_noise, z_zero = [], []
    with Timer() as tm:
        for seed in range(5):
            drift, xi, c = noise_drift(4.0, 0.25, seed, C_cal=2.0**-4)
            est = mc_total_mass(drift, 1.0, 1e-3, 10_000, seed)
            z_noise.append((est.mean - pde_reference(xi, c, 1.0)) / est.stderr)
        zero = mc_total_mass(DriftData.zero(BoxSpec(4.0, 33)), 1.0, 1e-3, 10_000, 0)
        z_zero.append((zero.mean - dirichlet_series_value(4.0, 1.0)) / zero.stderr)
    ok = max(map(abs, z_noise + z_zero)) < 3 and tm.elapsed < 300
    detail = f"z (noise)={[round(z, 2) for z in z_noise]} z (zero)={z_zero[0]:.2f} time={tm.elapsed:.0f}s"
    assert report_criterion(7, "Feynman-Kac vs PDE", ok, detail), detail


def test_08_picard_solver(report_criterion):
    with Timer() as tm:
        drift, _, _ = noise_drift(4.0, 0.125, 0, C_cal=2.0**-4)
        residual = drift.picard.residual
        gZ = gradient(drift.Z)
        etas = 2.0 ** np.arange(2, 9)
        q = [contraction_factor(drift.wick, gZ, e) for e in etas]
    slope = float(np.polyfit(np.log(etas), np.log(q), 1)[0])
    ok = residual <= 1e-8 and abs(slope + 0.25) <= 0.25 * 0.25 and tm.elapsed < 60
    detail = f"residual={residual:.2e} (relative to ||f||) contraction exponent={slope:.3f} time={tm.elapsed:.1f}s"
    assert report_criterion(8, "Picard solver", ok, detail), detail


def test_09_chi_two_methods(report_criterion):
    with Timer() as tm:
        a = chi_two_methods(129, 40.0)
        b = chi_two_methods(257, 40.0)
    oracle = a["oracle"].chi
    chis = [a["ascent"].chi, b["ascent"].chi]
    gap = max(a["relative_gap"], b["relative_gap"])
    drift = abs(chis[1] - chis[0]) / chis[1]
    ok = gap <= 0.01 and min(chis + [oracle]) >= 1 / math.pi and drift <= 0.005 and tm.elapsed < 300
    detail = (
        f"ascent={chis[0]:.8f},{chis[1]:.8f} oracle={oracle:.8f} gap={gap:.2e} "
        f"refinement drift={drift:.2e} time={tm.elapsed:.0f}s"
    )
    assert report_criterion(9, "chi two-method agreement", ok, detail), detail


def test_10_escape_and_box_splitting(report_criterion):
    with Timer() as tm:
        zero = DriftData.zero(BoxSpec(8.0, 33))
        z_esc = []
        for r, t in ((2.0, 0.25), (2.0, 1.0), (3.0, 0.5), (4.0, 1.0)):
            est = escape_probability(zero, r, t, 1e-3, 10_000, 7)
            z_esc.append((est.mean - box_escape_oracle(r, t)) / est.stderr)
        batch = simulate_paths(zero, (0.0, 0.0), 1.0, 1e-3, 10_000, 3, sub_boxes=(2.0, 4.0))
        ratio, se = annulus_ratio_estimate(batch, 2.0, 4.0, weighted=False)
        z_ann = (ratio - annulus_oracle(2.0, 4.0, 1.0)) / se
        logs = []
        for L_t in (2.0, 2.5, 3.0):
            drift, _, _ = noise_drift(L_t**2, 0.25, 1, C_cal=2.0**-4)
            res = box_splitting_experiment(drift, L_t, 0.5, 1, 1e-3, 10_000, 3)
            logs.append(math.log(res["U"][1]))
    ok = max(map(abs, z_esc)) < 3 and abs(z_ann) < 3 and bool(np.all(np.diff(logs) < 0)) and tm.elapsed < 600
    detail = (
        f"escape z={[round(z, 2) for z in z_esc]} annulus z={z_ann:.2f} "
        f"log U1={[round(v, 3) for v in logs]} time={tm.elapsed:.0f}s"
    )
    assert report_criterion(10, "escape and box splitting", ok, detail), detail


def test_11_noise_growth(report_criterion):
    Ls = (4.0, 8.0, 16.0, 32.0, 64.0)
    med = []
    with Timer() as tm:
        for L in Ls:
            vals = []
            for seed in range(20):
                xi = noise_potential(L, 0.5, seed)
                Z = compute_Z(xi)
                vals.append(compute_M(Z, half_grad_square(Z) - renorm_constant(L, 0.5)) / math.log(L))
            med.append(float(statistics.median(vals)))
    tail = med[1:]
    # "flat" allows a 5% rise between consecutive medians
    flat = all(b <= 1.05 * a for a, b in zip(tail, tail[1:]))
    ok = flat and max(med) <= M_OVER_LOG_L_BOUND and tm.elapsed < 600
    detail = f"medians={[round(m, 3) for m in med]} bound={M_OVER_LOG_L_BOUND} time={tm.elapsed:.0f}s"
    assert report_criterion(11, "noise-growth boundedness", ok, detail), detail


def test_12_eigenvalue_scaling_trend(report_criterion):
    Ls = (4.0, 8.0, 16.0, 32.0)
    med = []
    with Timer() as tm:
        for L in Ls:
            lam = [renormalized_eigenvalues(L, 0.25, seed).values[0] for seed in range(10)]
            med.append(float(statistics.median(lam) / math.log(L)))
    inc = np.diff(med)
    trend = bool(np.all(inc > 0) and np.all(np.diff(inc) < 0))
    corridor = all(0 < m < 3 * CHI_HAT for m in med)
    ok = trend and corridor and tm.elapsed < 1200
    detail = (
        f"medians lambda1/logL={[round(m, 3) for m in med]} increasing-then-flattening={trend} "
        f"inside (0, {3 * CHI_HAT:.3f})={corridor} time={tm.elapsed:.0f}s"
    )
    assert report_criterion(12, "eigenvalue scaling trend", ok, detail), detail
