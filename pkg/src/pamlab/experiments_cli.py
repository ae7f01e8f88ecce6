"""Command-line front end: configuration, experiment orchestration, records and reports.

Configuration is an INI file validated against ``SCHEMA``.  Every value may be
overridden by an environment variable ``PAMLAB_<SECTION>_<KEY>`` and the
``[run]`` values also by command-line flags.  Each run writes, into its output
directory, ``manifest.json`` (resolved config, code version, output hashes),
its CSV/JSON outputs, and ``timing.json`` (wall time; excluded from hashes so
that reruns are bit-identical).
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import click
import numpy as np

log = logging.getLogger("pamlab")

SCHEMA_VERSION = 1
ENV_PREFIX = "PAMLAB_"


class ConfigError(ValueError):
    """Configuration does not match the schema."""


# --------------------------------------------------------------------------
# Schema
# --------------------------------------------------------------------------


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (parser, default as text)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], str]]] = {
    "run": {
        "schema_version": (int, str(SCHEMA_VERSION)),
        "experiment": (str, ""),
        "seed": (int, "0"),
        "out": (str, "runs/default"),
        "threads": (int, "1"),
    },
    "chi": {
        "grids": (_ints, "129"),
        "side": (float, "40.0"),
        "init": (str, "gaussian"),
        "tol": (float, "1e-5"),
        "max_iter": (int, "5000"),
        "radial_points": (int, "3000"),
        "radial_extent": (float, "30.0"),
    },
    "eigenvalues": {
        "L": (_floats, "4,8"),
        "eps": (float, "0.25"),
        "seeds": (_ints, "0,1,2"),
        "n": (int, "1"),
        "route": (str, "fourier"),
        "laplacian": (str, "spectral"),
        "eps_per_dx": (float, "2.0"),
        "zero_noise": (_bool, "false"),
        "chi": (float, "nan"),
    },
    "evolve": {
        "L": (float, "4.0"),
        "eps": (float, "0.25"),
        "times": (_floats, "2,4,8,16"),
        "dt": (float, "1e-3"),
        "route": (str, "fourier"),
        "eps_per_dx": (float, "2.0"),
    },
    "fk": {
        "L": (float, "4.0"),
        "eps": (float, "0.25"),
        "t": (float, "1.0"),
        "dt": (float, "1e-3"),
        "n_paths": (int, "10000"),
        "seeds": (_ints, "0"),
        "C_cal": (float, "0.0625"),
        "eps_per_dx": (float, "2.0"),
    },
    "renorm": {
        "L": (float, "8.0"),
        "eps": (_floats, "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125,0.0009765625,0.00048828125,0.000244140625"),
    },
    "noise_growth": {
        "L": (_floats, "4,8,16"),
        "eps": (float, "0.5"),
        "seeds": (_ints, "0,1,2"),
        "gamma": (float, "0.125"),
        "eps_per_dx": (float, "2.0"),
    },
}

EXPERIMENTS = ("chi", "eigenvalues", "evolve", "fk", "renorm", "noise-growth")


@dataclass
class RunConfig:
    """Resolved configuration: ``run`` settings plus the experiment's own section."""

    experiment: str
    seed: int
    out: str
    threads: int
    params: dict[str, Any]
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "experiment": self.experiment, "seed": self.seed, "params": self.params}


def _section(experiment: str) -> str:
    return experiment.replace("-", "_")


def load_config(
    path: str | Path | None,
    experiment: str,
    overrides: dict[str, Any] | None = None,
    env: dict[str, str] | None = None,
) -> RunConfig:
    """Parse, validate and resolve a configuration for ``experiment``."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            cp.read_string(p.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
    raw: dict[str, dict[str, str]] = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            raw[sec][key] = val
    env = os.environ if env is None else env
    for name, val in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX) :].lower()
        for sec in SCHEMA:
            keys = {k.lower(): k for k in SCHEMA[sec]}
            if rest.startswith(sec + "_") and rest[len(sec) + 1 :] in keys:
                raw[sec][keys[rest[len(sec) + 1 :]]] = val
                break
        else:
            raise ConfigError(f"environment variable {name} does not name a config key")
    for key, val in (overrides or {}).items():
        if val is not None:
            raw["run"][key] = str(val)
    parsed: dict[str, dict[str, Any]] = {}
    for sec, keys in SCHEMA.items():
        parsed[sec] = {}
        for key, (fn, _) in keys.items():
            try:
                parsed[sec][key] = fn(raw[sec][key])
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from exc
    run = parsed["run"]
    if run["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {run['schema_version']} is not supported (expected {SCHEMA_VERSION})")
    if run["experiment"] and run["experiment"] != experiment:
        raise ConfigError(f"config is for {run['experiment']!r}, not {experiment!r}")
    if run["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if run["seed"] < 0 or run["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return RunConfig(experiment, run["seed"], run["out"], run["threads"], parsed[_section(experiment)], raw)


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    """CSV with a header row; floats at 17 significant digits."""
    buf = io.StringIO()
    if rows:
        keys = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])
    path.write_text(buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        conv = {}
        for k, v in r.items():
            try:
                conv[k] = int(v)
            except ValueError:
                try:
                    conv[k] = float(v)
                except ValueError:
                    conv[k] = v
        out.append(conv)
    return out


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def write_json(path: Path, obj: Any) -> None:
    """JSON with sorted keys; floats are written with their shortest round-trip repr."""
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class ExperimentRecord:
    """What a run produced: config snapshot, seed, output files with hashes, summary."""

    experiment: str
    config: dict
    seed: int
    outputs: dict[str, str]
    summary: dict
    code_version: str = field(default_factory=code_version)
    wall_time: float = 0.0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def finalize(cfg: RunConfig, out: Path, files: list[str], summary: dict, started: float) -> ExperimentRecord:
    rec = ExperimentRecord(cfg.experiment, cfg.snapshot(), cfg.seed, {f: _sha256(out / f) for f in sorted(files)}, summary)
    rec.wall_time = time.perf_counter() - started
    manifest = asdict(rec)
    manifest.pop("wall_time")
    write_json(out / "manifest.json", manifest)
    write_json(out / "timing.json", {"wall_time_s": rec.wall_time})
    return rec


def _pool_map(fn: Callable, items: list, threads: int) -> list:
    """Order-preserving map, in worker processes when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def cmd_chi(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    from .chi_variational import PeriodicGrid, RadialGrid, gaussian, ground_state_oracle, maximize_quotient, random_init

    p = cfg.params
    oracle = ground_state_oracle(RadialGrid(p["radial_extent"], p["radial_points"]))
    rows = []
    for N in p["grids"]:
        grid = PeriodicGrid(N, p["side"])
        if p["init"] == "gaussian":
            init = gaussian(grid)
        elif p["init"] == "random":
            init = random_init(grid, cfg.seed)
        else:
            raise ConfigError(f"unknown init {p['init']!r}")
        res = maximize_quotient(init, iters=p["max_iter"], tol=p["tol"])
        np.save(out / f"maximizer_N{N}.npy", res.maximizer.values)
        rows.append(
            {
                "method": res.method,
                "N": N,
                "chi": res.chi,
                "iterations": res.iterations,
                "residual": res.residual,
                "boundary_decay": res.extra["boundary_decay"],
            }
        )
    rows.append(
        {
            "method": oracle.method,
            "N": p["radial_points"],
            "chi": oracle.chi,
            "iterations": oracle.iterations,
            "residual": oracle.residual,
            "boundary_decay": float(abs(oracle.maximizer[-1]) / np.abs(oracle.maximizer).max()),
        }
    )
    gap = max(abs(r["chi"] - oracle.chi) / oracle.chi for r in rows[:-1])
    agree = gap <= 0.01
    result = {"chi": rows[-2]["chi"], "oracle_chi": oracle.chi, "relative_gap": gap, "agree": agree, "runs": rows}
    write_json(out / "chi.json", result)
    write_csv(out / "chi.csv", rows)
    files = ["chi.json", "chi.csv"] + [f"maximizer_N{N}.npy" for N in p["grids"]]
    return files, {"chi": result["chi"], "oracle_chi": oracle.chi, "relative_gap": gap}, 0 if agree else 1


def _eig_cell(args: tuple) -> list[dict]:
    from .hamiltonian import eigenvalue_scaling_experiment

    L, seed, eps, n, route, lap, epd = args
    return eigenvalue_scaling_experiment([L], [seed], eps, n, route, lap, epd)


def analytic_dirichlet_spectrum(L: float, n: int) -> list[float]:
    """Largest ``n`` eigenvalues of ``Delta/2`` on ``Q_L`` with Dirichlet conditions."""
    ks = range(1, n + 2)
    vals = sorted((-(np.pi**2) * (a * a + b * b) / (2.0 * L * L) for a in ks for b in ks), reverse=True)
    return [float(v) for v in vals[:n]]


def cmd_eigenvalues(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    from .grid_spectral import BoxSpec
    from .hamiltonian import OperatorSpec, top_eigenpairs

    p = cfg.params
    if p["zero_noise"]:
        rows = []
        for L in p["L"]:
            N = int(round(p["eps_per_dx"] * L / p["eps"])) + 1
            box = BoxSpec(L, N, "dirichlet")
            spec = top_eigenpairs(OperatorSpec(box, np.zeros((N, N)), p["laplacian"]), p["n"])
            for j, (num, ana) in enumerate(zip(spec.values, analytic_dirichlet_spectrum(L, p["n"]))):
                rows.append({"L": L, "n": j + 1, "lambda_numeric": float(num), "lambda_analytic": ana})
        write_csv(out / "spectrum_zero_noise.csv", rows)
        err = max(abs(r["lambda_numeric"] - r["lambda_analytic"]) for r in rows)
        return ["spectrum_zero_noise.csv"], {"max_abs_error": err}, 0
    cells = [(L, s, p["eps"], p["n"], p["route"], p["laplacian"], p["eps_per_dx"]) for L in p["L"] for s in p["seeds"]]
    rows = [r for chunk in _pool_map(_eig_cell, cells, cfg.threads) for r in chunk]
    write_csv(out / "eigenvalues.csv", rows)
    table = []
    for L in p["L"]:
        lam = [r["lambda_n_renormalized"] for r in rows if r["L"] == L and r["n"] == 1]
        med = statistics.median(lam)
        table.append({"L": L, "median_lambda1": med, "median_lambda1_over_logL": med / math.log(L)})
    write_csv(out / "lambda1_trend.csv", table)
    ordered = all(
        a["lambda_n_renormalized"] >= b["lambda_n_renormalized"] - 1e-10
        for a, b in zip(rows, rows[1:])
        if a["L"] == b["L"] and a["seed"] == b["seed"]
    )
    summary: dict[str, Any] = {"trend": table, "ordered": ordered}
    if math.isfinite(p["chi"]):
        summary["in_corridor"] = all(0 < t["median_lambda1_over_logL"] < 3 * p["chi"] for t in table)
    return ["eigenvalues.csv", "lambda1_trend.csv"], summary, 0


def cmd_evolve(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    from .pam_evolution import mass_vs_eigenvalue_experiment

    p = cfg.params
    res = mass_vs_eigenvalue_experiment(p["L"], p["eps"], cfg.seed, p["times"], p["dt"], p["route"], p["eps_per_dx"])
    rows = [{k: r[k] for k in ("t", "mass_log", "sup_log", "inf_log", "lambda1")} for r in res["rows"]]
    write_csv(out / "evolution.csv", rows)
    write_csv(out / "evolution_detail.csv", res["rows"])
    summary = {"lambda1": res["lambda1"], "decay_exponent": res["decay_exponent"], "c_eps": res["c_eps"]}
    return ["evolution.csv", "evolution_detail.csv"], summary, 0


def _fk_cell(args: tuple) -> dict:
    from .feynman_kac import mc_total_mass, noise_drift, pde_reference

    L, eps, seed, t, dt, n_paths, C_cal, epd = args
    drift, xi, c = noise_drift(L, eps, seed, eps_per_dx=epd, C_cal=C_cal)
    est = mc_total_mass(drift, t, dt, n_paths, seed)
    ref = pde_reference(xi, c, t)
    return {
        "L": L,
        "eps": eps,
        "seed": seed,
        "t": t,
        "dt": dt,
        "n_paths": n_paths,
        "eta": drift.eta,
        "M": drift.M,
        "estimate": est.mean,
        "estimate_log": est.log_mean,
        "stderr": est.stderr,
        "n_effective": est.n_effective,
        "pde_mass": ref,
        "z_score": (est.mean - ref) / est.stderr if est.stderr > 0 else float("inf"),
    }


def cmd_fk(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    p = cfg.params
    cells = [(p["L"], p["eps"], s, p["t"], p["dt"], p["n_paths"], p["C_cal"], p["eps_per_dx"]) for s in p["seeds"]]
    rows = _pool_map(_fk_cell, cells, cfg.threads)
    write_csv(out / "fk.csv", rows)
    return ["fk.csv"], {"max_abs_z": max(abs(r["z_score"]) for r in rows)}, 0


def cmd_renorm(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    from .noise import renorm_constant_exact

    p = cfg.params
    rows = []
    for eps in p["eps"]:
        c = renorm_constant_exact(p["L"], eps)
        rows.append({"L": p["L"], "eps": eps, "log_inv_eps": math.log(1.0 / eps), "c": c, "quarter_c": 0.25 * c})
    x = np.array([r["log_inv_eps"] for r in rows])
    y = np.array([r["quarter_c"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    r2 = 1.0 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    write_csv(out / "renorm.csv", rows)
    summary = {"slope": float(slope), "intercept": float(intercept), "r2": float(r2), "slope_times_pi": float(slope * np.pi)}
    return ["renorm.csv"], summary, 0


@dataclass
class NoiseGrowthRecord:
    L: float
    eps: float
    seed: int
    xi_norm: float
    Xi_norm: float
    M: float
    xi_ratio: float
    Xi_ratio: float
    M_ratio: float


def noise_growth_cell(args: tuple) -> NoiseGrowthRecord:
    from .feynman_kac import compute_M, compute_Z
    from .grid_spectral import besov_norm
    from .hamiltonian import noise_potential, renorm_constant
    from .noise import enhance
    from .paracontrolled import half_grad_square

    L, eps, seed, gamma, epd = args
    xi = noise_potential(L, eps, seed, "fourier", epd)
    c = renorm_constant(L, eps)
    Xi = enhance(xi, c).Xi
    Z = compute_Z(xi)
    M = compute_M(Z, half_grad_square(Z) - c)
    a = besov_norm(xi, -1.0 - gamma)
    b = besov_norm(Xi, -gamma)
    lg = math.log(L)
    return NoiseGrowthRecord(L, eps, seed, a, b, M, a * a / lg, b / lg, M / lg)


def cmd_noise_growth(cfg: RunConfig, out: Path) -> tuple[list[str], dict, int]:
    p = cfg.params
    cells = [(L, p["eps"], s, p["gamma"], p["eps_per_dx"]) for L in p["L"] for s in p["seeds"]]
    recs = _pool_map(noise_growth_cell, cells, cfg.threads)
    rows = [asdict(r) for r in recs]
    write_csv(out / "noise_growth.csv", rows)
    table = []
    for L in p["L"]:
        sel = [r for r in rows if r["L"] == L]
        table.append(
            {
                "L": L,
                "median_M_over_logL": statistics.median(r["M_ratio"] for r in sel),
                "median_A_over_logL": statistics.median(r["xi_ratio"] + r["Xi_ratio"] for r in sel),
            }
        )
    write_csv(out / "noise_growth_medians.csv", table)
    return ["noise_growth.csv", "noise_growth_medians.csv"], {"medians": table}, 0


COMMANDS: dict[str, Callable[[RunConfig, Path], tuple[list[str], dict, int]]] = {
    "chi": cmd_chi,
    "eigenvalues": cmd_eigenvalues,
    "evolve": cmd_evolve,
    "fk": cmd_fk,
    "renorm": cmd_renorm,
    "noise-growth": cmd_noise_growth,
}


def run_experiment(cfg: RunConfig) -> tuple[ExperimentRecord, int]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    files, summary, code = COMMANDS[cfg.experiment](cfg, out)
    return finalize(cfg, out, files, summary, started), code


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------


def _quartiles(xs: list[float]) -> dict:
    q = np.percentile(xs, [25, 50, 75]) if xs else [float("nan")] * 3
    return {"q1": float(q[0]), "median": float(q[1]), "q3": float(q[2]), "count": len(xs)}


def cmd_report(run_dir: str | Path) -> dict:
    """Aggregate every run under ``run_dir`` (recursively, in sorted order)."""
    root = Path(run_dir)
    problems: list[str] = []
    manifests = sorted(root.rglob("manifest.json")) if root.exists() else []
    eig: dict[float, list[float]] = {}
    mass_rows: list[dict] = []
    chi_rows: list[dict] = []
    for m in manifests:
        d = m.parent
        try:
            man = json.loads(m.read_text())
            for name, digest in man["outputs"].items():
                f = d / name
                if not f.exists():
                    raise ValueError(f"missing output {name}")
                if _sha256(f) != digest:
                    raise ValueError(f"hash mismatch for {name}")
            exp = man["experiment"]
            if exp == "eigenvalues" and "eigenvalues.csv" in man["outputs"]:
                for r in read_csv(d / "eigenvalues.csv"):
                    if r["n"] == 1:
                        eig.setdefault(float(r["L"]), []).append(float(r["lambda_n_renormalized"]))
            elif exp == "evolve":
                for r in read_csv(d / "evolution.csv"):
                    mass_rows.append({"run": str(d.relative_to(root)), "t": r["t"], "log_mass_over_t": r["mass_log"] / r["t"], "lambda1": r["lambda1"]})
            elif exp == "chi":
                res = json.loads((d / "chi.json").read_text())
                chi_rows.append({"run": str(d.relative_to(root)), "chi_ascent": res["chi"], "chi_oracle": res["oracle_chi"], "relative_gap": res["relative_gap"]})
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            problems.append(f"{d}: {exc}")
    if not manifests:
        log.warning("no records found under %s", root)
    eig_table = [{"L": L, "lambda1_over_logL": _quartiles([x / math.log(L) for x in eig[L]])} for L in sorted(eig)]
    report = {
        "runs": len(manifests),
        "problems": problems,
        "lambda1_vs_L": eig_table,
        "mass_vs_lambda1": mass_rows,
        "chi_two_method": chi_rows,
    }
    if root.exists():
        write_json(root / "report.json", report)
        write_csv(
            root / "report_lambda1_vs_L.csv",
            [{"L": r["L"], **{k: v for k, v in r["lambda1_over_logL"].items()}} for r in eig_table],
        )
        write_csv(root / "report_mass_vs_lambda1.csv", mass_rows)
        write_csv(root / "report_chi.csv", chi_rows)
    return report


# --------------------------------------------------------------------------
# Click wiring
# --------------------------------------------------------------------------


def _common(fn: Callable) -> Callable:
    fn = click.option("--dry-run", is_flag=True, help="Print the resolved config and exit.")(fn)
    fn = click.option("--threads", type=int, default=None, help="Worker processes.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(fn)
    fn = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Base seed (u64).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="INI config.")(fn)
    return fn


def _run(experiment: str, config_path, seed, out, threads, dry_run) -> None:
    try:
        cfg = load_config(config_path, experiment, {"seed": seed, "out": out, "threads": threads})
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    if dry_run:
        click.echo(json.dumps(_jsonable({"out": cfg.out, "threads": cfg.threads, **cfg.snapshot()}), sort_keys=True, indent=2))
        return
    rec, code = run_experiment(cfg)
    click.echo(json.dumps(_jsonable(rec.summary), sort_keys=True, indent=2))
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose: int) -> None:
    """Numerical experiments for the parabolic Anderson model in two dimensions."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


def _register(name: str, help_text: str) -> None:
    @main.command(name=name, help=help_text)
    @_common
    def _cmd(config_path, seed, out, threads, dry_run) -> None:
        _run(name, config_path, seed, out, threads, dry_run)


_register("chi", "Compute chi by gradient ascent and by the radial ground-state oracle.")
_register("eigenvalues", "Top eigenvalues of the renormalized Anderson Hamiltonian over boxes and seeds.")
_register("evolve", "Time-step the PAM and compare its mass with the principal eigenvalue.")
_register("fk", "Feynman-Kac Monte Carlo mass against the PDE mass.")
_register("renorm", "Exact renormalization constants and their logarithmic slope.")
_register("noise-growth", "Noise norms and M over box sizes, relative to log L.")


@main.command(name="report", help="Aggregate records under RUN_DIR into summary tables.")
@click.argument("run_dir", type=click.Path(file_okay=False))
def _report(run_dir: str) -> None:
    rep = cmd_report(run_dir)
    if not rep["runs"]:
        click.echo(f"warning: no records under {run_dir}", err=True)
    for p in rep["problems"]:
        click.echo(f"warning: {p}", err=True)
    click.echo(json.dumps(_jsonable({k: rep[k] for k in ("runs", "lambda1_vs_L", "chi_two_method")}), sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
