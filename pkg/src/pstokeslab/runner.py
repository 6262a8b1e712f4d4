"""Monte Carlo orchestration and CSV persistence.

Paths are embarrassingly parallel: each worker owns its stepper and its
output files (single writer per file), and every path's randomness is a
function of (master_seed, path_index) alone, so outputs are independent
of worker count and scheduling.  The manifest is written up front in
pending state and atomically finalised with content digests.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig, RunManifest
from .grid import Grid, VectorField, curl_values
from .noise import NoiseSpec, PathRng
from .potential import PotentialParams
from .seminorms import OrliczSpec, SampledPath, besov_seminorm
from .stepping import SolverConfig, Stepper

__all__ = [
    "run_experiment",
    "initial_velocity",
    "series_path",
    "diffs_path",
    "SERIES_HEADER",
    "wiener_dichotomy_study",
]

SERIES_HEADER = "k,t,J,res_l2,u_l2,Vdiff_placeholder,pi_det_lpprime,K_sto_w12"
DIFFS_HEADER = "quantity,lag_steps,k,value"

_WORKER_CACHE: dict = {}


def initial_velocity(grid: Grid, kind: str, scale: float) -> VectorField:
    """Divergence-free masked initial condition."""
    if kind == "zero":
        return grid.vector()
    n = grid.n
    stream = np.zeros((n, n))
    xi = (np.arange(2, n - 2) - 1.5) / (n - 4)
    XX, YY = np.meshgrid(xi, xi, indexing="ij")
    stream[2:-2, 2:-2] = np.sin(np.pi * XX) * np.sin(np.pi * YY)
    vals = curl_values(grid.diff_1d, stream)
    norm = np.sqrt(grid.cell_area * np.sum(vals**2))
    return VectorField(grid, vals * (scale / norm))


def _build_stepper(cfg: ExperimentConfig) -> Stepper:
    key = (
        cfg.grid_n, cfg.p, cfg.kappa, cfg.dt, cfg.T, cfg.noise_modes,
        cfg.noise_decay, cfg.noise_rho, cfg.noise_flavor, cfg.newton_tol,
        cfg.newton_max_iter, cfg.kappa_reg, cfg.cg_tol, cfg.store_every,
    )
    cached = _WORKER_CACHE.get("stepper")
    if cached is not None and cached[0] == key:
        return cached[1]
    grid = Grid(cfg.grid_n)
    spec = NoiseSpec(
        grid, cfg.noise_modes, decay=cfg.noise_decay,
        rho=cfg.noise_rho, flavor=cfg.noise_flavor,
    ) if cfg.noise_modes > 0 else None
    solver = SolverConfig(
        dt=cfg.dt, T=cfg.T, newton_tol=cfg.newton_tol,
        newton_max_iter=cfg.newton_max_iter, kappa_reg=cfg.kappa_reg,
        store_every=cfg.store_every, cg_tol=cfg.cg_tol,
    )
    stepper = Stepper(grid, PotentialParams(cfg.p, cfg.kappa), solver, spec=spec)
    _WORKER_CACHE["stepper"] = (key, stepper)
    return stepper


def series_path(run_dir: str, index: int) -> str:
    return os.path.join(run_dir, f"path_{index:04d}_series.csv")


def diffs_path(run_dir: str, index: int) -> str:
    return os.path.join(run_dir, f"path_{index:04d}_diffs.csv")


def snapshot_path(run_dir: str, index: int, k: int) -> str:
    return os.path.join(run_dir, f"path_{index:04d}_u_k{k:06d}.csv")


def _write_trajectory(run_dir: str, index: int, traj, grid: Grid):
    with open(series_path(run_dir, index), "w") as fh:
        fh.write(SERIES_HEADER + "\n")
        for k in range(traj.times.size):
            fh.write(
                f"{k},{traj.times[k]:.10e},{traj.energy[k]:.10e},"
                f"{traj.residual_l2[k]:.10e},{traj.velocity_l2[k]:.10e},"
                f"{traj.v_increment[k]:.10e},{traj.pressure_det_lp[k]:.10e},"
                f"{traj.k_sto_w12[k]:.10e}\n"
            )
    with open(diffs_path(run_dir, index), "w") as fh:
        fh.write(DIFFS_HEADER + "\n")
        for quantity in ("u", "V", "K"):
            for lag in traj.diff_lags:
                series = traj.diffs[quantity][lag]
                for k in range(series.size):
                    fh.write(f"{quantity},{lag},{k},{series[k]:.10e}\n")
    from .grid import save_field

    for k, values in traj.snapshots:
        save_field(VectorField(grid, values), snapshot_path(run_dir, index, k))


def _path_worker(args):
    cfg_dict, index, run_dir = args
    cfg = ExperimentConfig(**cfg_dict)
    stepper = _build_stepper(cfg)
    u0 = initial_velocity(stepper.grid, cfg.u0_kind, cfg.u0_scale)
    rng = PathRng(cfg.master_seed, index)
    started = time.time()
    traj = stepper.run_path(u0, rng)
    _write_trajectory(run_dir, index, traj, stepper.grid)
    dt = cfg.dt
    summary = {
        "sup_energy": float(traj.energy.max(initial=0.0)),
        "initial_energy": float(traj.energy[0]) if traj.energy.size else 0.0,
        "dissipation_integral": float(dt * np.sum(traj.residual_l2**2)),
        "sup_velocity_l2": float(traj.velocity_l2.max(initial=0.0)),
        "sup_stress_lpprime": traj.sup_stress_lpprime,
        "sup_pressure_det_lpprime": float(traj.pressure_det_lp.max(initial=0.0)),
        "sup_k_sto_w12": float(traj.k_sto_w12.max(initial=0.0)),
        "steps_completed": int(traj.times.size - 1),
        "seconds": time.time() - started,
    }
    status = "ok" if traj.completed else f"failed: {traj.error}"
    return index, status, summary


def run_experiment(cfg: ExperimentConfig, run_dir: str | None = None) -> RunManifest:
    """Execute all paths of an experiment; returns the final manifest."""
    cfg.validate()
    run_dir = run_dir or cfg.resolved_out_dir()
    os.makedirs(run_dir, exist_ok=True)
    started = time.time()
    manifest = RunManifest(
        config={k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
        created_unix=started,
        path_seeds=[[cfg.master_seed, i] for i in range(cfg.paths)],
        status="pending",
    )
    manifest.write(run_dir)

    with open(os.path.join(run_dir, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())

    if cfg.kind == "wiener_dichotomy":
        table = wiener_dichotomy_study(
            paths=cfg.paths,
            master_seed=cfg.master_seed,
            coarsest_exp=cfg.wiener_coarsest_exp,
            finest_exp=cfg.wiener_finest_exp,
        )
        _write_wiener_table(run_dir, table)
        manifest.path_status = {str(i): "ok" for i in range(cfg.paths)}
        manifest.finish(run_dir, started, "ok")
        return manifest

    if cfg.kind == "selftest":
        from .selftest import format_table, run_battery

        checks = run_battery()
        with open(os.path.join(run_dir, "selftest.txt"), "w") as fh:
            fh.write(format_table(checks) + "\n")
        ok = all(c.passed for c in checks)
        manifest.finish(run_dir, started, "ok" if ok else "selftest failures")
        return manifest

    cfg_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    jobs = [(cfg_dict, i, run_dir) for i in range(cfg.paths)]
    failures = 0
    if cfg.paths:
        workers = cfg.workers or min(os.cpu_count() or 1, cfg.paths)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_path_worker, jobs))
        else:
            results = [ _path_worker(job) for job in jobs ]
        for index, status, summary in results:
            manifest.path_status[str(index)] = status
            manifest.path_summary[str(index)] = summary
            if status != "ok":
                failures += 1
    manifest.finish(run_dir, started, "ok" if failures == 0 else f"{failures} paths failed")
    return manifest


# ---------------------------------------------------------------------
# scalar Wiener dichotomy study
# ---------------------------------------------------------------------

WIENER_TABLE = "wiener_dichotomy.csv"
WIENER_HEADER = "path,dt,phi2_sup,b22_quantity"


def wiener_dichotomy_study(
    paths: int = 64,
    master_seed: int = 0,
    coarsest_exp: int = 10,
    finest_exp: int = 16,
    T: float = 1.0,
):
    """Per-path Nikolskii summaries of scalar Brownian paths under refinement.

    One Brownian path is simulated at the finest resolution and analysed
    at every coarser dyadic subsampling, so refinement ratios compare the
    same underlying trajectory.  Reported per (path, dt): the
    exponential-scale sup-report (stable under refinement) and the
    squared 2,2-seminorm quadrature (divergent under refinement).
    """
    exps = list(range(coarsest_exp, finest_exp + 1, 2))
    n_fine = 2**finest_exp
    rows = []
    for index in range(paths):
        rng = PathRng(master_seed, index)
        incr = rng.standard_normal(n_fine) * np.sqrt(T / n_fine)
        w_fine = np.concatenate([[0.0], np.cumsum(incr)])
        for e in exps:
            stride = 2 ** (finest_exp - e)
            w = w_fine[::stride]
            path = SampledPath(w, T / 2**e)
            phi2 = besov_seminorm(path, 0.5, OrliczSpec.phi2())
            b22 = besov_seminorm(path, 0.5, OrliczSpec.power(2), fine_index=2.0)
            rows.append((index, T / 2**e, phi2.sup_approx, b22.quantity_r))
    return rows


def _write_wiener_table(run_dir: str, rows):
    with open(os.path.join(run_dir, WIENER_TABLE), "w") as fh:
        fh.write(WIENER_HEADER + "\n")
        for index, dt, sup, quan in rows:
            fh.write(f"{index},{dt:.10e},{sup:.10e},{quan:.10e}\n")


def wiener_refinement_ratios(rows, paths: int):
    """Median per-path ratios between consecutive 4x refinements."""
    by_path: dict = {}
    for index, dt, sup, quan in rows:
        by_path.setdefault(index, []).append((dt, sup, quan))
    per_level_sup: dict = {}
    per_level_quan: dict = {}
    for entries in by_path.values():
        entries.sort(reverse=True)  # coarse -> fine
        for level, ((_, s0, q0), (_, s1, q1)) in enumerate(zip(entries, entries[1:])):
            per_level_sup.setdefault(level, []).append(s1 / s0)
            per_level_quan.setdefault(level, []).append(q1 / q0)
    med_sup = [float(np.median(per_level_sup[k])) for k in sorted(per_level_sup)]
    med_quan = [float(np.median(per_level_quan[k])) for k in sorted(per_level_quan)]
    return med_sup, med_quan
