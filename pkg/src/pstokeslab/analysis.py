"""Offline seminorm analysis and aggregation over a finished run.

Reads the per-path difference-norm series written by the runner, applies
the Orlicz-in-time machinery per lag, and aggregates medians/quartiles
across paths.  Report CSVs carry the columns "h,norm,alpha,kind,sup_term";
fit summaries carry "alpha,slope,half_width,h_min,h_max".
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import RunManifest
from .runner import diffs_path, series_path
from .seminorms import (
    FitResult,
    OrliczSpec,
    SampledPath,
    SeminormReport,
    fit_exponent,
    luxemburg_norm,
)

__all__ = [
    "load_series",
    "load_diffs",
    "path_indices",
    "parse_orlicz",
    "report_for_quantity",
    "norms_command",
    "fit_command",
    "report_command",
    "AggregateRow",
]

QUANTITIES = ("u", "V", "K")


def path_indices(run_dir: str):
    out = []
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("path_") and name.endswith("_series.csv"):
            out.append(int(name.split("_")[1]))
    return out


def load_series(run_dir: str, index: int) -> dict:
    data = np.genfromtxt(series_path(run_dir, index), delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def load_diffs(run_dir: str, index: int) -> dict:
    """quantity -> {lag: difference-norm series}."""
    path = diffs_path(run_dir, index)
    out: dict = {q: {} for q in QUANTITIES}
    with open(path) as fh:
        fh.readline()  # header
        rows: dict = {}
        for line in fh:
            q, lag, _k, value = line.rstrip("\n").split(",")
            rows.setdefault((q, int(lag)), []).append(float(value))
    for (q, lag), values in rows.items():
        out[q][lag] = np.asarray(values)
    return out


def parse_orlicz(token: str) -> OrliczSpec:
    token = token.strip().lower()
    if token == "phi2":
        return OrliczSpec.phi2()
    if token.startswith("nq:"):
        return OrliczSpec.nq(float(token[3:]))
    return OrliczSpec.power(float(token))


def report_for_quantity(
    diffs: dict, dt: float, n_steps: int, alpha: float, spec: OrliczSpec
) -> SeminormReport:
    """Seminorm report from stored difference series (lags in the fit window)."""
    lags = sorted(m for m in diffs if 4 <= m <= max(n_steps // 8, 1))
    if not lags:
        lags = sorted(diffs)
    norms = []
    for m in lags:
        series = diffs[m]
        if series.size < 4:
            norms.append(0.0)
            continue
        norms.append(luxemburg_norm(SampledPath(series, dt), spec))
    return SeminormReport(
        alpha=alpha,
        spec_label=spec.label,
        h_values=np.array(lags, dtype=float) * dt,
        norms=np.array(norms),
        dt=dt,
        duration=n_steps * dt,
    )


@dataclass
class AggregateRow:
    quantity: str
    alpha: float
    kind: str
    median_sup: float
    q1_sup: float
    q3_sup: float
    median_slope: float
    q1_slope: float
    q3_slope: float
    n_paths: int


def norms_command(run_dir: str, alphas, specs) -> list:
    """Per-path seminorm reports plus across-path aggregation.

    Writes norms_<quantity>_path<idx>.csv per path and aggregate_norms.csv;
    returns the aggregate rows.
    """
    manifest = RunManifest.read(run_dir)
    dt = float(manifest.config["dt"])
    n_steps = int(round(float(manifest.config["T"]) / dt))
    indices = path_indices(run_dir)
    if not indices:
        raise FileNotFoundError(f"no trajectory files in {run_dir}")
    sups: dict = {}
    slopes: dict = {}
    for index in indices:
        diffs = load_diffs(run_dir, index)
        for quantity in QUANTITIES:
            if not diffs[quantity]:
                continue
            rows = []
            for spec in specs:
                for alpha in alphas:
                    rep = report_for_quantity(
                        diffs[quantity], dt, n_steps, alpha, spec
                    )
                    fit = fit_exponent(rep)
                    key = (quantity, alpha, spec.label)
                    sups.setdefault(key, []).append(rep.sup_approx)
                    slopes.setdefault(key, []).append(fit.slope)
                    for h, nv, st in zip(rep.h_values, rep.norms, rep.sup_terms):
                        rows.append(
                            f"{h:.10e},{nv:.10e},{alpha:g},{spec.label},{st:.10e}"
                        )
            out = os.path.join(run_dir, f"norms_{quantity}_path{index:04d}.csv")
            with open(out, "w") as fh:
                fh.write("h,norm,alpha,kind,sup_term\n")
                fh.write("\n".join(rows) + "\n")

    agg_rows = []
    for (quantity, alpha, kind), sup_list in sorted(sups.items()):
        sl = np.asarray(slopes[(quantity, alpha, kind)], dtype=float)
        sl = sl[np.isfinite(sl)]
        sup_arr = np.asarray(sup_list)
        agg_rows.append(
            AggregateRow(
                quantity=quantity,
                alpha=alpha,
                kind=kind,
                median_sup=float(np.median(sup_arr)),
                q1_sup=float(np.percentile(sup_arr, 25)),
                q3_sup=float(np.percentile(sup_arr, 75)),
                median_slope=float(np.median(sl)) if sl.size else float("nan"),
                q1_slope=float(np.percentile(sl, 25)) if sl.size else float("nan"),
                q3_slope=float(np.percentile(sl, 75)) if sl.size else float("nan"),
                n_paths=len(sup_list),
            )
        )
    with open(os.path.join(run_dir, "aggregate_norms.csv"), "w") as fh:
        fh.write(
            "quantity,alpha,kind,median_sup,q1_sup,q3_sup,"
            "median_slope,q1_slope,q3_slope,n_paths\n"
        )
        for r in agg_rows:
            fh.write(
                f"{r.quantity},{r.alpha:g},{r.kind},{r.median_sup:.10e},"
                f"{r.q1_sup:.10e},{r.q3_sup:.10e},{r.median_slope:.10e},"
                f"{r.q1_slope:.10e},{r.q3_slope:.10e},{r.n_paths}\n"
            )
    return agg_rows


def fit_command(run_dir: str, alphas=(0.5,), specs=(OrliczSpec.power(2),)) -> dict:
    """Median fitted exponents per quantity/kind; writes the fit summary CSV.

    The pinned summary columns are alpha,slope,half_width,h_min,h_max with
    the across-path median per alpha; per-path details go to
    fits_detail.csv.
    """
    manifest = RunManifest.read(run_dir)
    dt = float(manifest.config["dt"])
    n_steps = int(round(float(manifest.config["T"]) / dt))
    indices = path_indices(run_dir)
    if not indices:
        raise FileNotFoundError(f"no trajectory files in {run_dir}")
    detail_rows = []
    per_key: dict = {}
    for index in indices:
        diffs = load_diffs(run_dir, index)
        for quantity in QUANTITIES:
            if not diffs[quantity]:
                continue
            for spec in specs:
                for alpha in alphas:
                    rep = report_for_quantity(diffs[quantity], dt, n_steps, alpha, spec)
                    fit = fit_exponent(rep)
                    detail_rows.append((quantity, spec.label, index, alpha, fit))
                    per_key.setdefault((quantity, spec.label, alpha), []).append(fit)
    summaries = {}
    for (quantity, kind, alpha), fits in sorted(per_key.items()):
        good = [f for f in fits if not f.degenerate]
        if good:
            med = FitResult(
                slope=float(np.median([f.slope for f in good])),
                half_width=float(np.median([f.half_width for f in good])),
                h_min=float(np.median([f.h_min for f in good])),
                h_max=float(np.median([f.h_max for f in good])),
                n_points=good[0].n_points,
            )
        else:
            med = FitResult(float("nan"), float("nan"), float("nan"), float("nan"), 0, True)
        summaries[(quantity, kind, alpha)] = med
        name = f"fits_{quantity}_{kind.replace('(', '').replace(')', '').replace(':', '')}.csv"
        with open(os.path.join(run_dir, name), "w") as fh:
            fh.write("alpha,slope,half_width,h_min,h_max\n")
            fh.write(
                f"{alpha:g},{med.slope:.10e},{med.half_width:.10e},"
                f"{med.h_min:.10e},{med.h_max:.10e}\n"
            )
    with open(os.path.join(run_dir, "fits_detail.csv"), "w") as fh:
        fh.write("quantity,kind,path,alpha,slope,half_width,h_min,h_max\n")
        for quantity, kind, index, alpha, fit in detail_rows:
            fh.write(
                f"{quantity},{kind},{index},{alpha:g},{fit.slope:.10e},"
                f"{fit.half_width:.10e},{fit.h_min:.10e},{fit.h_max:.10e}\n"
            )
    return summaries


def report_command(run_dir: str) -> str:
    """Human-readable digest of a finished run."""
    manifest = RunManifest.read(run_dir)
    lines = [f"run directory: {run_dir}"]
    lines.append(f"status: {manifest.status}")
    lines.append(f"kind: {manifest.config.get('kind')}")
    lines.append(
        "grid {grid_n}  p={p}  kappa={kappa}  dt={dt}  T={T}  paths={paths}".format(
            **{k: manifest.config.get(k) for k in ("grid_n", "p", "kappa", "dt", "T", "paths")}
        )
    )
    lines.append(f"wall clock: {manifest.wall_clock_seconds:.1f} s")
    if manifest.path_summary:
        sup = [s["sup_energy"] for s in manifest.path_summary.values()]
        dis = [s["dissipation_integral"] for s in manifest.path_summary.values()]
        j0 = [s["initial_energy"] for s in manifest.path_summary.values()]
        lines.append(
            f"energy monitor: max sup_J = {max(sup):.6g}, "
            f"max dissipation integral = {max(dis):.6g}, "
            f"bound 1e3*(J0+1) = {1e3 * (max(j0) + 1.0):.6g}"
        )
    agg = os.path.join(run_dir, "aggregate_norms.csv")
    if os.path.exists(agg):
        lines.append("aggregate seminorms:")
        with open(agg) as fh:
            lines.extend("  " + ln.rstrip("\n") for ln in fh)
    failures = {
        idx: st for idx, st in manifest.path_status.items() if st != "ok"
    }
    if failures:
        lines.append(f"failed paths: {failures}")
    return "\n".join(lines)
