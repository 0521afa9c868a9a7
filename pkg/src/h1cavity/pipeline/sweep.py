"""Sweep execution: one ring-down pair and its analysis per (d, h) point."""

from __future__ import annotations

import csv
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from h1cavity import cascade, farfield
from h1cavity.constants import C0
from h1cavity.errors import ConfigurationError
from h1cavity.fdtd.io import write_series
from h1cavity.fdtd.ringdown import run_ringdown
from h1cavity.mode_analysis import ModeCharacterization, beta_factors, purcell_max
from h1cavity.pipeline.cache import ResultCache
from h1cavity.pipeline.images import write_grid_csv, write_pgm

log = logging.getLogger(__name__)


def na_tag(na) -> str:
    return f"NA{na:.2f}"


def point_tag(d, h) -> str:
    return f"d{d:.3f}_h{h * 1e9:.0f}nm"


def row_columns(na_values) -> list:
    cols = ["d", "h_m", "resolution"]
    for p in ("X", "Y"):
        cols += [f"lambda_{p}_m", f"gamma_{p}_per_s", f"Q_{p}", f"V_{p}", f"Fp_{p}"]
    cols += ["Fp", "split_rel"]
    for na in na_values:
        t = na_tag(na)
        cols += [f"eta_X_{t}", f"eta_Y_{t}", f"eta_{t}", f"K_{t}"]
    cols += ["up_fraction_X", "up_fraction_Y", "flux_ratio_X", "flux_ratio_Y"]
    return cols


@dataclass
class PointResult:
    row: dict
    modes: dict
    maps: dict
    ringdowns: dict


@dataclass
class SweepTables:
    columns: list
    rows: list
    failures: list = field(default_factory=list)


def reference_power(rd) -> float:
    """Total emitted power 2 gamma U in solver units (energy per a/c)."""
    return 2.0 * rd.gamma * (rd.design.lattice_constant / C0) * rd.energy_t0


def analyse_point(design, resolution, na_values, cache: ResultCache, runner=run_ringdown,
                  run_params=None, convention="intensity", strict=False) -> PointResult:
    """Ring-down both dipole modes of ``design`` and derive every figure of merit."""
    a = design.lattice_constant
    rds, modes, maps = {}, {}, {}
    for pol in ("X", "Y"):
        rd = cache.get_or_run(design, resolution, pol, runner, run_params)
        fp = purcell_max(rd.quality_factor, rd.mode_volume)
        modes[pol] = ModeCharacterization(pol, rd.wavelength, rd.gamma, rd.quality_factor, rd.mode_volume, fp)
        maps[pol] = farfield.near_to_far(rd.plane, rd.wavelength, length_unit=a, polarization=pol, strict=strict)
        rds[pol] = rd
    row = {"d": design.inner_hole_shift, "h_m": design.membrane_thickness, "resolution": resolution}
    for pol in ("X", "Y"):
        row.update(modes[pol].as_row())
    row["Fp"] = 0.5 * (modes["X"].purcell_max + modes["Y"].purcell_max)
    lx, ly = modes["X"].resonant_wavelength, modes["Y"].resonant_wavelength
    row["split_rel"] = abs(lx - ly) / (0.5 * (lx + ly))
    pref = {pol: reference_power(rds[pol]) for pol in ("X", "Y")}
    for na in na_values:
        ap = farfield.Aperture(na)
        t = na_tag(na)
        for pol in ("X", "Y"):
            row[f"eta_{pol}_{t}"] = farfield.collection_efficiency(maps[pol], ap, pref[pol])
        row[f"eta_{t}"] = 0.5 * (row[f"eta_X_{t}"] + row[f"eta_Y_{t}"])
        row[f"K_{t}"] = farfield.overlap_K(maps["X"], maps["Y"], ap, convention=convention)
    for pol in ("X", "Y"):
        row[f"up_fraction_{pol}"] = farfield.upward_power(maps[pol]) / pref[pol]
        row[f"flux_ratio_{pol}"] = rds[pol].flux_power / rds[pol].emitted_power
    return PointResult(row=row, modes=modes, maps=maps, ringdowns=rds)


def write_point_artifacts(point: PointResult, out_dir, offsets, presets):
    """Patterns, series, mismatch and r-contour tables of one point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pol in ("X", "Y"):
        m = point.maps[pol]
        pattern = farfield.radiation_pattern(m)
        write_grid_csv(out / f"pattern_{pol}.csv", m.u, m.v, pattern, ("u", "v", "intensity"))
        write_pgm(out / f"pattern_{pol}.pgm", pattern)
        rd = point.ringdowns[pol]
        write_series(out / f"probe_{pol}.csv", rd.probe_time, rd.probe_value)
        write_series(out / f"energy_{pol}.csv", rd.energy_time, rd.energy_value)
    rx, ry = point.ringdowns["X"], point.ringdowns["Y"]
    beta_fn = lambda off: beta_factors(rx.midplane, ry.midplane, off)
    with open(out / "beta.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["offset_m", "beta_X", "beta_Y"])
        for off in offsets:
            w.writerow([repr(off), *(repr(b) for b in beta_fn(off))])
    summary = {}
    for preset in presets:
        fp = preset.get("fp_max") or point.row["Fp"]
        rows, threshold = cascade.bell_vs_mismatch(beta_fn, offsets, preset["t1_bulk"], preset["splitting_ev"], fp)
        with open(out / f"mismatch_{preset['name']}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset_m", "beta_X", "beta_Y", "delta_F", "g", "S", "S_max"])
            for r in rows:
                w.writerow([repr(r.offset), repr(r.beta_x), repr(r.beta_y), repr(r.delta_F), repr(r.g),
                            repr(r.S), repr(r.S_max)])
        summary[preset["name"]] = {
            "r": cascade.figure_of_merit(preset["t1_bulk"], preset["splitting_ev"], fp),
            "fp_max": fp,
            "S_centered": rows[0].S,
            "threshold_offset_m": threshold,
        }
    with open(out / "rcontours.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["offset_m", *(f"r_S{s:.1f}" for s in cascade.S_LEVELS)])
        for row in cascade.r_contours(beta_fn, offsets):
            w.writerow([repr(v) for v in row])
    (out / "cascade_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return summary


def _point_job(args):
    d, h, design, plan, cache_root, out_dir, runner = args
    cache = ResultCache(cache_root)
    params = {"free_cycles": plan.free_cycles}
    try:
        point = analyse_point(design, plan.resolution, plan.na_values, cache, runner, params,
                              plan.convention, plan.strict)
        if out_dir is not None:
            write_point_artifacts(point, Path(out_dir) / "points" / point_tag(d, h), plan.offsets, plan.cascade)
        return point.row, None
    except Exception as exc:  # one bad point must not void the sweep
        kind = "validation" if isinstance(exc, ConfigurationError) else "numerical"
        log.error("sweep point d=%.3f h=%.3g failed: %s", d, h, exc)
        return None, {"d": d, "h_m": h, "kind": kind, "error": type(exc).__name__, "message": str(exc),
                      "traceback": traceback.format_exc(limit=3)}


def run_sweep(plan, cache: ResultCache | None = None, out_dir=None, runner=run_ringdown) -> SweepTables:
    """Evaluate every (d, h) point of ``plan``; failures are collected, not raised.

    Points are independent; with ``plan.workers > 1`` they run in separate
    processes.  Rows come back in the canonical (h, d) order whatever the
    completion order.  With ``out_dir`` the tables and per-point artifacts
    are written there.
    """
    cache = cache or ResultCache()
    jobs = [(d, h, design, plan, cache.root, out_dir, runner) for d, h, design in plan.designs()]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_point_job, jobs))
    else:
        results = [_point_job(job) for job in jobs]
    rows = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    tables = SweepTables(columns=row_columns(plan.na_values), rows=rows, failures=failures)
    if out_dir is not None:
        write_tables(tables, out_dir)
    return tables


def write_tables(tables: SweepTables, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "points.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=tables.columns)
        w.writeheader()
        for row in tables.rows:
            w.writerow({k: (repr(float(row[k])) if isinstance(row[k], (float, np.floating)) else row[k])
                        for k in tables.columns})
    (out / "failures.json").write_text(json.dumps(tables.failures, indent=1, sort_keys=True))


def read_points(path) -> list:
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            rows.append({k: (int(v) if k == "resolution" else float(v) if v not in ("", None) else math.nan)
                         for k, v in raw.items()})
    return rows
