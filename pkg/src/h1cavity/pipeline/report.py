"""Figure-data bundle from the tables of a completed sweep.

Layout of the bundle directory::

    patterns/<point>_<X|Y>.{csv,pgm}   normalized radiation patterns
    maps/<quantity>.{csv,pgm}          quantity over the (d, h) grid
    cuts/cut_h<h>nm.csv                quantities along d at the thickness closest to 0.26 um
    mismatch/<point>/...               beta, Bell-vs-offset and r-contour tables
    summary.json                       headline numbers of the cuts
    gaps.json                          grid points or artifacts that are missing

Missing grid points appear as ``MISSING`` cells in the CSV maps and as black
pixels in the images.
"""

from __future__ import annotations

import csv
import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from h1cavity.errors import ConfigurationError
from h1cavity.pipeline.images import write_pgm
from h1cavity.pipeline.sweep import point_tag, read_points

REFERENCE_H = 0.26e-6
REFERENCE_D = 0.16


@dataclass
class Bundle:
    root: Path
    files: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _quantities(columns):
    return [c for c in columns if c == "Fp" or (c.startswith(("eta_NA", "K_NA")))]


def _grid(rows):
    ds = sorted({r["d"] for r in rows})
    hs = sorted({r["h_m"] for r in rows})
    return ds, hs


def _nearest(values, target):
    return min(values, key=lambda v: abs(v - target))


def report(sweep_dir, out_dir, failures=None) -> Bundle:
    """Assemble the figure-data bundle of the sweep stored in ``sweep_dir``."""
    src = Path(sweep_dir)
    points_csv = src / "points.csv"
    if not points_csv.exists():
        raise ConfigurationError(f"{points_csv} not found; run a sweep first")
    rows = read_points(points_csv)
    if failures is None:
        fpath = src / "failures.json"
        failures = json.loads(fpath.read_text()) if fpath.exists() else []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = Bundle(root=out)
    for f in failures:
        bundle.gaps.append({"d": f["d"], "h_m": f["h_m"], "reason": f"{f['error']}: {f['message']}"})
    if not rows:
        bundle.gaps.append({"reason": "no successful sweep point"})
        _finish(bundle)
        return bundle
    with open(points_csv, newline="") as fh:
        columns = next(csv.reader(fh))

    ds, hs = _grid(rows + [{"d": f["d"], "h_m": f["h_m"]} for f in failures])
    index = {(r["d"], r["h_m"]): r for r in rows}

    (out / "maps").mkdir(exist_ok=True)
    for q in _quantities(columns):
        grid = np.full((len(ds), len(hs)), math.nan)
        path = out / "maps" / f"{q}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "h_m", q])
            for j, h in enumerate(hs):
                for i, d in enumerate(ds):
                    r = index.get((d, h))
                    if r is None:
                        w.writerow([repr(d), repr(h), "MISSING"])
                    else:
                        grid[i, j] = r[q]
                        w.writerow([repr(d), repr(h), repr(r[q])])
        write_pgm(out / "maps" / f"{q}.pgm", grid)
        bundle.files += [path, out / "maps" / f"{q}.pgm"]

    (out / "cuts").mkdir(exist_ok=True)
    h_cut = _nearest(hs, REFERENCE_H)
    cut = [index[(d, h_cut)] for d in ds if (d, h_cut) in index]
    cut_cols = ["d"] + _quantities(columns)
    path = out / "cuts" / f"cut_h{h_cut * 1e9:.0f}nm.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cut_cols)
        for r in cut:
            w.writerow([repr(r[c]) for c in cut_cols])
    bundle.files.append(path)
    bundle.summary.update(_cut_summary(cut, columns, h_cut))

    (out / "patterns").mkdir(exist_ok=True)
    for r in rows:
        tag = point_tag(r["d"], r["h_m"])
        for pol in ("X", "Y"):
            for ext in ("csv", "pgm"):
                s = src / "points" / tag / f"pattern_{pol}.{ext}"
                if s.exists():
                    dst = out / "patterns" / f"{tag}_{pol}.{ext}"
                    shutil.copyfile(s, dst)
                    bundle.files.append(dst)
                else:
                    bundle.gaps.append({"d": r["d"], "h_m": r["h_m"], "reason": f"missing {s.name}"})

    ref = min(rows, key=lambda r: (abs(r["h_m"] - REFERENCE_H), abs(r["d"] - REFERENCE_D)))
    tag = point_tag(ref["d"], ref["h_m"])
    mdir = src / "points" / tag
    if mdir.exists():
        dst = out / "mismatch" / tag
        dst.mkdir(parents=True, exist_ok=True)
        for s in sorted(mdir.glob("*.csv")) + sorted(mdir.glob("*.json")):
            if s.name.startswith(("beta", "mismatch", "rcontours", "cascade")):
                shutil.copyfile(s, dst / s.name)
                bundle.files.append(dst / s.name)
        summary = mdir / "cascade_summary.json"
        if summary.exists():
            bundle.summary["cascade"] = {"point": tag, **json.loads(summary.read_text())}
    else:
        bundle.gaps.append({"d": ref["d"], "h_m": ref["h_m"], "reason": "missing mismatch tables"})
    _finish(bundle)
    return bundle


def _cut_summary(cut, columns, h_cut):
    s = {"cut_h_m": h_cut, "cut_points": len(cut)}
    if not cut:
        return s
    d = np.array([r["d"] for r in cut])
    fp = np.array([r["Fp"] for r in cut])
    s["Fp_peak"] = float(fp.max())
    s["Fp_peak_d"] = float(d[int(fp.argmax())])
    for q in _quantities(columns):
        if q.startswith("K_NA"):
            v = np.array([r[q] for r in cut])
            s[f"{q}_min"] = float(v.min())
            s[f"{q}_min_d"] = float(d[int(v.argmin())])
    near = min(cut, key=lambda r: abs(r["d"] - REFERENCE_D))
    s["reference_d"] = near["d"]
    for q in _quantities(columns):
        s[f"{q}_at_reference"] = near[q]
    if "eta_NA0.50" in near and "eta_NA0.70" in near and near["eta_NA0.50"] > 0:
        s["eta_ratio_NA0.70_over_NA0.50"] = near["eta_NA0.70"] / near["eta_NA0.50"]
    return s


def _finish(bundle: Bundle):
    (bundle.root / "gaps.json").write_text(json.dumps(bundle.gaps, indent=1, sort_keys=True, default=float))
    (bundle.root / "summary.json").write_text(json.dumps(bundle.summary, indent=1, sort_keys=True, default=float))
