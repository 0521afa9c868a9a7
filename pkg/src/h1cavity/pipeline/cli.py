"""Command-line entry point: ``h1cavity {simulate,farfield,cascade,sweep,report}``.

Exit status: 0 on success, 2 for invalid input, 3 when a computation fails
(or, with ``--strict``, when a report has gaps).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from h1cavity import __version__, cascade, farfield
from h1cavity.errors import ConfigurationError, H1CavityError, NumericalError, OutOfRangeError
from h1cavity.fdtd.io import write_series
from h1cavity.geometry import CavityDesign, load_design
from h1cavity.pipeline.cache import CACHE_ENV, ResultCache
from h1cavity.pipeline.config import load_config
from h1cavity.pipeline.report import report
from h1cavity.pipeline.sweep import analyse_point, na_tag, run_sweep, write_point_artifacts
from h1cavity.units import parse_energy, parse_length, parse_time

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("h1cavity")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _design_args(p):
    g = p.add_argument_group("design")
    g.add_argument("--design", type=Path, help="YAML file with the design (overridden by the flags below)")
    g.add_argument("--d", type=float, help="inner hole shift, lattice constants")
    g.add_argument("--h", help="membrane thickness, e.g. 0.26um")
    g.add_argument("--rings", type=int, help="number of hole rings around the defect")
    g.add_argument("--resolution", type=int, default=16, help="cells per lattice constant (default 16)")
    g.add_argument("--free-cycles", type=int, default=300, help="free ring-down cycles (default 300)")


def _design(ns) -> CavityDesign:
    design = load_design(ns.design) if ns.design else CavityDesign()
    changes = {}
    if ns.d is not None:
        changes["inner_hole_shift"] = ns.d
    if ns.h is not None:
        changes["membrane_thickness"] = parse_length(ns.h)
    if ns.rings is not None:
        changes["lattice_rings"] = ns.rings
    return design.replace(**changes) if changes else design


def _cache(ns) -> ResultCache:
    return ResultCache(ns.cache_dir)


def _print_rows(rows, out=None):
    if not rows:
        return
    out = out or sys.stdout
    w = csv.DictWriter(out, fieldnames=list(rows[0]))
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})


def cmd_simulate(ns):
    design = _design(ns)
    cache = _cache(ns)
    from h1cavity.fdtd.ringdown import run_ringdown
    from h1cavity.mode_analysis import ModeCharacterization, purcell_max

    rows = []
    out = Path(ns.out) if ns.out else None
    for pol in ("X", "Y") if ns.orientation == "both" else (ns.orientation,):
        rd = cache.get_or_run(design, ns.resolution, pol, run_ringdown, {"free_cycles": ns.free_cycles})
        mode = ModeCharacterization(pol, rd.wavelength, rd.gamma, rd.quality_factor, rd.mode_volume,
                                    purcell_max(rd.quality_factor, rd.mode_volume))
        rows.append({"d": design.inner_hole_shift, "h_m": design.membrane_thickness, "polarization": pol,
                     "lambda_m": mode.resonant_wavelength, "gamma_per_s": mode.field_decay_rate,
                     "Q": mode.quality_factor, "V": mode.mode_volume, "Fp": mode.purcell_max,
                     "flux_ratio": rd.flux_power / rd.emitted_power})
        if out:
            out.mkdir(parents=True, exist_ok=True)
            write_series(out / f"probe_{pol}.csv", rd.probe_time, rd.probe_value)
            write_series(out / f"energy_{pol}.csv", rd.energy_time, rd.energy_value)
    _print_rows(rows)
    if out:
        with open(out / "modes.csv", "w", newline="") as fh:
            _print_rows(rows, fh)
    return EXIT_OK


def cmd_farfield(ns):
    design = _design(ns)
    point = analyse_point(design, ns.resolution, ns.na, _cache(ns), run_params={"free_cycles": ns.free_cycles},
                          convention=ns.convention, strict=ns.strict)
    rows = [{"NA": na, "eta_X": point.row[f"eta_X_{na_tag(na)}"], "eta_Y": point.row[f"eta_Y_{na_tag(na)}"],
             "K": point.row[f"K_{na_tag(na)}"]} for na in ns.na]
    _print_rows(rows)
    if ns.out:
        write_point_artifacts(point, ns.out, [], [])
    return EXIT_OK


def cmd_cascade(ns):
    t1, split = parse_time(ns.t1), parse_energy(ns.splitting)
    if ns.k:
        rates = cascade.CascadeRates(gamma1=1.0 / t1)
        _print_rows([{"K": k, "S": s} for k, s in cascade.bell_vs_overlap(rates, ns.k)])
        return EXIT_OK
    if ns.d is None and ns.design is None:
        r = cascade.figure_of_merit(t1, split, ns.fp)
        s = cascade.bell_asymmetric(1.0, 1.0, r, ns.method)
        _print_rows([{"r": r, "S_centered": s}])
        return EXIT_OK
    design = _design(ns)
    from h1cavity.fdtd.ringdown import run_ringdown
    from h1cavity.mode_analysis import beta_factors

    cache = _cache(ns)
    params = {"free_cycles": ns.free_cycles}
    rx = cache.get_or_run(design, ns.resolution, "X", run_ringdown, params)
    ry = cache.get_or_run(design, ns.resolution, "Y", run_ringdown, params)
    offsets = [i * parse_length(ns.offset_step) for i in range(ns.offset_count)]
    rows, threshold = cascade.bell_vs_mismatch(lambda o: beta_factors(rx.midplane, ry.midplane, o), offsets,
                                               t1, split, ns.fp, ns.method)
    _print_rows([{"offset_m": r.offset, "beta_X": r.beta_x, "beta_Y": r.beta_y, "delta_F": r.delta_F,
                  "g": r.g, "S": r.S, "S_max": r.S_max} for r in rows])
    print(f"# largest offset with S >= 2: {threshold}")
    return EXIT_OK


def cmd_sweep(ns):
    plan = load_config(ns.config) if ns.config else None
    if plan is None:
        from h1cavity.pipeline.config import SweepPlan
        plan = SweepPlan()
    changes = {}
    if ns.resolution is not None:
        changes["resolution"] = ns.resolution
    if ns.workers is not None:
        changes["workers"] = ns.workers
    if ns.strict:
        changes["strict"] = True
    if changes:
        plan = plan.replace(**changes)
    tables = run_sweep(plan, _cache(ns), ns.out)
    print(f"{len(tables.rows)} points computed, {len(tables.failures)} failed; tables in {ns.out}")
    if tables.failures and plan.strict:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_report(ns):
    bundle = report(ns.sweep, ns.out)
    print(json.dumps(bundle.summary, indent=1, sort_keys=True, default=float))
    if bundle.gaps:
        print(f"# {len(bundle.gaps)} gap(s) recorded in {Path(ns.out) / 'gaps.json'}", file=sys.stderr)
        if ns.strict:
            return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="h1cavity", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--cache-dir", type=Path, default=None,
                   help=f"result cache directory (default: ${CACHE_ENV} or ~/.cache/h1cavity)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="ring down one design and print its mode parameters")
    _design_args(s)
    s.add_argument("--orientation", choices=("X", "Y", "both"), default="both")
    s.add_argument("--out", help="directory for modes.csv and the probe/energy series")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("farfield", help="collection efficiency and mode overlap of one design")
    _design_args(s)
    s.add_argument("--na", type=_floats, default=list(farfield.REFERENCE_APERTURES),
                   help="comma-separated numerical apertures (default 0.2,0.5,0.7)")
    s.add_argument("--convention", choices=("intensity", "amplitude"), default="intensity")
    s.add_argument("--strict", action="store_true", help="fail when the near-field plane is truncated")
    s.add_argument("--out", help="directory for radiation patterns")
    s.set_defaults(func=cmd_farfield)

    s = sub.add_parser("cascade", help="Bell parameter of the photon pairs")
    _design_args(s)
    s.add_argument("--t1", default="1ns", help="bulk exciton lifetime (default 1ns)")
    s.add_argument("--splitting", default="2ueV", help="full exciton splitting (default 2ueV)")
    s.add_argument("--fp", type=float, default=10.0, help="maximal Purcell factor (default 10)")
    s.add_argument("--k", type=_floats, help="print S for these overlaps of an ideal cascade instead")
    s.add_argument("--method", choices=("chsh", "horodecki"), default="chsh")
    s.add_argument("--offset-step", default="5nm")
    s.add_argument("--offset-count", type=int, default=21)
    s.set_defaults(func=cmd_cascade)

    s = sub.add_parser("sweep", help="run a (d, h) parameter sweep")
    s.add_argument("--config", type=Path, help="YAML sweep configuration")
    s.add_argument("--out", type=Path, required=True, help="output directory for tables")
    s.add_argument("--resolution", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--strict", action="store_true", help="exit with status 3 if any point fails")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="build the figure-data bundle of a finished sweep")
    s.add_argument("--sweep", type=Path, required=True, help="sweep output directory")
    s.add_argument("--out", type=Path, required=True, help="bundle directory")
    s.add_argument("--strict", action="store_true", help="exit with status 3 when data are missing")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (ConfigurationError, OutOfRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, H1CavityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
