"""Sweep plans and their YAML configuration files.

Example::

    design:
      lattice_constant: 270nm
      hole_radius: 80nm
      membrane_thickness: 0.26um
    simulation:
      resolution: 16
      free_cycles: 300
    sweep:
      d: {start: 0.0, stop: 0.18, step: 0.01}
      h: [0.26um]
      na: [0.2, 0.5, 0.7]
      offsets: {start: 0nm, stop: 100nm, step: 5nm}
    cascade:
      - {name: 2ueV, t1_bulk: 1ns, splitting: 2ueV, fp_max: 10}
    workers: 1

Lengths take ``m``/``um``/``nm`` suffixes, energies ``eV``/``meV``/``ueV``
and times ``s``/``ns``/``ps``; bare numbers are SI (energies in eV).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from h1cavity.errors import ConfigurationError
from h1cavity.geometry import MIN_RESOLUTION, CavityDesign
from h1cavity.units import parse_energy, parse_length, parse_time

DEFAULT_D = tuple(round(0.01 * i, 2) for i in range(19))
DEFAULT_H = (0.24e-6, 0.25e-6, 0.26e-6, 0.27e-6, 0.28e-6)
DEFAULT_NA = (0.2, 0.5, 0.7)
DEFAULT_OFFSETS = tuple(5e-9 * i for i in range(21))
DEFAULT_CASCADE = (
    {"name": "2ueV", "t1_bulk": 1e-9, "splitting_ev": 2e-6, "fp_max": 10.0},
    {"name": "5ueV", "t1_bulk": 1e-9, "splitting_ev": 5e-6, "fp_max": 10.0},
)


@dataclass(frozen=True)
class SweepPlan:
    """Axes of a parameter sweep and the settings shared by all its points.

    ``d_values`` are inner-hole shifts in lattice constants, ``h_values``
    membrane thicknesses and ``offsets`` dot displacements along X, both in
    meters.  A cascade preset with ``fp_max`` None uses the Purcell factor
    computed for the design.
    """

    d_values: tuple = DEFAULT_D
    h_values: tuple = DEFAULT_H
    na_values: tuple = DEFAULT_NA
    offsets: tuple = DEFAULT_OFFSETS
    resolution: int = 16
    base_design: CavityDesign = field(default_factory=CavityDesign)
    cascade: tuple = DEFAULT_CASCADE
    free_cycles: int = 300
    workers: int = 1
    strict: bool = False
    convention: str = "intensity"

    def __post_init__(self):
        for name in ("d_values", "h_values", "na_values", "offsets"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ConfigurationError(f"sweep axis {name} is empty")
            object.__setattr__(self, name, values)
        if any(not 0.0 <= d <= 0.18 + 1e-12 for d in self.d_values):
            raise ConfigurationError("d values must lie in [0, 0.18]")
        if any(not h > 0 for h in self.h_values):
            raise ConfigurationError("h values must be positive")
        if any(not 0 < na <= 1 for na in self.na_values):
            raise ConfigurationError("NA values must lie in (0, 1]")
        if any(o < 0 for o in self.offsets):
            raise ConfigurationError("offsets must be >= 0")
        if int(self.resolution) < MIN_RESOLUTION:
            raise ConfigurationError(f"resolution must be >= {MIN_RESOLUTION}")
        if self.free_cycles < 1 or self.workers < 1:
            raise ConfigurationError("free_cycles and workers must be >= 1")
        if self.convention not in ("intensity", "amplitude"):
            raise ConfigurationError("convention must be 'intensity' or 'amplitude'")
        for preset in self.cascade:
            missing = {"name", "t1_bulk", "splitting_ev"} - set(preset)
            if missing:
                raise ConfigurationError(f"cascade preset lacks {sorted(missing)}")

    def designs(self):
        """(d, h, design) for every sweep point, in canonical order."""
        for h in self.h_values:
            for d in self.d_values:
                yield d, h, self.base_design.replace(inner_hole_shift=d, membrane_thickness=h)

    def replace(self, **changes) -> "SweepPlan":
        return dataclasses.replace(self, **changes)


def _axis(spec, parse):
    if isinstance(spec, dict):
        try:
            start, stop, step = parse(spec["start"]), parse(spec["stop"]), parse(spec["step"])
        except KeyError as exc:
            raise ConfigurationError(f"range needs start, stop and step (missing {exc})") from None
        if not step > 0:
            raise ConfigurationError("range step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(max(n, 0)))
    if isinstance(spec, (list, tuple)):
        return tuple(parse(v) for v in spec)
    return (parse(spec),)


def _cascade_presets(items):
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise ConfigurationError("cascade presets must be mappings")
        try:
            preset = {
                "name": str(item.get("name", f"preset{len(out)}")),
                "t1_bulk": parse_time(item["t1_bulk"]),
                "splitting_ev": parse_energy(item["splitting"]),
                "fp_max": None if item.get("fp_max") is None else float(item["fp_max"]),
            }
        except KeyError as exc:
            raise ConfigurationError(f"cascade preset lacks {exc}") from None
        out.append(preset)
    return tuple(out)


def plan_from_mapping(data: dict) -> SweepPlan:
    known = {"design", "simulation", "sweep", "cascade", "workers", "strict", "convention"}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown configuration sections: {sorted(unknown)}")
    kw = {}
    if "design" in data:
        kw["base_design"] = CavityDesign.from_mapping(data["design"] or {})
    sim = data.get("simulation") or {}
    if "resolution" in sim:
        kw["resolution"] = int(sim["resolution"])
    if "free_cycles" in sim:
        kw["free_cycles"] = int(sim["free_cycles"])
    sweep = data.get("sweep") or {}
    parsers = {"d": ("d_values", float), "h": ("h_values", parse_length),
               "na": ("na_values", float), "offsets": ("offsets", parse_length)}
    for key, value in sweep.items():
        if key not in parsers:
            raise ConfigurationError(f"unknown sweep axis {key!r}")
        name, parse = parsers[key]
        kw[name] = _axis(value, parse)
    if "cascade" in data:
        kw["cascade"] = _cascade_presets(data["cascade"] or [])
    for key in ("workers", "strict", "convention"):
        if key in data:
            kw[key] = data[key]
    return SweepPlan(**kw)


def load_config(path) -> SweepPlan:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a mapping")
    return plan_from_mapping(data)
