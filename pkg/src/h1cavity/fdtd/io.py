"""Checkpoints of a running simulation and CSV time series.

A checkpoint is an ASCII header terminated by ``end_header`` followed by the
raw little-endian float32 arrays named in the header, in header order.  It
holds everything that changes during a run (fields, PML split parts, step
index); the static coefficients are rebuilt from the design on resume.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from h1cavity.errors import ConfigurationError

MAGIC = "H1CAVITY-CHECKPOINT 1"
_ARRAYS = ("ex", "ey", "ez", "hx", "hy", "hz", "exy", "eyz", "ezx", "hxy", "hyz", "hzx")


def save_checkpoint(state, path) -> None:
    arrays = [(n, state.fields[n]) for n in _ARRAYS[:6]] + [(n, state.split[n]) for n in _ARRAYS[6:]]
    lines = [
        MAGIC,
        f"step_index = {state.step_index}",
        f"dt = {state.dt!r}",
        f"cell_size = {state.cell_size!r}",
        f"dims = {' '.join(str(n) for n in state.shape)}",
        "dtype = float32-le",
    ]
    lines += [f"array {name} = {' '.join(str(n) for n in a.shape)}" for name, a in arrays]
    lines.append("end_header")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())
    tmp.replace(path)


def load_checkpoint(state, path) -> None:
    """Restore fields and clock into ``state``, which must match the saved grid."""
    raw = Path(path).read_bytes()
    marker = b"end_header\n"
    if not raw.startswith(MAGIC.encode()):
        raise ConfigurationError(f"{path} is not a checkpoint file")
    cut = raw.index(marker) + len(marker)
    meta, shapes = {}, []
    for line in raw[:cut].decode("ascii").splitlines()[1:-1]:
        key, _, value = line.partition("=")
        key = key.strip()
        if key.startswith("array "):
            shapes.append((key[6:], tuple(int(v) for v in value.split())))
        else:
            meta[key] = value.strip()
    dims = tuple(int(v) for v in meta["dims"].split())
    if dims != state.shape or float(meta["dt"]) != state.dt:
        raise ConfigurationError("checkpoint grid or time step does not match the simulation")
    offset = cut
    for name, shape in shapes:
        n = int(np.prod(shape))
        data = np.frombuffer(raw, dtype="<f4", count=n, offset=offset).reshape(shape)
        offset += 4 * n
        target = state.fields.get(name)
        if target is None:
            target = state.split[name]
        if target.shape != shape:
            raise ConfigurationError(f"checkpoint array {name} has shape {shape}, expected {target.shape}")
        target[...] = data
    state.step_index = int(meta["step_index"])


def write_series(path, t_seconds, values) -> None:
    """Write a two-column CSV with header ``t_seconds,value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_seconds", "value"])
        for t, v in zip(t_seconds, values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_series(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


_RESULT_ARRAYS = ("probe_time", "probe_value", "energy_time", "energy_value")


def save_ringdown(result, path) -> None:
    """Store a ``RingdownResult`` as an uncompressed ``.npz`` archive.

    Scalars and metadata travel as a JSON document inside the archive, so the
    file loads without pickling.
    """
    arrays = {name: np.asarray(getattr(result, name)) for name in _RESULT_ARRAYS}
    for name, (x, y, v) in result.plane.components.items():
        arrays[f"plane_{name}_x"], arrays[f"plane_{name}_y"], arrays[f"plane_{name}"] = x, y, v
    mid = result.midplane
    arrays["mid_x"], arrays["mid_y"], arrays["mid_values"] = mid.x, mid.y, mid.values
    doc = {
        "orientation": result.orientation,
        "design": result.design.to_dict(),
        "resolution": result.resolution,
        "omega": result.omega,
        "gamma": result.gamma,
        "fit": dataclasses.asdict(result.fit),
        "energy_t0": result.energy_t0,
        "flux_power": result.flux_power,
        "mode_volume": result.mode_volume,
        "plane_z": result.plane.z,
        "plane_components": sorted(result.plane.components),
        "source_off": result.source_off,
        "capture_time": result.capture_time,
        "extensions": result.extensions,
        "meta": result.meta,
    }
    arrays["doc"] = np.frombuffer(json.dumps(doc, sort_keys=True, default=float).encode(), dtype=np.uint8)
    tmp = Path(str(path) + ".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_ringdown(path):
    from h1cavity.fdtd.ringdown import PlaneField, RingdownResult
    from h1cavity.geometry import CavityDesign
    from h1cavity.mode_analysis import DecayFit, MidplaneField

    with np.load(path, allow_pickle=False) as z:
        data = {k: z[k] for k in z.files}
    doc = json.loads(data.pop("doc").tobytes().decode())
    comps = {n: (data[f"plane_{n}_x"], data[f"plane_{n}_y"], data[f"plane_{n}"]) for n in doc["plane_components"]}
    return RingdownResult(
        orientation=doc["orientation"],
        design=CavityDesign(**doc["design"]),
        resolution=doc["resolution"],
        omega=doc["omega"],
        gamma=doc["gamma"],
        fit=DecayFit(**doc["fit"]),
        probe_time=data["probe_time"],
        probe_value=data["probe_value"],
        energy_time=data["energy_time"],
        energy_value=data["energy_value"],
        energy_t0=doc["energy_t0"],
        flux_power=doc["flux_power"],
        mode_volume=doc["mode_volume"],
        plane=PlaneField(z=doc["plane_z"], components=comps),
        midplane=MidplaneField(x=data["mid_x"], y=data["mid_y"], values=data["mid_values"]),
        source_off=doc["source_off"],
        capture_time=doc["capture_time"],
        extensions=doc["extensions"],
        meta=doc["meta"],
    )
