"""H1 cavity parameterization and rasterization onto a cubic Yee grid.

The cavity is a triangular lattice of air holes etched through a suspended
membrane, with the central hole removed.  The six holes surrounding the defect
are pushed radially outward by ``inner_hole_shift`` lattice constants.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from h1cavity.errors import ConfigurationError
from h1cavity.units import parse_length

MIN_RESOLUTION = 8
#: sub-samples per axis used to estimate the hole area fraction of a cell
SUPERSAMPLING = 16
#: lateral air/slab margin beyond the outermost hole ring, in lattice constants
LATERAL_MARGIN = 0.5


@dataclass(frozen=True)
class CavityDesign:
    """Geometry and material of an H1 membrane cavity (SI units)."""

    lattice_constant: float = 270e-9
    hole_radius: float = 80e-9
    slab_index: float = 3.46
    membrane_thickness: float = 0.26e-6
    inner_hole_shift: float = 0.0
    lattice_rings: int = 7
    vertical_padding: float | None = None
    pml_cells: int = 12

    def __post_init__(self):
        a = self.lattice_constant
        if not a > 0:
            raise ConfigurationError("lattice_constant must be positive")
        if not 0 < self.hole_radius < a / 2:
            raise ConfigurationError("hole_radius must lie in (0, a/2)")
        if not 0.0 <= self.inner_hole_shift <= 0.18 + 1e-12:
            raise ConfigurationError("inner_hole_shift must lie in [0, 0.18] (units of a)")
        if not self.membrane_thickness > 0:
            raise ConfigurationError("membrane_thickness must be positive")
        if not self.slab_index > 1:
            raise ConfigurationError("slab_index must exceed 1")
        if int(self.lattice_rings) != self.lattice_rings or self.lattice_rings < 2:
            raise ConfigurationError("lattice_rings must be an integer >= 2")
        if self.pml_cells < 0:
            raise ConfigurationError("pml_cells must be >= 0")
        if self.vertical_padding is None:
            object.__setattr__(self, "vertical_padding", 3.0 * a)
        elif self.vertical_padding < 0:
            raise ConfigurationError("vertical_padding must be >= 0")

    @property
    def eps_slab(self) -> float:
        return self.slab_index**2

    def replace(self, **changes) -> "CavityDesign":
        if "lattice_constant" in changes and "vertical_padding" not in changes:
            changes["vertical_padding"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "CavityDesign":
        """Build a design from config keys; lengths accept ``nm``/``um`` suffixes."""
        lengths = {"lattice_constant", "hole_radius", "membrane_thickness", "vertical_padding"}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigurationError(f"unknown design keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in mapping.items():
            if value is None:
                kwargs[key] = None
            elif key in lengths:
                kwargs[key] = parse_length(value)
            elif key in ("lattice_rings", "pml_cells"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


def load_design(path) -> CavityDesign:
    """Read a design from a YAML file (optionally nested under a ``design:`` key)."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if "design" in data:
        data = data["design"]
    return CavityDesign.from_mapping(data)


def _lattice_sites(rings: int) -> np.ndarray:
    """Integer (m, l) coordinates of a hexagonal patch of the triangular lattice."""
    sites = []
    for m in range(-rings, rings + 1):
        for l in range(-rings, rings + 1):
            if max(abs(m), abs(l), abs(m + l)) <= rings:
                sites.append((m, l))
    return np.array(sites, dtype=int)


def hole_centers(design: CavityDesign) -> np.ndarray:
    """Hole centers in meters, shape ``(N, 2)``, cavity at the origin.

    N = 3 R (R + 1) for R rings: the full hexagonal patch minus the removed
    central hole.
    """
    a = design.lattice_constant
    ml = _lattice_sites(design.lattice_rings)
    hexdist = np.max(np.abs(np.column_stack([ml[:, 0], ml[:, 1], ml.sum(axis=1)])), axis=1)
    ml, hexdist = ml[hexdist > 0], hexdist[hexdist > 0]
    xy = a * np.column_stack([ml[:, 0] + 0.5 * ml[:, 1], (math.sqrt(3) / 2) * ml[:, 1]])
    inner = hexdist == 1
    # nearest neighbours sit exactly at distance a; push them radially outward
    xy[inner] *= 1.0 + design.inner_hole_shift
    return xy


@dataclass(frozen=True)
class GridLayout:
    """Cubic cell grid: cavity center at a cell center in x, y and at a node in z."""

    cell_size: float
    shape: tuple
    pml: int

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.shape[0]) - (self.shape[0] - 1) / 2) * self.cell_size

    @property
    def y_centers(self) -> np.ndarray:
        return (np.arange(self.shape[1]) - (self.shape[1] - 1) / 2) * self.cell_size

    @property
    def z_centers(self) -> np.ndarray:
        return (np.arange(self.shape[2]) - self.shape[2] / 2 + 0.5) * self.cell_size

    @property
    def x_nodes(self) -> np.ndarray:
        return self.x_centers - 0.5 * self.cell_size

    @property
    def y_nodes(self) -> np.ndarray:
        return self.y_centers - 0.5 * self.cell_size

    @property
    def z_nodes(self) -> np.ndarray:
        return self.z_centers - 0.5 * self.cell_size

    @property
    def interior(self) -> tuple:
        """Slices selecting the non-PML cells."""
        p = self.pml
        return tuple(slice(p, n - p) for n in self.shape)

    @property
    def center_index(self) -> tuple:
        """Fractional node-index coordinates of the cavity center."""
        nx, ny, nz = self.shape
        return (nx / 2, ny / 2, nz / 2)


def grid_layout(design: CavityDesign, resolution: int) -> GridLayout:
    if resolution < MIN_RESOLUTION:
        raise ConfigurationError(
            f"resolution {resolution} is below the minimum of {MIN_RESOLUTION} cells per lattice constant"
        )
    a = design.lattice_constant
    dx = a / resolution
    rings = design.lattice_rings
    half_x = rings * a + design.hole_radius + LATERAL_MARGIN * a
    half_y = rings * a * math.sqrt(3) / 2 + design.hole_radius + LATERAL_MARGIN * a
    half_z = design.membrane_thickness / 2 + design.vertical_padding
    mx = math.ceil(half_x / dx - 0.5 - 1e-9)
    my = math.ceil(half_y / dx - 0.5 - 1e-9)
    mz = math.ceil(half_z / dx - 1e-9)
    p = design.pml_cells
    shape = (2 * mx + 1 + 2 * p, 2 * my + 1 + 2 * p, 2 * mz + 2 * p)
    return GridLayout(cell_size=dx, shape=shape, pml=p)


def _slab_fraction(z: np.ndarray, dx: float, thickness: float) -> np.ndarray:
    lo = np.maximum(z - dx / 2, -thickness / 2)
    hi = np.minimum(z + dx / 2, thickness / 2)
    return np.clip(hi - lo, 0.0, None) / dx


def _hole_fraction(design: CavityDesign, x: np.ndarray, y: np.ndarray, dx: float, normals=False):
    """Area fraction of each dx-by-dx square (centered on the x, y grid) inside a hole.

    With ``normals=True`` also returns the squared x and y components of the
    unit interface normal (radial from the hole center) for every square.
    """
    frac = np.zeros((x.size, y.size))
    nx2 = np.zeros_like(frac)
    r = design.hole_radius
    s = SUPERSAMPLING
    sub = ((np.arange(s) + 0.5) / s - 0.5) * dx
    reach = r + dx
    for cx, cy in hole_centers(design):
        i0, i1 = np.searchsorted(x, [cx - reach, cx + reach])
        j0, j1 = np.searchsorted(y, [cy - reach, cy + reach])
        if i0 >= i1 or j0 >= j1:
            continue
        px = (x[i0:i1, None] + sub[None, :] - cx) ** 2
        py = (y[j0:j1, None] + sub[None, :] - cy) ** 2
        inside = px[:, None, :, None] + py[None, :, None, :] <= r * r
        frac[i0:i1, j0:j1] += inside.mean(axis=(2, 3))
        if normals:
            ddx = (x[i0:i1] - cx)[:, None]
            ddy = (y[j0:j1] - cy)[None, :]
            rr = ddx**2 + ddy**2
            nx2[i0:i1, j0:j1] = np.where(rr > 0, ddx**2 / np.where(rr > 0, rr, 1.0), 0.5)
    frac = np.minimum(frac, 1.0)
    if normals:
        return frac, nx2, 1.0 - nx2
    return frac


def permittivity_on(design: CavityDesign, x, y, z, dx: float, component=None) -> np.ndarray:
    """Volume-averaged relative permittivity of dx-cubes centered on the x, y, z grid.

    Holes are vertical cylinders, so the slab volume fraction of a cube is the
    product of its vertical slab fraction and its in-plane non-hole fraction.
    With ``component`` in ``"x", "y", "z"`` the average is the anisotropic
    one seen by that field component: harmonic along the local interface
    normal and arithmetic along the interface, first across hole walls
    (radial normal) and then across the slab faces (normal along z).
    """
    x, y, z = (np.asarray(v, float) for v in (x, y, z))
    eps = design.eps_slab
    fz = _slab_fraction(z, dx, design.membrane_thickness)
    if component is None:
        fxy = 1.0 - _hole_fraction(design, x, y, dx)
        return 1.0 + (eps - 1.0) * fxy[:, :, None] * fz[None, None, :]
    if component not in ("x", "y", "z"):
        raise ConfigurationError("component must be 'x', 'y' or 'z'")
    fh, nx2, ny2 = _hole_fraction(design, x, y, dx, normals=True)
    arith = fh + (1.0 - fh) * eps
    if component == "z":
        layer = arith
    else:
        n2 = nx2 if component == "x" else ny2
        harm = 1.0 / (fh + (1.0 - fh) / eps)
        layer = 1.0 / (n2 / harm + (1.0 - n2) / arith)
    layer = layer[:, :, None]
    fz = fz[None, None, :]
    if component == "z":
        return 1.0 / (fz / layer + (1.0 - fz))
    return 1.0 + (layer - 1.0) * fz


@dataclass(frozen=True)
class DielectricMap:
    """Relative permittivity sampled at cell centers."""

    permittivity: np.ndarray = field(repr=False)
    cell_size: float
    origin: tuple

    @property
    def grid_dims(self) -> tuple:
        return tuple(self.permittivity.shape)

    def save(self, path) -> None:
        """Write a text header followed by the raw little-endian float32 grid."""
        header = (
            "H1CAVITY-GRID 1\n"
            f"dims = {' '.join(str(n) for n in self.grid_dims)}\n"
            f"cell_size = {self.cell_size!r}\n"
            f"origin = {' '.join(repr(float(o)) for o in self.origin)}\n"
            "dtype = float32-le\n"
            "order = C (x slowest, z fastest)\n"
            "end_header\n"
        )
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(self.permittivity, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "DielectricMap":
        raw = Path(path).read_bytes()
        marker = b"end_header\n"
        cut = raw.index(marker) + len(marker)
        meta = {}
        for line in raw[:cut].decode("ascii").splitlines()[1:-1]:
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        dims = tuple(int(v) for v in meta["dims"].split())
        data = np.frombuffer(raw[cut:], dtype="<f4").reshape(dims).astype(float)
        origin = tuple(float(v) for v in meta["origin"].split())
        return cls(permittivity=data, cell_size=float(meta["cell_size"]), origin=origin)


def rasterize(design: CavityDesign, resolution: int) -> DielectricMap:
    """Rasterize the cavity at ``resolution`` cells per lattice constant.

    The grid includes the vertical air padding and the PML shells.
    """
    layout = grid_layout(design, resolution)
    eps = permittivity_on(
        design, layout.x_centers, layout.y_centers, layout.z_centers, layout.cell_size
    )
    return DielectricMap(permittivity=eps, cell_size=layout.cell_size, origin=layout.center_index)
