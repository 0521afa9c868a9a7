"""Yee-lattice state, split-field PML, dipole sources and the time step.

The solver works in normalized units: lengths in lattice constants (or any
length unit chosen by the caller through ``cell_size``), c = eps0 = mu0 = 1,
so the wave impedance of vacuum is 1 and times are lengths / c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from h1cavity.errors import ConfigurationError, NumericalError
from h1cavity.fdtd import _kernels

COURANT_SAFETY = 0.95


@dataclass(frozen=True)
class PmlSpec:
    """Polynomially graded split-field PML, ``sigma(rho) = sigma_max (rho / L)**m``.

    ``max_conductivity`` is a decay rate (1 / normalized time).  When left as
    None it is chosen for a theoretical normal-incidence round-trip reflection
    of ``target_reflection``.
    """

    thickness_cells: int = 12
    grading_order: int = 4
    max_conductivity: float | None = None
    target_reflection: float = 1e-8

    def sigma_max(self, cell_size: float) -> float:
        if self.max_conductivity is not None:
            return self.max_conductivity
        L = self.thickness_cells * cell_size
        return -(self.grading_order + 1) * math.log(self.target_reflection) / (2.0 * L)


def _profiles(n, p, spec, cell_size, dt, periodic):
    """(a, b) update profiles at integer nodes and at half-integer positions."""
    ones = np.ones(n, np.float32)
    if p == 0 or periodic:
        return (ones, ones.copy()), (ones.copy(), ones.copy())
    smax = spec.sigma_max(cell_size)
    m = spec.grading_order

    def coeffs(pos):
        depth = np.maximum(np.maximum(p - pos, pos - (n - p)), 0.0) / p
        sig = smax * depth**m
        x = sig * dt
        a = np.exp(-x)
        b = np.where(x > 0, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0)
        return a.astype(np.float32), b.astype(np.float32)

    nodes = np.arange(n, dtype=float)
    return coeffs(nodes), coeffs(nodes + 0.5)


@dataclass(frozen=True)
class DipoleSource:
    """Gaussian-enveloped point dipole current.

    The envelope full width at half maximum is ``width_periods`` carrier
    periods; the pulse is centered 2.5 widths after t = 0 and switched off
    (identically zero) after 5 widths.  ``position`` is in solver length units
    relative to the grid center.
    """

    wavelength: float
    orientation: str = "X"
    position: tuple = (0.0, 0.0, 0.0)
    width_periods: float = 10.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.orientation not in ("X", "Y", "Z"):
            raise ConfigurationError("orientation must be 'X', 'Y' or 'Z'")
        if not self.wavelength > 0:
            raise ConfigurationError("source wavelength must be positive")

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def width(self) -> float:
        return self.width_periods * self.wavelength

    @property
    def t_off(self) -> float:
        return 5.0 * self.width

    def current(self, t: float) -> float:
        if t < 0 or t > self.t_off:
            return 0.0
        tc = 2.5 * self.width
        env = math.exp(-4 * math.log(2) * ((t - tc) / self.width) ** 2)
        return self.amplitude * env * math.sin(self.omega * (t - tc))


@dataclass
class YeeState:
    """Fields, update coefficients and clock of one simulation."""

    cell_size: float
    dt: float
    fields: dict
    split: dict
    coeff: dict
    h_profiles: tuple
    e_profiles: tuple
    plain_lo: np.ndarray
    plain_hi: np.ndarray
    h_plain_lo: np.ndarray
    h_plain_hi: np.ndarray
    interior_lo: np.ndarray
    interior_hi: np.ndarray
    periodic: tuple
    step_index: int = 0
    sources: list = field(default_factory=list)
    _src_cache: list = field(default_factory=list, repr=False)

    @property
    def shape(self) -> tuple:
        return self.fields["ex"].shape

    @property
    def time(self) -> float:
        """Time of the current E field."""
        return self.step_index * self.dt

    @property
    def courant(self) -> float:
        return self.dt / self.cell_size

    def interior_slices(self) -> tuple:
        return tuple(slice(int(a), int(b)) for a, b in zip(self.interior_lo, self.interior_hi))


def new_state(eps_x, eps_y, eps_z, cell_size, pml=None, pml_cells=0, periodic=(False, False, False),
              courant=COURANT_SAFETY):
    """Allocate a zero-field state for per-component relative permittivities.

    ``pml_cells`` may be an int or a per-axis triple; axes flagged periodic
    get no PML.
    """
    shape = np.shape(eps_x)
    if np.shape(eps_y) != shape or np.shape(eps_z) != shape:
        raise ConfigurationError("permittivity arrays must share one shape")
    if min(np.min(eps_x), np.min(eps_y), np.min(eps_z)) < 1.0:
        raise ConfigurationError("relative permittivity below 1")
    pml = pml or PmlSpec(thickness_cells=int(np.max(pml_cells)) if np.ndim(pml_cells) else int(pml_cells))
    cells = tuple(np.broadcast_to(pml_cells, 3).astype(int))
    cells = tuple(0 if periodic[ax] else cells[ax] for ax in range(3))
    dt = courant * cell_size / math.sqrt(3.0)
    ch = dt / cell_size

    e_prof, h_prof = [], []
    for ax in range(3):
        node, half = _profiles(shape[ax], cells[ax], pml, cell_size, dt, periodic[ax])
        e_prof += list(node)
        h_prof += list(half)

    plain_lo, plain_hi, h_lo, h_hi, in_lo, in_hi = [], [], [], [], [], []
    for ax in range(3):
        n, p = shape[ax], cells[ax]
        if p == 0:
            plain_lo.append(1); plain_hi.append(n)
            h_lo.append(0); h_hi.append(n - 1)
        else:
            plain_lo.append(p + 1); plain_hi.append(n - p - 1)
            h_lo.append(p + 1); h_hi.append(n - p - 1)
        in_lo.append(1 if periodic[ax] else p); in_hi.append(n - p)

    f32 = np.float32
    fields = {name: np.zeros(shape, f32) for name in ("ex", "ey", "ez", "hx", "hy", "hz")}
    any_pml = any(c > 0 for c in cells)
    split_shape = shape if any_pml else (1, 1, 1)
    split = {name: np.zeros(split_shape, f32) for name in ("exy", "eyz", "ezx", "hxy", "hyz", "hzx")}
    coeff = {
        "cex": (ch / np.asarray(eps_x, float)).astype(f32),
        "cey": (ch / np.asarray(eps_y, float)).astype(f32),
        "cez": (ch / np.asarray(eps_z, float)).astype(f32),
        "ch": f32(ch),
    }
    as_i = lambda v: np.array(v, dtype=np.int64)
    return YeeState(
        cell_size=cell_size, dt=dt, fields=fields, split=split, coeff=coeff,
        h_profiles=tuple(h_prof), e_profiles=tuple(e_prof),
        plain_lo=as_i(plain_lo), plain_hi=as_i(plain_hi),
        h_plain_lo=as_i(h_lo), h_plain_hi=as_i(h_hi),
        interior_lo=as_i(in_lo), interior_hi=as_i(in_hi),
        periodic=tuple(bool(p) for p in periodic),
    )


def component_positions(shape, cell_size, component):
    """Physical coordinates (x, y, z vectors) of a field component, grid centered.

    Cell centers sit at ``(i - (n - 1) / 2) * cell_size`` in x and y, and z
    nodes at ``(k - n / 2) * cell_size`` so that z = 0 is a node plane.
    """
    nx, ny, nz = shape
    xc = (np.arange(nx) - (nx - 1) / 2) * cell_size
    yc = (np.arange(ny) - (ny - 1) / 2) * cell_size
    zn = (np.arange(nz) - nz / 2) * cell_size
    xn, yn, zc = xc - cell_size / 2, yc - cell_size / 2, zn + cell_size / 2
    return {
        "ex": (xc, yn, zn), "ey": (xn, yc, zn), "ez": (xn, yn, zc),
        "hx": (xn, yc, zc), "hy": (xc, yn, zc), "hz": (xc, yc, zn),
    }[component]


def trilinear_stencil(shape, cell_size, component, point):
    """Indices and weights that interpolate ``component`` at ``point``."""
    axes = component_positions(shape, cell_size, component)
    idx, wts = [], []
    for coords, p in zip(axes, point):
        f = (p - coords[0]) / cell_size
        i0 = int(math.floor(f + 1e-9))
        t = f - i0
        if abs(t) < 1e-9:
            t = 0.0
        if i0 < 0 or i0 + 1 >= len(coords):
            raise ConfigurationError(f"point {point} lies outside the grid")
        idx.append((i0, i0 + 1))
        wts.append((1.0 - t, t))
    out = []
    for a in range(2):
        for b in range(2):
            for c in range(2):
                w = wts[0][a] * wts[1][b] * wts[2][c]
                if w > 0:
                    out.append(((idx[0][a], idx[1][b], idx[2][c]), w))
    return out


def add_source(state: YeeState, source: DipoleSource) -> None:
    comp = {"X": "ex", "Y": "ey", "Z": "ez"}[source.orientation]
    stencil = trilinear_stencil(state.shape, state.cell_size, comp, source.position)
    coef = state.coeff["c" + comp]
    entries = [(ijk, w * float(coef[ijk]) * state.cell_size) for ijk, w in stencil]
    state.sources.append(source)
    state._src_cache.append((comp, entries))


def _periodic_copy(state, kind):
    f = state.fields
    names = ("hx", "hy", "hz") if kind == "h" else ("ex", "ey", "ez")
    for ax, per in enumerate(state.periodic):
        if not per:
            continue
        for name in names:
            a = f[name]
            dst = [slice(None)] * 3
            src = [slice(None)] * 3
            if kind == "h":
                dst[ax], src[ax] = -1, 0
            else:
                dst[ax], src[ax] = 0, -1
            a[tuple(dst)] = a[tuple(src)]


_partial_cache: dict = {}


def _partial(n):
    buf = _partial_cache.get(n)
    if buf is None:
        buf = _partial_cache[n] = np.zeros(n)
    return buf


def step(state: YeeState, energy: bool = False):
    """Advance E and H by one time step.

    With ``energy=True`` returns the discrete electromagnetic energy of the
    interior region at the time of the E field entering the step,
    ``0.5 * sum(eps E^n . E^n + H^(n-1/2) . H^(n+1/2)) * dV``, which is
    exactly conserved by the leapfrog scheme in a closed lossless box.
    """
    f, s, c = state.fields, state.split, state.coeff
    nx = state.shape[0]
    partial = _partial(nx)
    u = None
    args_h = (f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"], s["hxy"], s["hyz"], s["hzx"], c["ch"],
              *state.h_profiles, state.h_plain_lo, state.h_plain_hi, state.interior_lo, state.interior_hi, partial)
    if energy:
        _kernels.electric_energy(f["ex"], f["ey"], f["ez"], c["cex"], c["cey"], c["cez"], float(c["ch"]),
                                 state.interior_lo, state.interior_hi, partial)
        ue = float(np.sum(partial))
        partial[:] = 0.0
        _kernels.update_h_energy(*args_h)
        uh = float(np.sum(partial))
        u = 0.5 * (ue + uh) * state.cell_size**3
    else:
        _kernels.update_h(*args_h)
    _periodic_copy(state, "h")
    _kernels.update_e(f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"], s["exy"], s["eyz"], s["ezx"],
                      c["cex"], c["cey"], c["cez"], *state.e_profiles, state.plain_lo, state.plain_hi)
    t_half = (state.step_index + 0.5) * state.dt
    for src, (comp, entries) in zip(state.sources, state._src_cache):
        j = src.current(t_half)
        if j != 0.0:
            arr = f[comp]
            for ijk, w in entries:
                arr[ijk] -= np.float32(w * j)
    _periodic_copy(state, "e")
    state.step_index += 1
    return u


def check_finite(state: YeeState) -> None:
    for name, arr in state.fields.items():
        if not np.isfinite(np.sum(arr, dtype=np.float64)):
            raise NumericalError(
                f"non-finite {name} at step {state.step_index}; the time step or PML "
                "conductivity is unstable for this grid"
            )


def sample(state: YeeState, stencil) -> float:
    """Interpolated field value from a ``(component, stencil)`` pair."""
    comp, entries = stencil
    arr = state.fields[comp]
    return float(sum(w * float(arr[ijk]) for ijk, w in entries))
