"""Pulsed excitation, free ring-down and mode capture for one cavity design.

The solver runs in units of the lattice constant (c = 1); everything that
leaves this module is converted back to SI (meters, seconds).  Energies stay
in the solver's arbitrary units, and powers are those units per second.

Mode fields are returned as complex phasors ``F`` at the capture time ``t0``
with the convention ``E(t) = Re[F exp(-i w (t - t0))] exp(-gamma (t - t0))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from h1cavity.constants import C0
from h1cavity.errors import ConfigurationError, MultiModeError, ProbeNodeError
from h1cavity.fdtd.solver import (
    DipoleSource,
    PmlSpec,
    add_source,
    check_finite,
    component_positions,
    new_state,
    step,
    trilinear_stencil,
)
from h1cavity.geometry import CavityDesign, DielectricMap, grid_layout, permittivity_on, rasterize
from h1cavity.mode_analysis import DecayFit, MidplaneField, fit_decay, mode_volume, predicted_wavelength

log = logging.getLogger(__name__)

#: probe offset from the cavity center, lattice constants
PROBE_OFFSET = (0.2, 0.1, 0.0)
FREE_CYCLES = 300
EXTENSION_CYCLES = 100
MAX_EXTENSIONS = 3
#: cycles after the source stops before the mode is captured and the fit starts
GUARD_CYCLES = 20
#: the fit window ends where the probe envelope has fallen to this fraction
FIT_FLOOR = 1e-2
#: probe amplitude relative to the field maximum below which it sits on a node
PROBE_FLOOR = 1e-4
REFERENCE_LATTICE = 270e-9


@dataclass(frozen=True)
class Monitor:
    """What a ring-down records, and how often.

    ``kind`` is ``"point-probe"``, ``"plane-recorder"`` or ``"volume-energy"``;
    ``every`` is a cadence in time steps (0 picks a quarter period for the
    energy monitor and every step for the probe).  Monitors only read fields.
    """

    kind: str
    every: int = 0
    point: tuple = PROBE_OFFSET

    def __post_init__(self):
        if self.kind not in ("point-probe", "plane-recorder", "volume-energy"):
            raise ConfigurationError(f"unknown monitor kind {self.kind!r}")
        if self.every < 0:
            raise ConfigurationError("monitor cadence must be >= 0")


@dataclass
class PlaneField:
    """Complex tangential E phasors on a horizontal plane (SI coordinates).

    ``components`` maps ``"ex"`` / ``"ey"`` to ``(x, y, values)`` with
    ``values[i, j]`` at ``(x[i], y[j])``; the two components live on their own
    staggered sub-grids.
    """

    z: float
    components: dict

    def scaled(self, factor) -> "PlaneField":
        return PlaneField(self.z, {k: (x, y, v * factor) for k, (x, y, v) in self.components.items()})


@dataclass
class RingdownResult:
    """Everything a ring-down produces that later stages consume."""

    orientation: str
    design: CavityDesign
    resolution: int
    omega: float
    gamma: float
    fit: DecayFit
    probe_time: np.ndarray
    probe_value: np.ndarray
    energy_time: np.ndarray
    energy_value: np.ndarray
    energy_t0: float
    flux_power: float
    mode_volume: float
    plane: PlaneField
    midplane: MidplaneField
    source_off: float
    capture_time: float
    extensions: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def wavelength(self) -> float:
        return 2 * math.pi * C0 / self.omega

    @property
    def quality_factor(self) -> float:
        return self.omega / (2 * self.gamma)

    @property
    def emitted_power(self) -> float:
        return 2.0 * self.gamma * self.energy_t0


def source_wavelength(design: CavityDesign) -> float:
    """Seed carrier wavelength (m) from the empirical resonance fit.

    The fit holds for a = 270 nm; other lattice constants are handled by
    scaling the structure homothetically.
    """
    s = design.lattice_constant / REFERENCE_LATTICE
    return s * predicted_wavelength(design.inner_hole_shift, design.membrane_thickness / s)


def component_permittivities(design: CavityDesign, resolution: int, smoothing="anisotropic"):
    """Cube-averaged permittivity at the Ex, Ey and Ez positions of the grid.

    ``smoothing="anisotropic"`` uses the interface-aware average of each
    component, ``"arithmetic"`` the plain volume average.
    """
    if smoothing not in ("anisotropic", "arithmetic"):
        raise ConfigurationError("smoothing must be 'anisotropic' or 'arithmetic'")
    layout = grid_layout(design, resolution)
    dx = layout.cell_size
    out = []
    for comp in ("ex", "ey", "ez"):
        x, y, z = component_positions(layout.shape, dx, comp)
        out.append(permittivity_on(design, x, y, z, dx, None if smoothing == "arithmetic" else comp[1]))
    return layout, out


def record_plane_complex(first, second, gamma, omega, tau=None):
    """Complex phasor from two real snapshots ``tau`` apart.

    The field is ``Re(F exp(-(gamma + i omega) (t - t0)))`` with the first
    snapshot taken at ``t0``; ``tau`` defaults to a quarter period, where
    ``F = E(t0) + i E(t0 + T/4) exp(gamma T / 4)``.  ``tau`` must not be a
    multiple of half a period.  ``gamma``, ``omega`` and ``tau`` share a time
    unit.
    """
    if tau is None:
        tau = 0.5 * math.pi / omega
    s = math.sin(omega * tau)
    if abs(s) < 1e-3:
        raise ConfigurationError("snapshot spacing is too close to a multiple of half a period")
    first = np.asarray(first)
    imag = (np.asarray(second) * math.exp(gamma * tau) - first * math.cos(omega * tau)) / s
    return first + 1j * imag


def _fit_stop(t, y, t_start, period, floor):
    """Index where the per-cycle envelope of ``y`` first drops below ``floor``
    times its value in the first cycle after ``t_start`` (end of series if never)."""
    k0 = int(np.searchsorted(t, t_start))
    n_cycle = max(2, int(np.searchsorted(t, t[k0] + period)) - k0)
    m = (t.size - k0) // n_cycle
    if m < 2:
        return t.size
    env = np.abs(y[k0:k0 + m * n_cycle]).reshape(m, n_cycle).max(axis=1)
    below = np.nonzero(env < floor * env[0])[0]
    return t.size if below.size == 0 else k0 + int(below[0]) * n_cycle


def _centered(a, axes):
    """Average a staggered array onto cell centers along ``axes`` (zero padded)."""
    out = a
    for ax in axes:
        pad = [(0, 0)] * 3
        pad[ax] = (0, 1)
        p = np.pad(out, pad)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out = 0.5 * (p[tuple(lo)] + p[tuple(hi)])
    return out


def _trapezoid(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def poynting_power(E, H, box, cell_size):
    """Cycle-averaged power leaving ``box`` from complex E, H phasors.

    ``E`` and ``H`` are (x, y, z) component triples on the Yee grid and
    ``box`` holds node-index bounds ``((i0, i1), (j0, j1), (k0, k1))``.  Each
    face lies on a node plane, where a tangential E component and the
    neighbour-averaged H component it pairs with share sample points (both
    are cell-centered along the E component's own axis).  Integrals use the
    midpoint rule along cell-centered directions and the trapezoid rule along
    node directions.
    """
    dA = cell_size**2
    total = 0.0
    for ax in range(3):
        b, c = (ax + 1) % 3, (ax + 2) % 3
        # S_ax = E_b H_c - E_c H_b
        for sign, plane in ((-1.0, box[ax][0]), (1.0, box[ax][1])):
            for e_comp, h_comp, pm in ((b, c, 1.0), (c, b, -1.0)):
                sl_e, sl_h, w = [None] * 3, [None] * 3, []
                sl_e[ax] = plane
                sl_h[ax] = slice(plane - 1, plane + 1)
                for t in sorted((b, c)):
                    lo, hi = box[t]
                    if t == e_comp:
                        sl_e[t] = sl_h[t] = slice(lo, hi)
                        w.append(np.ones(hi - lo))
                    else:
                        sl_e[t] = sl_h[t] = slice(lo, hi + 1)
                        w.append(_trapezoid(hi - lo + 1))
                e = E[e_comp][tuple(sl_e)]
                h = H[h_comp][tuple(sl_h)].mean(axis=ax)
                s = np.sum(np.outer(w[0], w[1]) * e * np.conj(h))
                total += sign * pm * 0.5 * float(np.real(s)) * dA
    return total


def run_ringdown(design: CavityDesign, resolution: int, orientation: str = "X", *,
                 free_cycles: int = FREE_CYCLES, extension_cycles: int = EXTENSION_CYCLES,
                 max_extensions: int = MAX_EXTENSIONS, probe_offset=PROBE_OFFSET,
                 guard_cycles: float = GUARD_CYCLES,
                 fit_floor: float = FIT_FLOOR, pml: PmlSpec | None = None,
                 nan_check_every: int = 500, smoothing: str = "anisotropic") -> RingdownResult:
    """Excite one dipole mode, let it ring down and capture its fields.

    A Gaussian dipole pulse at the cavity center (10-cycle envelope, carrier
    from :func:`source_wavelength`) excites the cavity; the fields then evolve
    freely for ``free_cycles`` optical cycles.  The probe signal is fitted
    from ``guard_cycles`` after the source stops until its envelope has
    fallen to ``fit_floor`` of the starting value (or the end of the run),
    so that a fast-decaying mode is not fitted in the round-off noise.  When
    the fit is not single-mode the free evolution is extended by
    ``extension_cycles`` up to ``max_extensions`` times.  The mode energy and
    the phasors, from two field snapshots about a quarter period apart, are
    taken at the start of the fit window and demodulated with the fitted
    frequency and decay rate.
    """
    if orientation not in ("X", "Y"):
        raise ConfigurationError("orientation must be 'X' or 'Y'")
    if free_cycles < 1:
        raise ConfigurationError("free_cycles must be >= 1")
    a = design.lattice_constant
    to_seconds = a / C0
    layout, (eps_x, eps_y, eps_z) = component_permittivities(design, resolution, smoothing)
    dx = 1.0 / resolution
    pml = pml or PmlSpec(thickness_cells=design.pml_cells)
    state = new_state(eps_x, eps_y, eps_z, dx, pml=pml, pml_cells=design.pml_cells)
    del eps_x, eps_y, eps_z

    lam = source_wavelength(design) / a
    src = DipoleSource(wavelength=lam, orientation=orientation)
    add_source(state, src)
    comp = "ex" if orientation == "X" else "ey"
    probe = (comp, trilinear_stencil(state.shape, dx, comp, probe_offset))
    period_steps = lam / state.dt
    energy_every = max(1, int(round(period_steps / 4)))
    log.info("ringdown %s: grid %s, dt=%.4g a/c, %.1f steps per cycle",
             orientation, state.shape, state.dt, period_steps)

    probe_t, probe_v, energy_t, energy_v = [], [], [], []
    arr = state.fields[comp]
    entries = probe[1]

    def advance(n_steps, first_energy=False):
        """Step and record; returns the energy entering the first step if asked."""
        u_first = None
        for i in range(n_steps):
            if (first_energy and i == 0) or state.step_index % energy_every == 0:
                energy_t.append(state.time)
                energy_v.append(step(state, energy=True))
                if i == 0:
                    u_first = energy_v[-1]
            else:
                step(state)
            probe_t.append(state.time)
            probe_v.append(sum(w * float(arr[ijk]) for ijk, w in entries))
            if state.step_index % nan_check_every == 0:
                check_finite(state)
        return u_first

    n_off = int(math.ceil(src.t_off / state.dt))
    advance(n_off)
    n_free = int(math.ceil(free_cycles * period_steps))
    # late in a low-Q ring-down the mode sinks below round-off and leftover
    # non-resonant fields, so it is captured early
    n_q = max(1, int(round(period_steps / 4)))
    n_cap = min(int(round(guard_cycles * period_steps)), max(0, n_free - n_q))
    advance(n_cap)
    f = state.fields
    t0 = state.time
    e0 = [f[n].copy() for n in ("ex", "ey", "ez")]
    h0 = [f[n].copy() for n in ("hx", "hy", "hz")]
    field_peak = float(np.max(np.abs(arr)))
    # about a quarter of the carrier period; the exact spacing enters the demodulation
    u0 = advance(n_q, first_energy=True)
    eq = [f[n].copy() for n in ("ex", "ey", "ez")]
    hq = [f[n].copy() for n in ("hx", "hy", "hz")]
    advance(max(0, n_free - n_cap - n_q))

    extensions = 0
    while True:
        check_finite(state)
        t = np.asarray(probe_t)
        y = np.asarray(probe_v)
        t_start = t0
        head = np.abs(y[(t >= t0) & (t <= t0 + 2 * lam)])
        if field_peak == 0 or head.max() < PROBE_FLOOR * field_peak:
            raise ProbeNodeError(
                f"probe at {tuple(probe_offset)} a sits on a node of the {orientation} mode "
                f"(amplitude {head.max():.3g} vs field maximum {field_peak:.3g}); move the probe"
            )
        try:
            stop = _fit_stop(t, y, t_start, lam, fit_floor)
            fit = fit_decay(t[:stop], y[:stop], t_start=t_start)
            break
        except MultiModeError:
            if extensions >= max_extensions:
                raise
            extensions += 1
            log.info("ringdown %s: fit not single-mode, extending by %d cycles", orientation, extension_cycles)
            advance(int(math.ceil(extension_cycles * period_steps)))

    omega_n, gamma_n = fit.omega, fit.gamma
    tau = n_q * state.dt

    E = [record_plane_complex(a0, aq, gamma_n, omega_n, tau) for a0, aq in zip(e0, eq)]
    del e0, eq
    h_fix = np.exp(-(1j * omega_n + gamma_n) * state.dt / 2)
    H = [record_plane_complex(a0, aq, gamma_n, omega_n, tau) * h_fix for a0, aq in zip(h0, hq)]
    del h0, hq

    nx, ny, nz = state.shape
    p = design.pml_cells
    margin = p + 3
    box = ((margin, nx - margin), (margin, ny - margin), (margin, nz - margin))
    flux_n = poynting_power(E, H, box, dx)
    del H

    interior = state.interior_slices()
    intensity = (np.abs(_centered(E[0], (1, 2))) ** 2 + np.abs(_centered(E[1], (0, 2))) ** 2
                 + np.abs(_centered(E[2], (0, 1))) ** 2)
    eps_c = rasterize(design, resolution).permittivity
    dmap = DielectricMap(eps_c[interior], a / resolution, (0.0, 0.0, 0.0))
    lam_si = 2 * math.pi * a / omega_n
    volume = mode_volume(intensity[interior], dmap, wavelength=lam_si, index=design.slab_index)
    del intensity, eps_c

    # plane P: first node plane at least one cell above the membrane top
    kc = nz // 2
    k_plane = kc + int(math.ceil((design.membrane_thickness / 2) / (a / resolution) - 1e-9)) + 1
    sx, sy = interior[0], interior[1]
    components = {}
    for name, idx in (("ex", 0), ("ey", 1)):
        xs, ys, zs = component_positions(state.shape, dx, name)
        components[name] = (xs[sx] * a, ys[sy] * a, E[idx][sx, sy, k_plane].copy())
    plane = PlaneField(z=float(zs[k_plane] * a), components=components)
    xs, ys, _ = component_positions(state.shape, dx, comp)
    ci = 0 if orientation == "X" else 1
    midplane = MidplaneField(x=xs[sx] * a, y=ys[sy] * a, values=E[ci][sx, sy, kc].copy())

    log.info("ringdown %s: lambda=%.4g nm Q=%.4g V=%.3g", orientation,
             lam_si * 1e9, omega_n / (2 * gamma_n), volume)
    return RingdownResult(
        orientation=orientation, design=design, resolution=resolution,
        omega=omega_n / to_seconds, gamma=gamma_n / to_seconds, fit=fit,
        probe_time=np.asarray(probe_t) * to_seconds, probe_value=np.asarray(probe_v),
        energy_time=np.asarray(energy_t) * to_seconds, energy_value=np.asarray(energy_v),
        energy_t0=float(u0), flux_power=flux_n / to_seconds, mode_volume=volume,
        plane=plane, midplane=midplane, source_off=src.t_off * to_seconds,
        capture_time=t0 * to_seconds, extensions=extensions,
        meta={"grid": list(state.shape), "dt_seconds": state.dt * to_seconds,
              "k_plane": k_plane, "flux_box": [list(b) for b in box]},
    )
