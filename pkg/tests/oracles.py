"""Independent reference computations shared by the unit and acceptance tests."""

from __future__ import annotations

import math

import numpy as np

from scipy import integrate

from h1cavity.fdtd import new_state, step
from h1cavity.fdtd.ringdown import PlaneField
from h1cavity.fdtd.solver import component_positions

# quasi one-dimensional column: periodic in x and y, open or closed in z
COLUMN = 4


def gaussian_pulse_state(nz, width, z0, pml_cells=0, eps=1.0):
    """Column grid carrying a +z travelling Gaussian pulse ``Ex = Hy = g(z - t)``."""
    shape = (COLUMN, COLUMN, nz)
    e = np.full(shape, float(eps))
    st = new_state(e, e, e, 1.0, pml_cells=(0, 0, pml_cells), periodic=(True, True, False))
    _, _, zn = component_positions(shape, 1.0, "ex")
    _, _, zc = component_positions(shape, 1.0, "hy")
    v = 1.0 / math.sqrt(eps)
    g = lambda z: np.exp(-(((z - z0) / width) ** 2))
    st.fields["ex"][:] = g(zn)[None, None, :]
    # H lags E by half a step
    st.fields["hy"][:] = (g(zc + v * st.dt / 2) / (1.0 / v))[None, None, :]
    st.fields["ex"][:, :, :1] = 0.0
    st.fields["ex"][:, :, -1:] = 0.0
    return st, zn


def peak_position(z, profile):
    """Sub-cell peak location by a parabola through the three largest samples."""
    i = int(np.argmax(profile))
    y0, y1, y2 = profile[i - 1], profile[i], profile[i + 1]
    return z[i] + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)


def plane_wave_speed(distance=100.0, width=8.0):
    """Measured propagation speed over ``distance`` cells (c = 1)."""
    nz = int(distance + 12 * width)
    z0 = -nz / 2 + 5 * width
    st, zn = gaussian_pulse_state(nz, width, z0)
    start = peak_position(zn, st.fields["ex"][0, 0].astype(float))
    n = int(round(distance / st.dt))
    for _ in range(n):
        step(st)
    end = peak_position(zn, st.fields["ex"][0, 0].astype(float))
    return (end - start) / (n * st.dt)


def closed_box_energy_drift(n_steps=1000, seed=0):
    """Largest relative change of the discrete energy in a PEC box with a random medium."""
    rng = np.random.default_rng(seed)
    shape = (14, 13, 12)
    eps = [rng.uniform(1.0, 12.0, shape) for _ in range(3)]
    st = new_state(*eps, 1.0, pml_cells=0)
    c = tuple(n // 2 for n in shape)
    # a single excited cell
    for name in ("ex", "ey", "ez"):
        st.fields[name][c] = rng.normal()
    step(st)
    energies = [step(st, energy=True) for _ in range(n_steps)]
    u0 = energies[0]
    return max(abs(u - u0) for u in energies) / u0


def pml_reflection(pml_cells=12, width=6.0, gap=40):
    """Peak reflected amplitude over peak incident amplitude at normal incidence.

    A pulse travels toward the PML of a column; a reference run in a column
    whose far end lies out of reach supplies the reflection-free signal,
    which is subtracted at a probe between the launch point and the PML.
    """
    lead = 6 * width + 2  # launch point measured from the lower edge
    nz = int(pml_cells + lead + gap + pml_cells)
    # time for the pulse to reach the PML, cross it twice and come back to the launch point
    n = int((2 * (gap + pml_cells) + 6 * width) / 0.5)

    def run(length):
        z0 = -length / 2 + lead
        st, zn = gaussian_pulse_state(length, width, z0, pml_cells=pml_cells)
        probe = int(np.argmin(np.abs(zn - (z0 + 3 * width))))
        out = np.empty(n)
        for i in range(n):
            step(st)
            out[i] = st.fields["ex"][0, 0, probe]
        return out

    short = run(nz)
    ref = run(nz + int(n * 0.6) + 20)
    return float(np.max(np.abs(short - ref)) / np.max(np.abs(ref)))


def gaussian_plane(w, n=96, extent=None, shift=(0.0, 0.0), ellipticity=1.0, pol="x"):
    extent = extent or 4 * w
    x = (np.arange(n) - (n - 1) / 2) * (2 * extent / n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    f = np.exp(-(((xx - shift[0]) / w) ** 2 + ((yy - shift[1]) / (w * ellipticity)) ** 2)).astype(complex)
    zero = np.zeros_like(f)
    comps = {"ex": (x, x, f if pol == "x" else zero), "ey": (x, x, zero if pol == "x" else f)}
    return PlaneField(0.0, comps)


def gaussian_profiles(sigma):
    return (lambda u, v: np.exp(-(u**2 + v**2) / sigma**2),
            lambda u, v: np.exp(-(u**2 + v**2) / (2 * sigma) ** 2))


def dblquad_K(fh, fv, max_angle):
    def over(f):
        g = lambda phi, th: f(math.sin(th) * math.cos(phi), math.sin(th) * math.sin(phi)) * math.sin(th)
        return integrate.dblquad(g, 0, max_angle, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-12)[0]

    k = over(lambda u, v: math.sqrt(fh(u, v) * fv(u, v)))
    return k * k / (over(fh) * over(fv))
