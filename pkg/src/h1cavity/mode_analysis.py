"""Resonance extraction and figures of merit of a single cavity mode.

Conventions: ``gamma`` is the *field* decay rate, so stored energy decays at
``2 * gamma`` and ``Q = omega / (2 * gamma)``.  Mode volumes are expressed in
units of ``(wavelength / n)**3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import least_squares

from h1cavity.constants import C0
from h1cavity.errors import ConfigurationError, MultiModeError, OutOfRangeError

MAX_RESIDUAL = 0.05


@dataclass(frozen=True)
class DecayFit:
    omega: float
    gamma: float
    residual: float
    amplitude: float
    phase: float

    @property
    def quality_factor(self) -> float:
        return self.omega / (2 * self.gamma) if self.gamma > 0 else math.inf


@dataclass(frozen=True)
class ModeCharacterization:
    polarization: str
    resonant_wavelength: float
    field_decay_rate: float
    quality_factor: float
    mode_volume: float
    purcell_max: float

    def __post_init__(self):
        if self.polarization not in ("X", "Y"):
            raise ConfigurationError("polarization must be 'X' or 'Y'")
        if not (self.mode_volume > 0 and self.purcell_max > 0):
            raise ConfigurationError("mode volume and Purcell factor must be positive")

    def as_row(self) -> dict:
        p = self.polarization
        return {
            f"lambda_{p}_m": self.resonant_wavelength,
            f"gamma_{p}_per_s": self.field_decay_rate,
            f"Q_{p}": self.quality_factor,
            f"V_{p}": self.mode_volume,
            f"Fp_{p}": self.purcell_max,
        }


def _extrema(y):
    """Parabolically refined positions (in samples) and values of local extrema."""
    d = np.diff(y)
    idx = np.nonzero(d[:-1] * d[1:] < 0)[0] + 1
    ym, y0, yp = y[idx - 1], y[idx], y[idx + 1]
    den = ym - 2 * y0 + yp
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(den != 0, 0.5 * (ym - yp) / den, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    return idx + delta, y0 - 0.25 * (ym - yp) * delta


def fit_decay(t, y, t_start=None, max_residual=MAX_RESIDUAL) -> DecayFit:
    """Fit ``A exp(-gamma t) cos(omega t + phi)`` to a ring-down series.

    A first estimate comes from the extrema of the signal (their spacing gives
    the half period, a straight-line fit of log |extremum| the decay rate); a
    least-squares fit over the whole window then refines it.  ``residual`` is
    the RMS misfit relative to the RMS signal.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t_start is not None:
        keep = t >= t_start
        t, y = t[keep], y[keep]
    if y.size < 16 or not np.any(y):
        raise MultiModeError("ring-down window is empty or identically zero")
    dt = (t[-1] - t[0]) / (t.size - 1)
    pos, val = _extrema(y)
    keep = np.abs(val) > 0
    pos, val = pos[keep], val[keep]
    if pos.size < 6:
        raise MultiModeError("too few oscillations in the ring-down window")
    t_ext = t[0] + pos * dt
    # consecutive extrema alternate in sign and are half a period apart
    half_period = np.polyfit(np.arange(pos.size), t_ext, 1)[0]
    omega0 = math.pi / half_period
    gamma0 = -np.polyfit(t_ext - t[0], np.log(np.abs(val)), 1)[0]

    # work in units of the period to keep the problem well conditioned
    scale = 2 * math.pi / omega0
    tau = (t - t[0]) / scale
    w0, g0 = omega0 * scale, gamma0 * scale
    env = np.exp(-g0 * tau)
    basis = np.column_stack([env * np.cos(w0 * tau), env * np.sin(w0 * tau)])
    (ca, cb), *_ = np.linalg.lstsq(basis, y, rcond=None)
    norm = float(np.sqrt(np.mean(y**2)))

    def model(p):
        w, g, a, b = p
        e = np.exp(-g * tau)
        return e * (a * np.cos(w * tau) + b * np.sin(w * tau))

    fit = least_squares(lambda p: model(p) - y / norm, [w0, g0, ca / norm, cb / norm],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    w, g, a, b = fit.x
    resid = float(np.sqrt(np.mean((model(fit.x) - y / norm) ** 2)))
    if not resid <= max_residual:
        raise MultiModeError(
            f"ring-down is not a single damped sinusoid (residual {resid:.3g} > {max_residual}); "
            "extend the free evolution"
        )
    # amplitude and phase refer to the start of the window
    return DecayFit(omega=w / scale, gamma=g / scale, residual=resid,
                    amplitude=math.hypot(a, b) * norm, phase=math.atan2(-b, a))


def mode_volume(intensity, dielectric, wavelength=None, index=None) -> float:
    """Effective volume ``sum(eps |E|^2) dV / max(eps |E|^2)``.

    ``intensity`` is |E|^2 on the cell centers of ``dielectric`` (a
    DielectricMap).  Returned in m^3, or in ``(wavelength / index)**3`` when a
    wavelength is given (``index`` defaults to the largest index on the map).
    """
    eps = dielectric.permittivity
    intensity = np.asarray(intensity, float)
    if intensity.shape != eps.shape:
        raise ConfigurationError("intensity and permittivity grids differ in shape")
    density = eps * intensity
    peak = float(density.max())
    if peak <= 0:
        raise ConfigurationError("mode field is identically zero")
    volume = float(density.sum()) / peak * dielectric.cell_size**3
    if wavelength is None:
        return volume
    n = index if index is not None else math.sqrt(float(eps.max()))
    return volume / (wavelength / n) ** 3


def purcell_max(quality_factor, volume) -> float:
    """Purcell factor of an ideally placed, resonant, aligned dipole.

    ``volume`` in cubic material wavelengths (wavelength / n)**3.
    """
    return 3.0 / (4.0 * math.pi**2) * quality_factor / volume


def predicted_wavelength(shift, thickness) -> float:
    """Empirical resonance of the H1 dipole modes (meters) for a = 270 nm.

    ``shift`` in lattice constants, ``thickness`` in meters; linear in both
    and good to about 4 nm across the studied range.
    """
    return (0.28 * shift + 0.69 * (thickness / 1e-6) + 0.82) * 1e-6


def emitted_power(gamma, energy) -> float:
    """Total radiated power of a ring-down mode storing ``energy``."""
    return 2.0 * gamma * energy


def quality_factor(omega, gamma) -> float:
    return omega / (2.0 * gamma)


def wavelength_from_omega(omega) -> float:
    return 2 * math.pi * C0 / omega


@dataclass(frozen=True)
class MidplaneField:
    """Complex dipole-aligned field component on the membrane mid-plane.

    ``values[i, j]`` is sampled at ``(x[i], y[j])`` (meters, cavity center at
    the origin).
    """

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def intensity_at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        lo = np.array([self.x[0], self.y[0]])
        hi = np.array([self.x[-1], self.y[-1]])
        if np.any(pts < lo - 1e-15) or np.any(pts > hi + 1e-15):
            raise OutOfRangeError("dot offset lies outside the recorded field region")
        interp = RegularGridInterpolator((self.x, self.y), np.abs(self.values) ** 2)
        return interp(pts)


def beta_factors(mode_x: MidplaneField, mode_y: MidplaneField, offset, convention="intensity"):
    """Relative coupling of an X and a Y dipole displaced by ``offset`` from the center.

    ``offset`` is a distance along X (meters) or an (x, y) pair.  Each factor
    is the squared mode amplitude at the dot normalized to its value at the
    center (``convention="intensity"``), or its square root
    (``convention="amplitude"``).  Both are 1 for a centered dot.
    """
    off = np.atleast_1d(np.asarray(offset, float))
    point = np.array([off[0], 0.0]) if off.size == 1 else off[:2]
    origin = np.zeros(2)
    bx = float(mode_x.intensity_at(point)[0] / mode_x.intensity_at(origin)[0])
    by = float(mode_y.intensity_at(point)[0] / mode_y.intensity_at(origin)[0])
    if convention == "amplitude":
        return math.sqrt(bx), math.sqrt(by)
    if convention != "intensity":
        raise ConfigurationError("convention must be 'intensity' or 'amplitude'")
    return bx, by
