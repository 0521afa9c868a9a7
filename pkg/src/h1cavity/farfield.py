"""Far-field emission of a cavity mode from a near-field plane above the membrane.

The tangential E phasor recorded on a plane just above the slab is expanded in
plane waves (its 2D spatial Fourier transform).  Only the light cone
``|k_par| <= k`` radiates; for direction cosines ``(u, v) = k_par / k`` with
``cos(theta) = sqrt(1 - u^2 - v^2)`` the radiated power per unit solid angle is

    dP/dOmega = k^2 / (8 pi^2 Z) * (cos^2(theta) |Et|^2 + |u Ex + v Ey|^2)

with ``Et`` the transformed tangential field (the second term is the
longitudinal part fixed by transversality), ``Z`` the wave impedance.  Field
units are those of the solver (Z = 1).  Lengths may be in any unit as long as
coordinates and wavelength agree; powers then come out in field^2 x length^2
per unit of c-normalized time.

The transform is a direct (matrix) Fourier sum evaluated exactly at the
requested directions, so each staggered field component keeps its own sample
positions and no zero padding is involved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from h1cavity.errors import ConfigurationError, NormalizationError

log = logging.getLogger(__name__)

REFERENCE_APERTURES = (0.2, 0.5, 0.7)
#: field at the plane edge above this fraction of the maximum is flagged
EDGE_TOLERANCE = 0.01
#: slack allowed above the 50 % upward bound before flagging a normalization error
ETA_TOLERANCE = 0.05
N_THETA = 64
N_PHI = 128


@dataclass(frozen=True)
class Aperture:
    """Collection disc ``sin(theta) <= NA`` around the membrane normal."""

    numerical_aperture: float

    def __post_init__(self):
        if not 0.0 < self.numerical_aperture <= 1.0:
            raise ConfigurationError("numerical aperture must lie in (0, 1]")

    def indicator(self, u, v):
        return (np.asarray(u) ** 2 + np.asarray(v) ** 2 <= self.numerical_aperture**2).astype(float)

    @property
    def half_angle(self) -> float:
        return math.asin(self.numerical_aperture)


@dataclass
class FarFieldMap:
    """Plane-wave spectrum of one mode on a (u, v) = k_par / k grid.

    ``amplitude[c, i, j]`` is the transformed tangential component ``c``
    (0: x, 1: y) at ``(u[i], v[j])``; entries outside the light cone are zero.
    ``source`` keeps the near-field samples so that aperture integrals can be
    evaluated at arbitrary directions.
    """

    u: np.ndarray
    v: np.ndarray
    amplitude: np.ndarray
    wavelength: float
    polarization: str = ""
    source: dict = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    def _grid(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def angular_density(self) -> np.ndarray:
        """dP/dOmega on the grid (zero outside the light cone)."""
        uu, vv = self._grid()
        return _density(self.k, uu, vv, self.amplitude[0], self.amplitude[1])

    def spectrum_at(self, u, v):
        """Tangential spectrum (Ex, Ey) evaluated directly at directions ``(u, v)``."""
        if self.source is None:
            raise ConfigurationError("far-field map carries no near-field samples")
        u = np.asarray(u, float).ravel()
        v = np.asarray(v, float).ravel()
        return (_mft_points(self.source["ex"], self.k * u, self.k * v),
                _mft_points(self.source["ey"], self.k * u, self.k * v))

    def density_at(self, u, v):
        ex, ey = self.spectrum_at(u, v)
        return _density(self.k, np.ravel(u), np.ravel(v), ex, ey)


def _density(k, u, v, ex, ey):
    rho2 = u**2 + v**2
    cos2 = np.clip(1.0 - rho2, 0.0, None)
    d = k**2 / (8 * math.pi**2) * (cos2 * (np.abs(ex) ** 2 + np.abs(ey) ** 2) + np.abs(u * ex + v * ey) ** 2)
    return np.where(rho2 <= 1.0, d, 0.0)


def _mft_grid(comp, kx, ky):
    """Fourier sum of one staggered component on the kx x ky grid."""
    x, y, vals = comp
    dA = (x[1] - x[0]) * (y[1] - y[0])
    ax = np.exp(-1j * np.outer(kx, x))
    ay = np.exp(-1j * np.outer(ky, y))
    return ax @ vals @ ay.T * dA


def _mft_points(comp, kx, ky, chunk=4096):
    """Fourier sum of one staggered component at scattered (kx, ky) points."""
    x, y, vals = comp
    dA = (x[1] - x[0]) * (y[1] - y[0])
    out = np.empty(kx.size, complex)
    for s in range(0, kx.size, chunk):
        sl = slice(s, s + chunk)
        m = np.exp(-1j * np.outer(kx[sl], x)) @ vals
        out[sl] = np.sum(m * np.exp(-1j * np.outer(ky[sl], y)), axis=1) * dA
    return out


def edge_ratio(plane) -> float:
    """Largest |E| on the plane border relative to the largest |E| anywhere."""
    peak, edge = 0.0, 0.0
    for _, _, vals in plane.components.values():
        a = np.abs(vals)
        peak = max(peak, float(a.max()))
        edge = max(edge, float(a[0].max()), float(a[-1].max()), float(a[:, 0].max()), float(a[:, -1].max()))
    return edge / peak if peak > 0 else 0.0


def near_to_far(plane, wavelength, n_points=241, length_unit=1.0, polarization="",
                strict=False) -> FarFieldMap:
    """Transform a near-field plane (``PlaneField``) into its far-field map.

    ``length_unit`` rescales the plane coordinates and ``wavelength`` before
    the transform (pass the lattice constant to work in solver units, which
    makes powers comparable with the solver's stored energy).  When the field
    has not decayed below 1 % of its maximum at the plane border the
    truncation biases the spectrum; this is logged, or raised in ``strict``
    mode.
    """
    if n_points < 3:
        raise ConfigurationError("n_points must be >= 3")
    ratio = edge_ratio(plane)
    if ratio > EDGE_TOLERANCE:
        msg = f"near field at the plane border is {ratio:.2%} of its maximum; enlarge the plane"
        if strict:
            raise NormalizationError(msg)
        log.warning(msg)
    lam = wavelength / length_unit
    k = 2 * math.pi / lam
    source = {name: (x / length_unit, y / length_unit, np.asarray(vals, complex))
              for name, (x, y, vals) in plane.components.items()}
    # cell-centered direction grid: no sample sits exactly on the rim of the cone
    step = 2.0 / n_points
    u = -1.0 + (np.arange(n_points) + 0.5) * step
    amp = np.stack([_mft_grid(source["ex"], k * u, k * u), _mft_grid(source["ey"], k * u, k * u)])
    uu, vv = np.meshgrid(u, u, indexing="ij")
    amp[:, uu**2 + vv**2 > 1.0] = 0.0
    return FarFieldMap(u=u, v=u.copy(), amplitude=amp, wavelength=lam, polarization=polarization,
                       source=source, meta={"edge_ratio": ratio})


def radiation_pattern(ffmap: FarFieldMap) -> np.ndarray:
    """Angular power density on the (u, v) grid normalized to a maximum of 1."""
    d = ffmap.angular_density()
    peak = d.max()
    if not peak > 0:
        raise NormalizationError("far-field map carries no radiated power")
    return d / peak


def pixel_aperture_weights(u, v, aperture: Aperture, supersample=8) -> np.ndarray:
    """Area fraction of each (u, v) pixel inside the aperture disc."""
    du, dv = u[1] - u[0], v[1] - v[0]
    s = (np.arange(supersample) + 0.5) / supersample - 0.5
    uu = u[:, None] + s[None, :] * du
    vv = v[:, None] + s[None, :] * dv
    inside = uu[:, None, :, None] ** 2 + vv[None, :, None, :] ** 2 <= aperture.numerical_aperture**2
    return inside.mean(axis=(2, 3))


def cone_nodes(max_angle, n_theta=N_THETA, n_phi=N_PHI):
    """Direction cosines and solid-angle weights for the cone ``theta <= max_angle``.

    Gauss-Legendre in theta, uniform (spectrally accurate, periodic) in phi.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * max_angle * (x + 1)
    wt = 0.5 * max_angle * w * np.sin(theta)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.repeat(wt[:, None], n_phi, axis=1) * (2 * math.pi / n_phi)
    return (np.sin(tt) * np.cos(pp)).ravel(), (np.sin(tt) * np.sin(pp)).ravel(), weights.ravel()


def cone_power(ffmap: FarFieldMap, aperture: Aperture, n_theta=N_THETA, n_phi=N_PHI) -> float:
    """Upward power radiated into the aperture cone."""
    u, v, w = cone_nodes(aperture.half_angle, n_theta, n_phi)
    return float(np.sum(w * ffmap.density_at(u, v)))


def upward_power(ffmap: FarFieldMap, **kw) -> float:
    return cone_power(ffmap, Aperture(1.0), **kw)


def collection_efficiency(ffmap: FarFieldMap, aperture: Aperture, reference_power,
                          tolerance=ETA_TOLERANCE, **kw) -> float:
    """Fraction of the total emitted power collected above the membrane within the NA.

    ``reference_power`` (all emission, both half spaces) must be in the power
    units of ``ffmap``.  A symmetric membrane sends half its emission downward,
    so values above ``0.5 + tolerance`` indicate inconsistent normalization.
    """
    if not reference_power > 0:
        raise NormalizationError("reference power must be positive")
    eta = cone_power(ffmap, aperture, **kw) / reference_power
    if eta > 0.5 + tolerance:
        raise NormalizationError(
            f"collection efficiency {eta:.3f} exceeds the 50 % upward bound; "
            "near-field and reference power normalizations disagree"
        )
    return eta


def overlap_from_profiles(phi_h, phi_v, weights) -> float:
    """``K = (sum w sqrt(phi_h phi_v))^2 / (sum w phi_h * sum w phi_v)``."""
    phi_h = np.asarray(phi_h, float)
    phi_v = np.asarray(phi_v, float)
    w = np.asarray(weights, float)
    if np.any(phi_h < 0) or np.any(phi_v < 0):
        raise ConfigurationError("overlap profiles must be non-negative")
    eh = float(np.sum(w * phi_h))
    ev = float(np.sum(w * phi_v))
    if not (eh > 0 and ev > 0):
        raise NormalizationError("a far-field profile vanishes on the aperture; overlap undefined")
    k = float(np.sum(w * np.sqrt(phi_h * phi_v)))
    return min(k * k / (eh * ev), 1.0)


def overlap_K(map_h: FarFieldMap, map_v: FarFieldMap, aperture: Aperture, convention="intensity",
              n_theta=N_THETA, n_phi=N_PHI) -> float:
    """Far-field overlap of two polarization modes over the aperture.

    With ``convention="intensity"`` each profile is the mode's angular power
    density, so identical modes give K = 1.  ``convention="amplitude"`` uses
    its square root instead (the alternative reading of the overlap
    integrals, kept for sensitivity checks).
    """
    if not math.isclose(map_h.wavelength, map_v.wavelength, rel_tol=1e-2):
        log.warning("overlap of maps at different wavelengths (%.4g, %.4g)", map_h.wavelength, map_v.wavelength)
    u, v, w = cone_nodes(aperture.half_angle, n_theta, n_phi)
    ph, pv = map_h.density_at(u, v), map_v.density_at(u, v)
    if convention == "amplitude":
        ph, pv = np.sqrt(ph), np.sqrt(pv)
    elif convention != "intensity":
        raise ConfigurationError("convention must be 'intensity' or 'amplitude'")
    return overlap_from_profiles(ph, pv, w)
