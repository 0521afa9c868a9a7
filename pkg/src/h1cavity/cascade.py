"""Polarization state of biexciton-cascade photon pairs and its Bell parameter.

Basis order everywhere is ``[H1H2, H1V2, V1H2, V1V2]`` (photon 1 from the
biexciton, photon 2 from the exciton).  H is identified with the X-polarized
cavity mode and V with the Y-polarized one.

Exciton splitting convention: ``splitting`` always means the full energy gap
between the two exciton levels.  In angular frequency it is
``Delta = splitting / hbar``; the half splitting ``delta_omega = Delta / 2``
is the quantity entering the rate-equation coefficients below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from h1cavity.constants import HBAR_EV
from h1cavity.errors import ConfigurationError, NumericalError

SQRT2 = math.sqrt(2.0)
#: overlap at which the ideal cascade reaches S = 2
K_THRESHOLD = SQRT2 - 1.0
S_LEVELS = (2.0, 2.2, 2.4, 2.6, 2.8)

_PAULI = (
    np.array([[0, 1], [1, 0]], complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], complex),
)
_HERMITIAN_TOL = 1e-12
_TRACE_TOL = 1e-12
_PSD_FLOOR = -1e-10


class PairDensityMatrix:
    """Validated 4x4 two-photon polarization density matrix."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ConfigurationError("pair density matrix must be 4x4")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > _HERMITIAN_TOL * scale:
            raise ConfigurationError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > _TRACE_TOL:
            raise ConfigurationError(f"density matrix trace {np.trace(m).real:.15g} differs from 1")
        m = 0.5 * (m + m.conj().T)
        if np.linalg.eigvalsh(m).min() < _PSD_FLOOR:
            raise ConfigurationError("density matrix is not positive semidefinite")
        self.matrix = m

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"PairDensityMatrix({np.array2string(self.matrix, precision=4)})"

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def correlation_matrix(self) -> np.ndarray:
        """``T_ij = Tr(rho sigma_i x sigma_j)`` for i, j in (x, y, z)."""
        return np.array([[np.trace(self.matrix @ np.kron(a, b)).real for b in _PAULI] for a in _PAULI])


def _as_pair(rho) -> PairDensityMatrix:
    return rho if isinstance(rho, PairDensityMatrix) else PairDensityMatrix(rho)


@dataclass(frozen=True)
class CascadeRates:
    """Incoherent rates of the cascade (1/s) and the half splitting (rad/s).

    ``pure_dephasing`` is carried for completeness; it does not enter the
    pair coefficients.
    """

    gamma1: float
    gamma_flip: float = 0.0
    delta_gamma_flip: float = 0.0
    cross_dephasing: float = 0.0
    splitting_half: float = 0.0
    pure_dephasing: float = 0.0

    def __post_init__(self):
        for name in ("gamma1", "gamma_flip", "cross_dephasing", "pure_dephasing"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if abs(self.delta_gamma_flip) > self.gamma_flip:
            raise ConfigurationError("|delta_gamma_flip| must not exceed gamma_flip")
        if not math.isfinite(self.splitting_half):
            raise ConfigurationError("splitting_half must be finite")

    @classmethod
    def from_splitting(cls, gamma1, splitting_ev, **rates) -> "CascadeRates":
        """Rates with the exciton splitting given as a full energy gap in eV."""
        return cls(gamma1=gamma1, splitting_half=0.5 * splitting_ev / HBAR_EV, **rates)


@dataclass(frozen=True)
class CascadeCoefficients:
    alpha: float
    d: float
    c1: float
    c2: float


@dataclass(frozen=True)
class AsymmetryParams:
    """Relative Purcell asymmetry ``delta_F`` and normalized splitting ``g``.

    ``g = Delta / (gamma1_bulk * (F_H + F_V) / 2)`` with ``Delta`` the full
    exciton splitting in rad/s: the splitting measured in units of the mean
    Purcell-enhanced exciton decay rate.
    """

    delta_F: float
    g: float

    def __post_init__(self):
        if not -1.0 <= self.delta_F <= 1.0:
            raise ConfigurationError("delta_F must lie in [-1, 1]")
        if not self.g >= 0:
            raise ConfigurationError("g must be >= 0")

    @classmethod
    def from_betas(cls, beta_h, beta_v, r) -> "AsymmetryParams":
        """Parameters for a dot with relative couplings ``beta_h, beta_v``.

        ``r`` is the figure of merit of the centered dot, so that with
        ``F_i = Fp_max * beta_i`` one gets ``g = 2 r / (beta_h + beta_v)``.
        """
        s = beta_h + beta_v
        if not s > 0:
            raise ConfigurationError("at least one coupling factor must be positive")
        return cls(delta_F=(beta_h - beta_v) / s, g=2.0 * r / s)


def cascade_coefficients(rates: CascadeRates) -> CascadeCoefficients:
    g1, gf, dgf = rates.gamma1, rates.gamma_flip, rates.delta_gamma_flip
    G, dw = rates.cross_dephasing, rates.splitting_half
    den = (2 * dw) ** 2 + (g1 + gf + G) ** 2 - dgf**2
    if not den > 0 or not g1 + 2 * gf > 0:
        raise ConfigurationError("invalid cascade rates: vanishing coefficient denominator")
    return CascadeCoefficients(
        alpha=0.5 * (g1 + gf) / (g1 + 2 * gf),
        d=0.5 * g1 * (g1 + 2 * G + gf) / den,
        c1=0.5 * g1 * dw / den,
        c2=0.5 * g1 * dgf / den,
    )


def _x_state(alpha, d, c1, c2, K=1.0):
    m = np.zeros((4, 4), complex)
    m[0, 0] = m[3, 3] = alpha
    m[1, 1] = m[2, 2] = 0.5 - alpha
    m[0, 3] = (d - 1j * c1) * K
    m[3, 0] = (d + 1j * c1) * K
    m[1, 2] = m[2, 1] = c2 * K
    return m


def ideal_density_matrix(rates: CascadeRates):
    """Pair density matrix for perfectly overlapping modes, and its coefficients."""
    c = cascade_coefficients(rates)
    return PairDensityMatrix(_x_state(c.alpha, c.d, c.c1, c.c2)), c


def apply_overlap(rho, K) -> PairDensityMatrix:
    """Scale the H/V coherences by the far-field overlap ``K``."""
    if not 0.0 <= K <= 1.0:
        raise ConfigurationError("overlap K must lie in [0, 1]")
    m = np.array(_as_pair(rho).matrix)
    for i, j in ((0, 3), (3, 0), (1, 2), (2, 1)):
        m[i, j] *= K
    return PairDensityMatrix(m)


def bell_closed_form(alpha, d, c2, K) -> float:
    """``S = 2 sqrt(2) (alpha + K (d - c2))``."""
    return 2.0 * SQRT2 * (alpha + K * (d - c2))


def bell_horodecki(rho) -> float:
    """Largest CHSH value over all measurement settings, ``2 sqrt(u1 + u2)``.

    ``u1, u2`` are the two largest eigenvalues of ``T^T T``.
    """
    T = _as_pair(rho).correlation_matrix()
    u = np.sort(np.linalg.eigvalsh(T.T @ T))
    return 2.0 * math.sqrt(max(u[-1] + u[-2], 0.0))


def chsh_fixed(rho) -> float:
    """CHSH value for the standard settings in the rectilinear/circular plane.

    Analyzers at 0 and 90 degrees for photon 1 and 45 and 135 degrees for
    photon 2 on the great circle through the H/V and circular states, which
    gives ``S = sqrt(2) (T_zz - T_yy)``.
    """
    T = _as_pair(rho).correlation_matrix()
    return SQRT2 * (T[2, 2] - T[1, 1])


def chsh_value(rho, a, a2, b, b2) -> float:
    """CHSH combination ``E(a,b) - E(a,b') + E(a',b) + E(a',b')`` for unit Bloch vectors."""
    T = _as_pair(rho).correlation_matrix()
    e = lambda x, y: float(np.asarray(x) @ T @ np.asarray(y))
    return e(a, b) - e(a, b2) + e(a2, b) + e(a2, b2)


def asymmetric_density_matrix(p: AsymmetryParams) -> PairDensityMatrix:
    """Pair state of a cascade whose two polarizations see different Purcell factors.

    Diagonal ``(1 + dF)^3, 0, 0, (1 - dF)^3`` and coherence
    ``(1 - dF^2)^2 / (1 - i g)``, normalized by the trace ``2 (1 + 3 dF^2)``.
    """
    dF, g = p.delta_F, p.g
    m = np.zeros((4, 4), complex)
    m[0, 0] = (1 + dF) ** 3
    m[3, 3] = (1 - dF) ** 3
    m[0, 3] = (1 - dF**2) ** 2 / (1 - 1j * g)
    m[3, 0] = np.conj(m[0, 3])
    return PairDensityMatrix(m / (2.0 * (1.0 + 3.0 * dF**2)))


def wigner_weisskopf_density_matrix(p: AsymmetryParams, gamma2_ratio=2.0, t_max=None) -> PairDensityMatrix:
    """Pair state obtained by integrating the cascade amplitudes in time.

    Rates are in units of the mean exciton decay rate: the exciton decays at
    ``1 +/- dF`` into H / V and the biexciton at ``gamma2_ratio * (1 +/- dF)``;
    the exciton levels are ``g`` apart.  Integrated are the biexciton
    population, the exciton coherences conditioned on the first photon's
    polarization, and the accumulated two-photon coherences.  Each photon is
    collected with probability proportional to the Purcell factor of its
    polarization.
    """
    dF, g = p.delta_F, p.g
    g1 = np.array([1 + dF, 1 - dF])
    g2 = gamma2_ratio * g1
    G2 = g2.sum()
    w = np.array([0.0, g])
    if t_max is None:
        slowest = min(G2, *(r for r in g1 if r > 0))
        t_max = 80.0 / slowest
    pairs = ((0, 0), (1, 1), (0, 1))

    def rhs(t, y):
        pop = y[0].real
        dy = np.empty(7, complex)
        dy[0] = -G2 * pop
        for n, (u, v) in enumerate(pairs):
            x = y[1 + n]
            dy[1 + n] = math.sqrt(g2[u] * g2[v]) * pop - (0.5 * (g1[u] + g1[v]) + 1j * (w[u] - w[v])) * x
            dy[4 + n] = math.sqrt(g1[u] * g1[v]) * x
        return dy

    y0 = np.zeros(7, complex)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, t_max), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise NumericalError(f"cascade integration failed: {sol.message}")
    R = sol.y[4:, -1]
    beta = g1 / g1.sum()
    m = np.zeros((4, 4), complex)
    m[0, 0] = R[0].real * beta[0] ** 2
    m[3, 3] = R[1].real * beta[1] ** 2
    m[0, 3] = R[2] * beta[0] * beta[1]
    m[3, 0] = np.conj(m[0, 3])
    tr = np.trace(m).real
    if not tr > 0:
        raise NumericalError("no photon pair collected")
    return PairDensityMatrix(m / tr)


def trace_distance(a, b) -> float:
    diff = np.asarray(a, complex) - np.asarray(b, complex)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def figure_of_merit(t1_bulk, splitting_ev, fp_max) -> float:
    """``r = T1_bulk * Delta / Fp_max`` with ``Delta`` the full splitting in rad/s.

    ``splitting_ev`` is the full exciton energy splitting in eV.
    """
    if not (t1_bulk > 0 and fp_max > 0 and splitting_ev >= 0):
        raise ConfigurationError("figure of merit needs T1 > 0, Fp > 0 and splitting >= 0")
    return t1_bulk * splitting_ev / (HBAR_EV * fp_max)


def _evaluator(method):
    if method == "chsh":
        return chsh_fixed
    if method == "horodecki":
        return bell_horodecki
    raise ConfigurationError("method must be 'chsh' or 'horodecki'")


def bell_asymmetric(beta_h, beta_v, r, method="chsh") -> float:
    return _evaluator(method)(asymmetric_density_matrix(AsymmetryParams.from_betas(beta_h, beta_v, r)))


@dataclass(frozen=True)
class MismatchRow:
    offset: float
    beta_x: float
    beta_y: float
    delta_F: float
    g: float
    S: float
    S_max: float


def crossing(xs, ys, level):
    """First abscissa where ``ys`` falls below ``level`` (linear interpolation).

    Returns the last abscissa when it never does and None when the first
    value is already below.
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if ys[0] < level:
        return None
    for i in range(1, len(xs)):
        if ys[i] < level:
            t = (ys[i - 1] - level) / (ys[i - 1] - ys[i])
            return float(xs[i - 1] + t * (xs[i] - xs[i - 1]))
    return float(xs[-1])


def bell_vs_mismatch(beta_fn, offsets, t1_bulk, splitting_ev, fp_max, method="chsh"):
    """Bell parameter of a dot displaced from the cavity center.

    ``beta_fn(offset) -> (beta_x, beta_y)`` gives the relative couplings
    (1 at the center).  Returns the table rows and the largest offset at which
    ``S >= 2`` (linearly interpolated; None when already violated at the
    first offset).  ``S`` is evaluated with ``method``; the all-settings
    maximum is reported alongside as ``S_max``.
    """
    r = figure_of_merit(t1_bulk, splitting_ev, fp_max)
    evaluate = _evaluator(method)
    rows = []
    for off in offsets:
        bx, by = beta_fn(off)
        p = AsymmetryParams.from_betas(bx, by, r)
        rho = asymmetric_density_matrix(p)
        rows.append(MismatchRow(float(off), float(bx), float(by), p.delta_F, p.g,
                                evaluate(rho), bell_horodecki(rho)))
    threshold = crossing([row.offset for row in rows], [row.S for row in rows], 2.0)
    return rows, threshold


def r_for_bell(beta_h, beta_v, s_target, method="chsh", r_max=100.0):
    """Figure of merit at which a dot with couplings ``beta_h, beta_v`` reaches ``s_target``.

    NaN when even ``r = 0`` stays below the target.
    """
    f = lambda r: bell_asymmetric(beta_h, beta_v, r, method) - s_target
    if f(0.0) < 0:
        return math.nan
    if f(r_max) > 0:
        return math.inf
    return brentq(f, 0.0, r_max, xtol=1e-12)


def r_contours(beta_fn, offsets, levels=S_LEVELS, method="chsh"):
    """Rows ``(offset, r at each S level)``: iso-S curves in the (offset, r) plane."""
    rows = []
    for off in offsets:
        bx, by = beta_fn(off)
        rows.append((float(off), *(r_for_bell(bx, by, s, method) for s in levels)))
    return rows


def bell_vs_overlap(rates: CascadeRates, ks):
    """``(K, S)`` pairs from the closed form for the given rates."""
    c = cascade_coefficients(rates)
    return [(float(k), bell_closed_form(c.alpha, c.d, c.c2, k)) for k in ks]
