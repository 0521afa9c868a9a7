import math

import numpy as np
import pytest

import oracles
from h1cavity.errors import ConfigurationError, NumericalError
from h1cavity.fdtd import DipoleSource, PmlSpec, add_source, check_finite, new_state, sample, step, trilinear_stencil
from h1cavity.fdtd.io import load_checkpoint, read_series, save_checkpoint, write_series
from h1cavity.fdtd.ringdown import (
    _fit_stop,
    PlaneField,
    component_permittivities,
    poynting_power,
    record_plane_complex,
    source_wavelength,
)
from h1cavity.geometry import CavityDesign


def uniform_state(shape=(20, 20, 20), eps=1.0, pml_cells=6, **kw):
    e = np.full(shape, eps)
    return new_state(e, e, e, 1.0, pml_cells=pml_cells, **kw)


def fields_snapshot(st):
    return {k: v.copy() for k, v in st.fields.items()}


# step

def test_zero_fields_stay_zero():
    st = uniform_state()
    for _ in range(50):
        step(st)
    assert all(not np.any(v) for v in st.fields.values())


def test_subnormal_values_are_flushed():
    st = uniform_state()
    for v in st.fields.values():
        v[1:-1, 1:-1, 1:-1] = np.float32(1e-40)
    step(st)
    assert all(not np.any(v) for v in st.fields.values())


def test_courant_bound():
    st = uniform_state()
    assert st.dt == pytest.approx(0.95 / math.sqrt(3))
    assert st.dt <= st.cell_size / math.sqrt(3)


def test_plane_wave_speed():
    assert oracles.plane_wave_speed() == pytest.approx(1.0, rel=0.01)


def test_plane_wave_speed_in_dielectric():
    nz, w = 260, 8.0
    st, zn = oracles.gaussian_pulse_state(nz, w, -nz / 2 + 40, eps=4.0)
    start = oracles.peak_position(zn, st.fields["ex"][0, 0].astype(float))
    n = 200
    for _ in range(n):
        step(st)
    end = oracles.peak_position(zn, st.fields["ex"][0, 0].astype(float))
    assert (end - start) / (n * st.dt) == pytest.approx(0.5, rel=0.01)


def test_closed_box_energy_conservation():
    assert oracles.closed_box_energy_drift() < 0.01


def test_pml_reflection():
    assert oracles.pml_reflection() < 1e-4


def test_energy_non_increasing_with_pml_after_source():
    st = uniform_state((40, 40, 40), eps=2.0, pml_cells=8)
    src = DipoleSource(wavelength=6.0, orientation="Y", width_periods=2.0)
    add_source(st, src)
    n_off = int(math.ceil(src.t_off / st.dt)) + 1
    for _ in range(n_off):
        step(st)
    u = [step(st, energy=True) for _ in range(300)]
    assert u[0] > 0
    # float32 round-off and the residual PML reflection allow tiny upticks only
    assert all(b <= a + 1e-3 * u[0] for a, b in zip(u, u[1:]))
    assert u[-1] < 0.5 * u[0]


def test_source_is_exactly_off_after_five_widths():
    src = DipoleSource(wavelength=1.0)
    assert src.t_off == pytest.approx(50.0)
    assert src.current(src.t_off + 1e-9) == 0.0
    assert src.current(-1e-9) == 0.0
    assert src.current(25.1) != 0.0
    with pytest.raises(ConfigurationError):
        DipoleSource(wavelength=1.0, orientation="W")


def test_source_drives_its_own_component_first():
    st = uniform_state()
    add_source(st, DipoleSource(wavelength=5.0, orientation="X", width_periods=1.0))
    while not np.any(st.fields["ex"]):
        step(st)
    assert not np.any(st.fields["ey"]) and not np.any(st.fields["ez"])


def test_deterministic_runs_are_bit_identical():
    def run():
        st = uniform_state((18, 16, 20), eps=3.0)
        add_source(st, DipoleSource(wavelength=4.0, orientation="X", position=(0.3, 0.1, 0.0), width_periods=2.0))
        probe = ("ey", trilinear_stencil(st.shape, 1.0, "ey", (1.2, 0.7, 0.4)))
        return np.array([(step(st), sample(st, probe))[1] for _ in range(150)]), st

    (a, sa), (b, sb) = run(), run()
    assert np.array_equal(a, b)
    for k in sa.fields:
        assert np.array_equal(sa.fields[k], sb.fields[k])


def test_nan_detection():
    st = uniform_state()
    check_finite(st)
    st.fields["hz"][3, 4, 5] = np.nan
    with pytest.raises(NumericalError):
        check_finite(st)


def test_permittivity_validation():
    e = np.ones((5, 5, 5))
    with pytest.raises(ConfigurationError):
        new_state(e * 0.5, e, e, 1.0)
    with pytest.raises(ConfigurationError):
        new_state(e, np.ones((5, 5, 4)), e, 1.0)


def test_trilinear_stencil():
    shape = (10, 10, 10)
    st = trilinear_stencil(shape, 1.0, "ex", (0.3, -0.2, 0.45))
    assert sum(w for _, w in st) == pytest.approx(1.0)
    assert len(st) == 8
    on_node = trilinear_stencil(shape, 1.0, "ex", (0.5, 0.0, 0.0))
    assert len(on_node) == 1 and on_node[0][1] == 1.0
    with pytest.raises(ConfigurationError):
        trilinear_stencil(shape, 1.0, "ex", (50.0, 0.0, 0.0))


def test_checkpoint_resume_is_bit_exact(tmp_path):
    def fresh():
        st = uniform_state((16, 16, 16), eps=2.5, pml_cells=4)
        add_source(st, DipoleSource(wavelength=4.0, orientation="Y", width_periods=3.0))
        return st

    a = fresh()
    for _ in range(60):
        step(a)
    save_checkpoint(a, tmp_path / "ck.bin")
    for _ in range(80):
        step(a)
    b = fresh()
    load_checkpoint(b, tmp_path / "ck.bin")
    assert b.step_index == 60
    for _ in range(80):
        step(b)
    for k in a.fields:
        assert np.array_equal(a.fields[k], b.fields[k])
    header = (tmp_path / "ck.bin").read_bytes()[:200].decode("ascii", "replace")
    assert header.startswith("H1CAVITY-CHECKPOINT 1\nstep_index = 60")
    with pytest.raises(ConfigurationError):
        load_checkpoint(uniform_state((12, 12, 12)), tmp_path / "ck.bin")


def test_series_csv_round_trip(tmp_path):
    t = np.linspace(0, 1e-12, 17)
    v = np.sin(t * 1e13)
    write_series(tmp_path / "s.csv", t, v)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t_seconds,value"
    t2, v2 = read_series(tmp_path / "s.csv")
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(v2, v)


# plane recording and power

def test_record_plane_standing_wave():
    f = np.linspace(-1, 1, 11)
    omega, t0 = 2.3, 0.4
    T = 2 * math.pi / omega
    first = 1.7 * np.cos(omega * t0) * f
    quarter = 1.7 * np.cos(omega * (t0 + T / 4)) * f
    F = record_plane_complex(first, quarter, 0.0, omega)
    np.testing.assert_allclose(np.abs(F), 1.7 * np.abs(f), rtol=1e-12, atol=1e-15)


def test_record_plane_decay_compensation():
    omega, gamma = 2.0, 0.05
    T = 2 * math.pi / omega
    mods, biased = [], []
    for t0 in np.linspace(0, 3 * T, 13):
        e = lambda t: math.exp(-gamma * t) * math.cos(omega * t)
        F = record_plane_complex(e(t0), e(t0 + T / 4), gamma, omega)
        mods.append(abs(F) / math.exp(-gamma * t0))
        biased.append(abs(record_plane_complex(e(t0), e(t0 + T / 4), 0.0, omega)) / math.exp(-gamma * t0))
    mods = np.array(mods)
    assert np.ptp(mods) / mods.mean() < 0.01
    assert np.mean(biased) < 0.99 * mods.mean()


def test_record_plane_arbitrary_spacing():
    omega, gamma, t0 = 1.7, 0.03, 0.9
    F_true = np.array([0.8 - 0.5j, -1.2 + 0.1j])
    e = lambda t: np.real(F_true * np.exp(-(gamma + 1j * omega) * (t - t0)))
    for tau in (0.2, 0.5 * math.pi / omega, 1.3):
        np.testing.assert_allclose(record_plane_complex(e(t0), e(t0 + tau), gamma, omega, tau), F_true,
                                   rtol=1e-12, atol=1e-12)
    with pytest.raises(ConfigurationError):
        record_plane_complex(e(t0), e(t0), gamma, omega, 2 * math.pi / omega)


def test_fit_window_stops_at_envelope_floor():
    t = np.linspace(0, 100, 20001)
    y = np.exp(-0.1 * t) * np.cos(2 * math.pi * t)
    stop = _fit_stop(t, y, 10.0, 1.0, 1e-2)
    # exp(-0.1 (t - 10)) = 0.01 at t = 10 + 46.05, counted in whole cycles
    assert 55.0 <= t[stop] <= 58.0
    assert _fit_stop(t, np.cos(2 * math.pi * t), 10.0, 1.0, 1e-2) == t.size


def yee_plane_wave(shape, kz, amp=1.0):
    """Complex phasors of a +z plane wave (Ex, Hy) on the Yee grid, zero below k = 5."""
    E = [np.zeros(shape, complex) for _ in range(3)]
    H = [np.zeros(shape, complex) for _ in range(3)]
    k = np.arange(shape[2])
    E[0][:] = amp * np.exp(1j * kz * k)[None, None, :]
    H[1][:] = amp * np.exp(1j * kz * (k + 0.5))[None, None, :]
    return E, H


def test_poynting_power_plane_wave_through_box():
    shape = (12, 12, 30)
    E, H = yee_plane_wave(shape, 0.3)
    box = ((2, 10), (3, 9), (5, 25))
    # equal flux in through the bottom and out through the top
    assert abs(poynting_power(E, H, box, 1.0)) < 1e-3
    for a in (E[0], H[1]):
        a[:, :, :20] = 0.0
    # only the top face carries power now: |E|^2/2 times its area
    assert poynting_power(E, H, box, 0.5) == pytest.approx(0.5 * 8 * 6 * 0.25, rel=0.05)


def test_poynting_power_sign_follows_direction():
    shape = (10, 10, 24)
    E, H = yee_plane_wave(shape, 0.2)
    H[1] *= -1  # wave now travels toward -z
    for a in (E[0], H[1]):
        a[:, :, :14] = 0.0
    assert poynting_power(E, H, ((2, 8), (2, 8), (5, 19)), 1.0) < 0


# ringdown set-up helpers

def test_source_wavelength_scales_homothetically():
    d = CavityDesign(inner_hole_shift=0.16)
    assert source_wavelength(d) == pytest.approx(1.0442e-6, abs=1e-12)
    s = 1.2
    big = d.replace(lattice_constant=270e-9 * s, hole_radius=80e-9 * s, membrane_thickness=0.26e-6 * s)
    assert source_wavelength(big) == pytest.approx(s * 1.0442e-6, rel=1e-12)


def test_component_permittivities():
    d = CavityDesign(lattice_rings=2, vertical_padding=0.5 * 270e-9, pml_cells=2)
    lay, (ex, ey, ez) = component_permittivities(d, 10)
    assert ex.shape == ey.shape == ez.shape == lay.shape
    _, (ax, ay, az) = component_permittivities(d, 10, smoothing="arithmetic")
    for a in (ex, ey, ez, ax, ay, az):
        assert a.min() >= 1.0 - 1e-12 and a.max() <= d.eps_slab + 1e-12
    # the anisotropic average is never above the plain one
    assert np.all(ez <= az + 1e-9)
    with pytest.raises(ConfigurationError):
        component_permittivities(d, 10, smoothing="cubic")


def test_pml_spec_theoretical_reflection():
    spec = PmlSpec(thickness_cells=10, grading_order=3, target_reflection=1e-6)
    L = 10 * 0.1
    # R = exp(-2 sigma_max L / (m + 1))
    assert math.exp(-2 * spec.sigma_max(0.1) * L / 4) == pytest.approx(1e-6, rel=1e-12)
    assert PmlSpec(max_conductivity=3.0).sigma_max(0.1) == 3.0


def test_plane_field_scaled():
    x = np.arange(3.0)
    p = PlaneField(0.1, {"ex": (x, x, np.ones((3, 3))), "ey": (x, x, np.zeros((3, 3)))})
    q = p.scaled(2j)
    assert q.components["ex"][2][0, 0] == 2j and q.z == 0.1
