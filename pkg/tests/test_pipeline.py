import csv
import json
import math

import numpy as np
import pytest

from fakes import FakeRunner, fake_ringdown
from h1cavity.errors import ConfigurationError
from h1cavity.fdtd.io import load_ringdown, save_ringdown
from h1cavity.geometry import CavityDesign
from h1cavity.pipeline import ResultCache, SweepPlan, analyse_point, cache_key, load_config, report, run_sweep
from h1cavity.pipeline.cache import CACHE_ENV, default_cache_dir
from h1cavity.pipeline.cli import main
from h1cavity.pipeline.images import read_pgm, write_pgm
from h1cavity.pipeline.sweep import read_points, row_columns

A = 270e-9


def small_plan(**kw):
    base = dict(d_values=(0.10, 0.13, 0.16), h_values=(0.26e-6,), na_values=(0.2, 0.5, 0.7),
                offsets=tuple(10e-9 * i for i in range(8)), resolution=8, free_cycles=10,
                cascade=({"name": "2ueV", "t1_bulk": 1e-9, "splitting_ev": 2e-6, "fp_max": 10.0},))
    base.update(kw)
    return SweepPlan(**base)


# configuration

def test_config_file(tmp_path):
    p = tmp_path / "sweep.yaml"
    p.write_text(
        "design:\n  lattice_rings: 5\n"
        "simulation:\n  resolution: 12\n  free_cycles: 200\n"
        "sweep:\n  d: {start: 0.10, stop: 0.16, step: 0.02}\n  h: [0.25um, 260nm]\n"
        "  offsets: {start: 0nm, stop: 20nm, step: 5nm}\n"
        "cascade:\n  - {name: a, t1_bulk: 1ns, splitting: 2ueV, fp_max: 10}\n"
        "workers: 2\n"
    )
    plan = load_config(p)
    assert plan.d_values == pytest.approx((0.10, 0.12, 0.14, 0.16))
    assert plan.h_values == pytest.approx((0.25e-6, 0.26e-6))
    assert plan.offsets == pytest.approx((0, 5e-9, 10e-9, 15e-9, 20e-9))
    assert plan.resolution == 12 and plan.free_cycles == 200 and plan.workers == 2
    assert plan.base_design.lattice_rings == 5
    assert plan.cascade[0]["splitting_ev"] == pytest.approx(2e-6)
    assert len(list(plan.designs())) == 8


@pytest.mark.parametrize("text", [
    "sweep:\n  d: []\n",
    "sweep:\n  d: [0.3]\n",
    "sweep:\n  q: [1]\n",
    "simulation:\n  resolution: 4\n",
    "bogus: 1\n",
    "cascade:\n  - {name: x, t1_bulk: 1ns}\n",
    "sweep:\n  d: {start: 0, stop: 0.1}\n",
    "design:\n  hole_radius: 20 furlongs\n",
    "- just a list\n",
    "sweep: [unclosed\n",
])
def test_config_validation(tmp_path, text):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.yaml")


# cache

def test_cache_key_is_canonical():
    d = CavityDesign(inner_hole_shift=0.16)
    k = cache_key(d, 16, "X", {"free_cycles": 300})
    assert k == cache_key(CavityDesign(inner_hole_shift=0.16), 16, "X", {"free_cycles": 300})
    assert len({k, cache_key(d, 16, "Y", {"free_cycles": 300}), cache_key(d, 12, "X", {"free_cycles": 300}),
                cache_key(d.replace(inner_hole_shift=0.15), 16, "X", {"free_cycles": 300}),
                cache_key(d, 16, "X", {"free_cycles": 200})}) == 5


def test_cache_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "c"))
    assert default_cache_dir() == tmp_path / "c"
    assert ResultCache().root == tmp_path / "c"


def test_cache_hit_skips_runner(cache):
    runner = FakeRunner()
    d = CavityDesign(inner_hole_shift=0.12)
    a = cache.get_or_run(d, 8, "X", runner, {"free_cycles": 5})
    b = cache.get_or_run(d, 8, "X", runner, {"free_cycles": 5})
    assert len(runner.calls) == 1 and cache.hits == 1
    assert a.gamma == b.gamma
    np.testing.assert_array_equal(a.plane.components["ex"][2], b.plane.components["ex"][2])


def test_ringdown_archive_round_trip(tmp_path):
    r = fake_ringdown(CavityDesign(inner_hole_shift=0.07), 10, "Y")
    save_ringdown(r, tmp_path / "r.npz")
    s = load_ringdown(tmp_path / "r.npz")
    assert (s.orientation, s.design, s.resolution, s.omega, s.gamma, s.fit) == \
        (r.orientation, r.design, r.resolution, r.omega, r.gamma, r.fit)
    for name in ("probe_time", "probe_value", "energy_time", "energy_value"):
        np.testing.assert_array_equal(getattr(s, name), getattr(r, name))
    for k in r.plane.components:
        for u, v in zip(s.plane.components[k], r.plane.components[k]):
            np.testing.assert_array_equal(u, v)
    np.testing.assert_array_equal(s.midplane.values, r.midplane.values)
    assert s.meta == r.meta


# sweep

def test_analyse_point_row(cache):
    p = analyse_point(CavityDesign(inner_hole_shift=0.16), 8, (0.2, 0.5, 0.7), cache, FakeRunner())
    row = p.row
    assert set(row) == set(row_columns((0.2, 0.5, 0.7)))
    assert row["split_rel"] == pytest.approx(0.0, abs=1e-15)
    etas = [row[f"eta_NA{na:.2f}"] for na in (0.2, 0.5, 0.7)]
    assert etas == sorted(etas) and etas[-1] <= 0.5
    ks = [row[f"K_NA{na:.2f}"] for na in (0.2, 0.5, 0.7)]
    assert all(0 < k <= 1 for k in ks) and ks[0] > ks[-1]
    assert row["up_fraction_X"] == pytest.approx(0.3, rel=1e-3)
    assert row["flux_ratio_X"] == pytest.approx(0.98)


def test_sweep_tables_and_artifacts(tmp_path, cache):
    out = tmp_path / "sweep"
    runner = FakeRunner()
    tables = run_sweep(small_plan(), cache, out, runner)
    assert len(tables.rows) == 3 and not tables.failures
    rows = read_points(out / "points.csv")
    assert [r["d"] for r in rows] == [0.10, 0.13, 0.16]
    with open(out / "points.csv") as fh:
        assert next(csv.reader(fh)) == row_columns((0.2, 0.5, 0.7))
    pdir = out / "points" / "d0.160_h260nm"
    for name in ("pattern_X.csv", "pattern_Y.pgm", "probe_X.csv", "energy_Y.csv", "beta.csv",
                 "mismatch_2ueV.csv", "rcontours.csv", "cascade_summary.json"):
        assert (pdir / name).exists(), name
    summary = json.loads((pdir / "cascade_summary.json").read_text())
    assert summary["2ueV"]["r"] == pytest.approx(0.3038, abs=1e-3)
    # every output row has the fixed column set
    with open(pdir / "mismatch_2ueV.csv") as fh:
        lines = list(csv.reader(fh))
    assert lines[0] == ["offset_m", "beta_X", "beta_Y", "delta_F", "g", "S", "S_max"]
    assert all(len(l) == 7 for l in lines)


def test_sweep_rerun_uses_cache_only(tmp_path, cache):
    runner = FakeRunner()
    run_sweep(small_plan(), cache, tmp_path / "a", runner)
    n = len(runner.calls)
    again = FakeRunner()
    run_sweep(small_plan(), cache, tmp_path / "b", again)
    assert n == 6 and again.calls == []
    assert (tmp_path / "a" / "points.csv").read_text() == (tmp_path / "b" / "points.csv").read_text()


def test_failure_is_isolated(tmp_path, cache):
    tables = run_sweep(small_plan(), cache, tmp_path / "s", FakeRunner(fail_at={0.13}))
    assert [r["d"] for r in tables.rows] == [0.10, 0.16]
    (f,) = tables.failures
    assert f["d"] == 0.13 and f["kind"] == "numerical" and f["error"] == "NumericalError"
    assert json.loads((tmp_path / "s" / "failures.json").read_text())[0]["d"] == 0.13


def test_worker_count_does_not_change_results(tmp_path):
    one = run_sweep(small_plan(), ResultCache(tmp_path / "c1"), tmp_path / "w1", FakeRunner())
    two = run_sweep(small_plan(workers=2), ResultCache(tmp_path / "c2"), tmp_path / "w2", FakeRunner())
    for a, b in zip(one.rows, two.rows):
        for k in a:
            assert a[k] == pytest.approx(b[k], rel=1e-12, abs=0)
    assert (tmp_path / "w1" / "points.csv").read_text() == (tmp_path / "w2" / "points.csv").read_text()


# report

def test_report_bundle_with_gap(tmp_path, cache):
    plan = small_plan(h_values=(0.25e-6, 0.26e-6))
    run_sweep(plan, cache, tmp_path / "s", FakeRunner(fail_at={0.13}))
    b = report(tmp_path / "s", tmp_path / "r")
    fp_map = (tmp_path / "r" / "maps" / "Fp.csv").read_text().splitlines()
    assert fp_map[0] == "d,h_m,Fp" and len(fp_map) == 1 + 6
    assert sum("MISSING" in line for line in fp_map) == 2
    img = read_pgm(tmp_path / "r" / "maps" / "Fp.pgm")
    assert img.shape == (3, 2) and img[1, 0] == 0 and img[1, 1] == 0
    cut = (tmp_path / "r" / "cuts" / "cut_h260nm.csv").read_text().splitlines()
    assert len(cut) == 3
    assert len(b.gaps) == 2 and all("NumericalError" in g["reason"] for g in b.gaps)
    assert json.loads((tmp_path / "r" / "gaps.json").read_text()) == json.loads(json.dumps(b.gaps))
    s = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert s["reference_d"] == 0.16 and s["Fp_peak_d"] == 0.16
    assert "K_NA0.70_min" in s and s["cascade"]["point"] == "d0.160_h260nm"
    assert (tmp_path / "r" / "mismatch" / "d0.160_h260nm" / "mismatch_2ueV.csv").exists()
    assert (tmp_path / "r" / "patterns" / "d0.100_h250nm_X.pgm").exists()


def test_report_requires_sweep(tmp_path):
    with pytest.raises(ConfigurationError):
        report(tmp_path / "none", tmp_path / "r")


def test_pgm_round_trip(tmp_path):
    a = np.linspace(0, 1, 35).reshape(7, 5)
    a[2, 3] = math.nan
    write_pgm(tmp_path / "a.pgm", a)
    img = read_pgm(tmp_path / "a.pgm")
    assert img.shape == (7, 5)
    assert img[2, 3] == 0 and img[-1, -1] == 255
    np.testing.assert_array_equal(np.argsort(img[:, 0]), np.arange(7))
    # first pixel byte equal to an ASCII whitespace code must survive
    b = np.full((3, 3), 32.0)
    write_pgm(tmp_path / "b.pgm", b, vmin=0, vmax=255)
    assert np.all(read_pgm(tmp_path / "b.pgm") == 32)


# command line

def test_cli_cascade(capsys):
    assert main(["cascade"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "r,S_centered"
    r, s = map(float, out[1].split(","))
    assert r == pytest.approx(0.30, abs=0.01) and s > 2.6
    assert main(["cascade", "--k", "0,1"]) == 0
    assert "2.82843" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["sweep", "--out", "x", "--resolution", "3"],
    ["cascade", "--splitting", "2 parsecs"],
    ["simulate", "--d", "0.5"],
])
def test_cli_validation_exit_code(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["--cache-dir", str(tmp_path / "c")] + argv) == 2


def test_cli_report_exit_codes(tmp_path, cache):
    assert main(["report", "--sweep", str(tmp_path / "none"), "--out", str(tmp_path / "r")]) == 2
    run_sweep(small_plan(), cache, tmp_path / "s", FakeRunner(fail_at={0.10}))
    assert main(["report", "--sweep", str(tmp_path / "s"), "--out", str(tmp_path / "r")]) == 0
    assert main(["report", "--sweep", str(tmp_path / "s"), "--out", str(tmp_path / "r"), "--strict"]) == 3
