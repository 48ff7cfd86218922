import math

import numpy as np
import pytest

from phonoprep import experiments as ex

SMALL = """
[sweep]
name = small
detuning_min_nm = -1.0
detuning_max_nm = 0.0
detuning_count = 3
area_min_pi = 1.0
area_max_pi = 3.0
area_count = 2

[pulse]
t_p_ps = 2.65

[phonons]
modes = LA

[solver]
steps_per_tp = 10
"""


def small(**changes):
    cfg = ex.parse_sweep_config(SMALL)
    return cfg.replace(**changes) if changes else cfg


# --- configuration ------------------------------------------------------------------


def test_defaults_and_derived_quantities():
    cfg = small()
    assert cfg.modes == ("LA",)
    assert cfg.temperature_k == 4.0
    assert cfg.phonons.omega_c == 2.03
    assert cfg.grouping == "split"
    assert cfg.dt == pytest.approx(0.265)
    assert cfg.n_steps == 60
    assert cfg.memory_steps == math.ceil((4 / 2.03) / 0.265)
    np.testing.assert_allclose(cfg.areas, [math.pi, 3 * math.pi])
    assert cfg.n_cells == 6
    # catalog defaults at the equilibrium distance
    assert (cfg.e_sm_mev, cfg.e_bm_mev) == (1.9, 3.2)


@pytest.mark.parametrize(
    "patch, message",
    [
        (("[solver]", "[solver]\nbogus = 1"), "unknown key"),
        (("[pulse]", "[extra]\nx = 1\n[pulse]"), "unknown section"),
        (("detuning_count = 3", "detuning_count = three"), "not a valid int"),
        (("detuning_count = 3", ""), "missing required"),
        (("t_p_ps = 2.65", "t_p_ps = 2.65\nfwhm_nm = 0.3"), "exactly one"),
        (("t_p_ps = 2.65", ""), "exactly one"),
        (("modes = LA", "modes = LA, XX"), "unknown modes"),
        (("modes = LA", "modes = LA, LA"), "duplicate"),
        (("modes = LA", "modes ="), "empty"),
        (("steps_per_tp = 10", "steps_per_tp = 10\ngrouping = clever"), "grouping"),
        (("area_count = 2", "area_count = 0"), "empty"),
        (("detuning_max_nm = 0.0", "detuning_max_nm = -2.0"), "strictly increasing"),
        (("[phonons]", "[phonons]\nd_ww_angstrom = 7.5"), "outside tabulated range"),
        (("[phonons]", "[phonons]\nfrequency_convention = hertz"), "convention"),
        (("[sweep]", "sweep]"), "no section headers"),
    ],
)
def test_schema_errors(patch, message):
    text = SMALL.replace(*patch)
    with pytest.raises(ex.ConfigError, match=message):
        ex.parse_sweep_config(text)


def test_none_modes_is_closed_system():
    cfg = ex.parse_sweep_config(SMALL.replace("modes = LA", "modes = none"))
    assert cfg.modes == ()
    assert ex.bath_groups(cfg) == []


def test_fwhm_form_matches_duration_form():
    a = small()
    fwhm = ex.environment_report(a)["pulse_fwhm_nm"]
    b = ex.parse_sweep_config(SMALL.replace("t_p_ps = 2.65", f"fwhm_nm = {fwhm!r}"))
    assert b.t_p_ps == pytest.approx(a.t_p_ps, rel=1e-9)


def test_fingerprint_tracks_numerics_only():
    a = small()
    assert a.fingerprint == small().fingerprint
    assert a.fingerprint != small(svd_tol=1e-8).fingerprint
    assert a.fingerprint == small(output_dir="elsewhere", heatmap=True).fingerprint


def test_missing_config_file(tmp_path):
    with pytest.raises(ex.ConfigError, match="cannot read"):
        ex.load_sweep_config(tmp_path / "nope.cfg")
    with pytest.raises(ex.ConfigError, match="unknown preset"):
        ex.load_preset("nope")


def test_shipped_presets():
    names = {p.stem for p in ex.PRESET_DIR.glob("*.cfg")}
    assert {"fig3c_la_only", "fig3d_full", "fig3d_full_xi1", "rabi_closed", "equilibrium", "compressed"} <= names
    for name in names:
        ex.load_preset(name)
    c = ex.load_preset("fig3c_la_only")
    assert c.modes == ("LA",) and c.t_p_ps == 2.65
    d = ex.load_preset("fig3d_full")
    assert set(d.modes) == set(ex.MODES) and d.phonons.xi_bm == 5 and (d.e_sm_mev, d.e_bm_mev) == (3.0, 5.6)
    assert ex.load_preset("fig3d_full_xi1").phonons.xi_bm == 1
    assert ex.load_preset("equilibrium").e_bm_mev == 3.2
    assert ex.load_preset("compressed").e_bm_mev == 5.6
    r = ex.load_preset("rabi_closed")
    assert r.modes == () and r.gamma_per_ps == 0


def test_bath_groups():
    cfg = ex.load_preset("fig3d_full")
    split = ex.bath_groups(cfg.replace(grouping="split"))
    assert [[J.label for J in g[0]] for g in split] == [["LA"], ["SM1", "SM2", "BM"]]
    assert split[0][1] == cfg.memory_steps and split[1][1] == cfg.n_steps - 1
    assert split[1][2] == cfg.long_memory_svd_tol
    sep = ex.bath_groups(cfg.replace(grouping="separate"))
    assert len(sep) == 4
    comb = ex.bath_groups(cfg.replace(grouping="combined"))
    assert len(comb) == 1 and len(comb[0][0]) == 4 and comb[0][1] == cfg.n_steps - 1


# --- extrema ------------------------------------------------------------------------


def test_slice_maxima_two_gaussians():
    x = np.linspace(-3.4, 0.0, 35)
    y = 0.8 * np.exp(-((x + 0.5) / 0.3) ** 2) + 0.4 * np.exp(-((x + 2.0) / 0.3) ** 2)
    found = ex.slice_maxima(x, y)
    assert [round(e.detuning_nm, 6) for e in found] == [-2.0, -0.5]
    assert not any(e.boundary for e in found)


def test_slice_maxima_monotone_and_plateau():
    x = np.linspace(-1, 0, 11)
    found = ex.slice_maxima(x, x.copy())
    assert len(found) == 1 and found[0].boundary and found[0].detuning_nm == 0.0
    plateau = np.array([0, 1, 2, 2, 2, 1, 0, 0, 0, 0, 0], dtype=float)
    found = ex.slice_maxima(x, plateau)
    assert len(found) == 1
    assert ex.slice_maxima(x, np.ones(11)) == []


def test_slice_maxima_rejects_invalid():
    with pytest.raises(ValueError):
        ex.slice_maxima([0, 1, 2], [0.1, float("nan"), 0.2])


def test_smoothing():
    np.testing.assert_allclose(ex.smooth3([0, 3, 0, 3]), [1.5, 1, 2, 1.5])


def test_map_extrema_on_grid():
    x = np.linspace(-2, 0, 21)
    areas = np.pi * np.array([3.0, 4.0])
    pop = np.vstack([np.zeros(21), np.exp(-((x + 1.0) / 0.3) ** 2)])
    pmap = ex.PopulationMap.from_values(x, areas, pop)
    (peak,) = ex.map_extrema(pmap, 4 * np.pi)
    assert peak.detuning_nm == pytest.approx(-1.0)
    with pytest.raises(ValueError, match="not on the grid"):
        pmap.slice(3.5 * np.pi)


def test_population_map_validation():
    with pytest.raises(ValueError, match="outside"):
        ex.PopulationMap.from_values([0.0], [1.0], [[1.2]])
    with pytest.raises(ValueError, match="shape"):
        ex.PopulationMap.from_values([0.0, 1.0], [1.0], [[0.2]])


# --- running ------------------------------------------------------------------------


def test_closed_rabi_preset():
    pmap = ex.run_sweep(ex.load_preset("rabi_closed"))
    expected = np.sin(pmap.area / 2) ** 2
    np.testing.assert_allclose(pmap.population[:, 0], expected, atol=1e-3)


def test_sweep_outputs_and_determinism(tmp_path):
    cfg = small()
    serial = ex.run_sweep(cfg, jobs=1)
    parallel = ex.run_sweep(cfg, jobs=2)
    np.testing.assert_array_equal(serial.population, parallel.population)
    assert serial.to_csv() == parallel.to_csv()
    assert serial.diagnostics_csv() == parallel.diagnostics_csv()
    paths = serial.save(tmp_path)
    lines = paths[0].read_text().splitlines()
    assert lines[2].startswith("area_pi\\detuning_nm,")
    assert len(lines) == 3 + 2 and len(lines[3].split(",")) == 4
    diag = paths[1].read_text().splitlines()
    assert diag[0].split(",")[-2] == "hermiticity_defect" and len(diag) == 7
    s = serial.summary()
    assert s["invalid_cells"] == 0 and s["max_trace_error"] < 1e-8 and s["peak"]["population"] > 0


def test_budget_guard():
    with pytest.raises(ex.BudgetExceeded) as err:
        ex.run_sweep(small(), budget=1e-9)
    assert err.value.estimate > err.value.budget


def test_failed_cells_are_reported():
    with pytest.raises(ex.SweepFailed) as err:
        ex.run_sweep(small(invariant_tol=1e-300))
    pmap = err.value.population_map
    assert pmap.invalid_fraction > 0.01
    assert all("InvariantViolation" in msg for msg in pmap.errors.values())


def test_environment_report():
    rep = ex.environment_report(ex.load_preset("compressed"))
    by = {r["mode"]: r for r in rep["modes"]}
    assert by["SM1"]["energy_meV"] == pytest.approx(3.0) and by["BM"]["energy_meV"] == pytest.approx(5.6)
    assert by["BM"]["detuning_nm"] == pytest.approx(-2.89, abs=0.02)
    assert by["LA"]["huang_rhys"] == pytest.approx(0.29 * 2.03 * math.sqrt(math.pi) / 2, rel=1e-6)
    assert rep["total_huang_rhys"] == pytest.approx(sum(r["huang_rhys"] for r in rep["modes"] if r["enabled"]))
    assert rep["pulse_fwhm_nm"] == pytest.approx(0.30, abs=0.005)
