import math

import numpy as np
import pytest

from phonoprep import units as u


def test_constants_table_is_read_only():
    assert u.CONSTANT_TABLE["hbar_meV_ps"] == u.CONSTANTS.hbar_meV_ps
    with pytest.raises(TypeError):
        u.CONSTANT_TABLE["hbar_meV_ps"] = 1.0


def test_energy_angular_round_trip(rng):
    omega = rng.uniform(-50, 50, 1000)
    back = u.energy_to_angular(u.angular_to_energy(omega))
    np.testing.assert_allclose(back, omega, rtol=1e-12, atol=0)
    assert u.energy_to_angular(u.CONSTANTS.hbar_meV_ps) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize(
    "energy, expected",
    [(1.9, -0.97), (3.2, -1.65), (3.0, -1.54), (5.6, -2.89), (0.0, 0.0)],
)
def test_energy_to_detuning_reference_values(energy, expected):
    assert u.energy_to_detuning(energy, 800.0) == pytest.approx(expected, abs=0.02)


def test_exact_relation_differs_from_first_order_only_at_second_order():
    exact = u.energy_to_detuning(5.6, 800.0)
    linear = u.first_order_detuning(5.6, 800.0)
    rel = 5.6 / (u.CONSTANTS.hc_meV_nm / 800.0)
    assert abs(exact - linear) == pytest.approx(abs(linear) * rel, rel=0.05)


def test_detuning_energy_round_trip(rng):
    e = rng.uniform(-20, 20, 500)
    back = u.detuning_to_energy(u.energy_to_detuning(e, 800.0), 800.0)
    np.testing.assert_allclose(back, e, rtol=1e-12, atol=1e-12)


def test_detuning_frequency_round_trip(rng):
    dl = rng.uniform(-5, 5, 500)
    back = u.frequency_to_detuning_wavelength(u.detuning_wavelength_to_frequency(dl, 800.0), 800.0)
    np.testing.assert_allclose(back, dl, rtol=1e-12, atol=1e-12)


def test_detuning_sign_convention_and_energy_equivalence():
    assert u.detuning_wavelength_to_frequency(0.0, 800.0) == 0.0
    dw = u.detuning_wavelength_to_frequency(-0.97, 800.0)
    # -0.97 nm is itself rounded, so compare at the +-0.02 nm level of the detuning
    assert u.angular_to_energy(dw) == pytest.approx(1.9, abs=0.04)
    assert dw == pytest.approx(u.energy_to_angular(1.9), abs=0.06)
    assert u.detuning_to_energy(-2.89, 800.0) == pytest.approx(5.6, abs=0.02)


def test_frequency_and_energy_routes_agree():
    dl = -1.3
    via_freq = u.angular_to_energy(u.detuning_wavelength_to_frequency(dl, 800.0))
    assert via_freq == pytest.approx(u.detuning_to_energy(dl, 800.0), rel=1e-9)


@pytest.mark.parametrize("bad", [0.0, -800.0, math.inf, math.nan])
def test_rejects_bad_reference_wavelength(bad):
    with pytest.raises(ValueError):
        u.energy_to_detuning(1.0, bad)
    with pytest.raises(ValueError):
        u.detuning_wavelength_to_frequency(-0.5, bad)


def test_rejects_degenerate_laser_wavelength():
    with pytest.raises(ValueError):
        u.detuning_wavelength_to_frequency(-800.0, 800.0)
    with pytest.raises(ValueError):
        u.detuning_to_energy(-900.0, 800.0)
    with pytest.raises(ValueError):
        u.energy_to_detuning(-1e9, 800.0)


def test_frequency_convention_switch():
    assert u.thz_to_rad_per_ps(2.03) == 2.03
    assert u.thz_to_rad_per_ps(2.03, "ordinary") == pytest.approx(2 * math.pi * 2.03)
    with pytest.raises(ValueError):
        u.thz_to_rad_per_ps(1.0, "cycles")


def test_kelvin_to_angular():
    assert u.kelvin_to_angular(4.0) == pytest.approx(4.0 * 0.08617333262 / 0.6582119569, rel=1e-14)


def test_linewidth_conversion():
    # ZPL linewidth of 0.108 nm at 800 nm is about 0.209 meV
    assert u.length_fwhm_nm_to_energy_meV(0.108, 800.0) == pytest.approx(0.209, abs=0.002)
