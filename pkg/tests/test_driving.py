import math

import numpy as np
import pytest
from scipy import integrate

from phonoprep.driving import (
    PulseSpec,
    SystemHamiltonian,
    duration_from_fwhm,
    pulse_amplitude,
    pulse_fwhm_wavelength,
    pulse_spectrum,
)


def test_peak_value():
    p = PulseSpec(math.pi, 2.65)
    assert pulse_amplitude(p, 0.0) == pytest.approx(math.pi / (math.sqrt(math.pi) * 2.65), rel=1e-15)
    assert pulse_amplitude(p, 0.0) == pytest.approx(0.6687, abs=3e-4)
    assert pulse_amplitude(p, 1e3) == 0.0


@pytest.mark.parametrize("area", [0.5 * math.pi, math.pi, 4 * math.pi])
def test_area_normalisation(area):
    p = PulseSpec(area, 2.65)
    val, _ = integrate.quad(lambda t: pulse_amplitude(p, t), -6 * 2.65, 6 * 2.65, epsabs=0, epsrel=1e-13)
    assert val == pytest.approx(area, abs=1e-8)


def test_fwhm_reference_value_and_scaling():
    assert pulse_fwhm_wavelength(2.65, 800.0) == pytest.approx(0.30, abs=0.005)
    assert pulse_fwhm_wavelength(5.3, 800.0) == pytest.approx(0.5 * pulse_fwhm_wavelength(2.65, 800.0), rel=1e-14)
    assert pulse_fwhm_wavelength(2.65, 1600.0) == pytest.approx(4 * pulse_fwhm_wavelength(2.65, 800.0), rel=1e-14)
    assert duration_from_fwhm(pulse_fwhm_wavelength(2.65, 800.0), 800.0) == pytest.approx(2.65, rel=1e-14)


def test_invalid_pulses():
    with pytest.raises(ValueError):
        PulseSpec(math.pi, 0.0)
    with pytest.raises(ValueError):
        PulseSpec(-1.0, 1.0)
    with pytest.raises(ValueError):
        PulseSpec.from_wavelength(math.pi, 800.0, -0.5)
    with pytest.raises(ValueError):
        PulseSpec.from_wavelength(math.pi, 800.0, -0.5, t_p=2.65, fwhm_nm=0.3)


def test_from_wavelength_forms_agree():
    a = PulseSpec.from_wavelength(math.pi, 800.0, -0.5, t_p=2.65)
    b = PulseSpec.from_wavelength(math.pi, 800.0, -0.5, fwhm_nm=pulse_fwhm_wavelength(2.65, 800.0))
    assert b.t_p == pytest.approx(a.t_p, rel=1e-14)
    assert a.detuning > 0  # blue laser


def test_numerical_spectrum_width_matches_closed_form():
    p = PulseSpec(math.pi, 2.65)
    dt = p.t_p / 20
    t = np.arange(-40 * p.t_p, 40 * p.t_p, dt)
    spec = np.abs(np.fft.fftshift(np.fft.fft(pulse_amplitude(p, t)) * dt)) ** 2 / (2 * math.pi)
    w = np.fft.fftshift(np.fft.fftfreq(t.size, dt)) * 2 * math.pi
    closed = pulse_spectrum(p, w)

    def fwhm(y):
        above = w[y >= 0.5 * y.max()]
        return above[-1] - above[0]

    assert fwhm(spec) == pytest.approx(fwhm(closed), rel=0.01)
    np.testing.assert_allclose(spec, closed, atol=1e-6 * closed.max())


def test_hamiltonian_hermitian_and_structure(rng):
    ham = SystemHamiltonian(PulseSpec(4 * math.pi, 2.65, 1.3), polaron_shift=0.6)
    for t in rng.uniform(-10, 10, 1000):
        H = ham(t)
        np.testing.assert_array_equal(H, H.conj().T)
    assert ham(0.0)[1, 1] == pytest.approx(0.6 - 1.3)
    undriven = SystemHamiltonian(PulseSpec(0.0, 2.65, 1.3))
    H = undriven(0.3)
    assert H[0, 1] == 0 and H[1, 0] == 0
    assert ham.window == (-3 * 2.65, 3 * 2.65)
