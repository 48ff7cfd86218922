"""Unit conventions and spectroscopic conversions.

Internal units: time in ps, angular frequency in rad/ps, wavelength in nm,
energy in meV, temperature in K.  Every physical constant used by the
package lives in :data:`CONSTANTS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np


@dataclass(frozen=True)
class _Constants:
    # CODATA 2018 (exact where SI defines them)
    hbar_meV_ps: float = 0.6582119569  # meV ps
    c_nm_per_ps: float = 299792.458  # nm / ps
    c_m_per_s: float = 299792458.0
    kB_meV_per_K: float = 0.08617333262  # meV / K
    hc_eV_nm: float = 1239.8419843320026  # eV nm

    @property
    def hc_meV_nm(self) -> float:
        return self.hc_eV_nm * 1e3


CONSTANTS = _Constants()

#: Read-only view, handy for manifests and reports.
CONSTANT_TABLE = MappingProxyType(
    {
        "hbar_meV_ps": CONSTANTS.hbar_meV_ps,
        "c_nm_per_ps": CONSTANTS.c_nm_per_ps,
        "kB_meV_per_K": CONSTANTS.kB_meV_per_K,
        "hc_eV_nm": CONSTANTS.hc_eV_nm,
    }
)

FREQUENCY_CONVENTIONS = ("angular", "ordinary")


def thz_to_rad_per_ps(value: float, convention: str = "angular") -> float:
    """Interpret a frequency quoted in "THz".

    ``convention="angular"`` reads the number directly as rad/ps;
    ``"ordinary"`` treats it as cycles/ps and multiplies by 2*pi.
    """
    if convention == "angular":
        return float(value)
    if convention == "ordinary":
        return 2.0 * math.pi * float(value)
    raise ValueError(f"unknown frequency convention {convention!r}; expected one of {FREQUENCY_CONVENTIONS}")


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def energy_to_angular(energy_meV):
    """meV -> rad/ps."""
    return _out(np.asarray(energy_meV, dtype=float) / CONSTANTS.hbar_meV_ps)


def angular_to_energy(omega):
    """rad/ps -> meV."""
    return _out(np.asarray(omega, dtype=float) * CONSTANTS.hbar_meV_ps)


def kelvin_to_angular(temperature_K: float) -> float:
    """Thermal frequency k_B T / hbar in rad/ps."""
    return CONSTANTS.kB_meV_per_K * temperature_K / CONSTANTS.hbar_meV_ps


def _check_wavelength(lambda_x: float) -> None:
    if not np.isfinite(lambda_x) or lambda_x <= 0:
        raise ValueError(f"reference wavelength must be positive and finite, got {lambda_x!r}")


def energy_to_detuning(energy_meV, lambda_x: float):
    """Wavelength detuning of a laser lying ``energy_meV`` above the emitter.

    Uses the exact relation ``dl = hc / (hc/lambda_x + E) - lambda_x``; a
    positive energy offset (blue laser) gives a negative detuning.
    """
    _check_wavelength(lambda_x)
    energy = np.asarray(energy_meV, dtype=float)
    if not np.all(np.isfinite(energy)):
        raise ValueError("energy must be finite")
    hc = CONSTANTS.hc_meV_nm
    photon = hc / lambda_x + energy
    if np.any(photon <= 0):
        raise ValueError("energy offset makes the laser photon energy non-positive")
    return _out(hc / photon - lambda_x)


def detuning_to_energy(delta_lambda, lambda_x: float):
    """Inverse of :func:`energy_to_detuning` (meV)."""
    _check_wavelength(lambda_x)
    dl = np.asarray(delta_lambda, dtype=float)
    lam_laser = lambda_x + dl
    if np.any(lam_laser <= 0):
        raise ValueError("laser wavelength lambda_x + delta_lambda must be positive")
    hc = CONSTANTS.hc_meV_nm
    return _out(hc / lam_laser - hc / lambda_x)


def detuning_wavelength_to_frequency(delta_lambda, lambda_x: float):
    """Wavelength detuning (nm) -> angular frequency detuning (rad/ps).

    Inverts ``dl = 2 pi c (1/w_laser - 1/w_x)``, so that a blue laser
    (``dl < 0``) has ``dw = w_laser - w_x > 0``.
    """
    _check_wavelength(lambda_x)
    dl = np.asarray(delta_lambda, dtype=float)
    lam_laser = lambda_x + dl
    if np.any(lam_laser <= 0):
        raise ValueError("laser wavelength lambda_x + delta_lambda must be positive")
    two_pi_c = 2.0 * math.pi * CONSTANTS.c_nm_per_ps
    return _out(two_pi_c / lam_laser - two_pi_c / lambda_x)


def frequency_to_detuning_wavelength(delta_omega, lambda_x: float):
    """Angular frequency detuning (rad/ps) -> wavelength detuning (nm)."""
    _check_wavelength(lambda_x)
    dw = np.asarray(delta_omega, dtype=float)
    two_pi_c = 2.0 * math.pi * CONSTANTS.c_nm_per_ps
    w_laser = two_pi_c / lambda_x + dw
    if np.any(w_laser <= 0):
        raise ValueError("laser frequency must stay positive")
    return _out(two_pi_c / w_laser - lambda_x)


def first_order_detuning(energy_meV, lambda_x: float):
    """Linearised ``-lambda_x**2 E / hc``; only for comparison with the exact form."""
    _check_wavelength(lambda_x)
    return _out(-(lambda_x**2) * np.asarray(energy_meV, dtype=float) / CONSTANTS.hc_meV_nm)


def length_fwhm_nm_to_energy_meV(fwhm_nm: float, lambda_x: float) -> float:
    """Linewidth in nm around ``lambda_x`` -> linewidth in meV (small-width limit)."""
    _check_wavelength(lambda_x)
    return CONSTANTS.hc_meV_nm * fwhm_nm / lambda_x**2
