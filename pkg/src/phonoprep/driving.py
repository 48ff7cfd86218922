"""Gaussian pulse and the rotating-frame two-level Hamiltonian."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import CONSTANTS, detuning_wavelength_to_frequency

_SQRT_2LN2 = math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian drive ``Omega(t) = area / (sqrt(pi) t_p) exp(-(t/t_p)^2)``.

    ``detuning`` is ``w_laser - w_X`` in rad/ps, measured from the
    polaron-shifted exciton line.
    """

    area: float
    t_p: float
    detuning: float = 0.0

    def __post_init__(self):
        if not self.t_p > 0:
            raise ValueError("pulse duration t_p must be positive")
        if not self.area >= 0:
            raise ValueError("pulse area must be non-negative")

    @classmethod
    def from_wavelength(
        cls, area: float, lambda_x: float, delta_lambda: float, *, t_p: float | None = None, fwhm_nm: float | None = None
    ) -> "PulseSpec":
        """Build from a wavelength detuning and either ``t_p`` or the spectral FWHM."""
        if (t_p is None) == (fwhm_nm is None):
            raise ValueError("give exactly one of t_p or fwhm_nm")
        if t_p is None:
            t_p = duration_from_fwhm(fwhm_nm, lambda_x)
        return cls(area, t_p, detuning_wavelength_to_frequency(delta_lambda, lambda_x))

    @property
    def peak(self) -> float:
        return self.area / (math.sqrt(math.pi) * self.t_p)

    @property
    def window(self) -> tuple[float, float]:
        """Propagation interval ``[-3 t_p, +3 t_p]``."""
        return -3.0 * self.t_p, 3.0 * self.t_p

    def amplitude(self, t):
        return pulse_amplitude(self, t)


def pulse_amplitude(pulse: PulseSpec, t):
    """Rabi frequency envelope ``Omega(t)`` in rad/ps."""
    t = np.asarray(t, dtype=float)
    out = pulse.peak * np.exp(-((t / pulse.t_p) ** 2))
    return float(out) if out.ndim == 0 else out


def pulse_fwhm_wavelength(pulse_or_tp, lambda_x: float) -> float:
    """Spectral FWHM in nm, ``lambda_x^2 sqrt(2 ln 2) / (pi c t_p)``."""
    t_p = pulse_or_tp.t_p if isinstance(pulse_or_tp, PulseSpec) else float(pulse_or_tp)
    if t_p <= 0:
        raise ValueError("t_p must be positive")
    return lambda_x**2 * _SQRT_2LN2 / (math.pi * CONSTANTS.c_nm_per_ps * t_p)


def duration_from_fwhm(fwhm_nm: float, lambda_x: float) -> float:
    """Inverse of :func:`pulse_fwhm_wavelength`: ``t_p`` in ps."""
    if fwhm_nm <= 0:
        raise ValueError("FWHM must be positive")
    return lambda_x**2 * _SQRT_2LN2 / (math.pi * CONSTANTS.c_nm_per_ps * fwhm_nm)


def pulse_spectrum(pulse: PulseSpec, omega):
    """``|Omega_hat(w)|^2 = area^2 / (2 pi) exp(-t_p^2 w^2 / 2)``."""
    omega = np.asarray(omega, dtype=float)
    return pulse.area**2 / (2 * math.pi) * np.exp(-0.5 * pulse.t_p**2 * omega**2)


@dataclass(frozen=True)
class SystemHamiltonian:
    """Rotating-frame generator in the ``(|G>, |X>)`` basis.

    ``H(t) = (polaron_shift - detuning) |X><X| + Omega(t)/2 (|X><G| + h.c.)``.
    The phonon baths lower the bare ``|X>`` energy by the polaron shift
    during propagation, so adding it back here puts the dressed resonance
    at ``detuning = 0``.  Pass ``polaron_shift=0`` for a bath-free emitter.
    """

    pulse: PulseSpec
    polaron_shift: float = 0.0

    @property
    def window(self) -> tuple[float, float]:
        return self.pulse.window

    def diagonal(self) -> float:
        return self.polaron_shift - self.pulse.detuning

    def __call__(self, t: float) -> np.ndarray:
        half = 0.5 * pulse_amplitude(self.pulse, t)
        return np.array([[0.0, half], [half, self.diagonal()]], dtype=complex)
