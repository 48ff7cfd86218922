"""Line-shape and decay models used by the fitting toolkit.

All models are plain functions of the abscissa and a parameter vector so
that fits, synthetic generators and tests share a single definition.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def lorentzian(x, center: float, fwhm: float, area: float):
    """Area-normalised Lorentzian times ``area``."""
    hw = 0.5 * fwhm
    return area * hw / math.pi / ((np.asarray(x) - center) ** 2 + hw * hw)


def gaussian(x, center: float, fwhm: float, area: float):
    """Area-normalised Gaussian times ``area``."""
    sigma = fwhm / _FWHM_PER_SIGMA
    return area / (sigma * math.sqrt(2 * math.pi)) * np.exp(-0.5 * ((np.asarray(x) - center) / sigma) ** 2)


@dataclass(frozen=True)
class SpectrumModel:
    """Zero-phonon line (Lorentzian) plus phonon sideband (Gaussian) on a flat baseline.

    Centers and FWHMs in nm, areas in counts x nm.
    """

    zpl_center: float
    zpl_fwhm: float
    zpl_area: float
    psb_center: float
    psb_fwhm: float
    psb_area: float
    baseline: float = 0.0

    names = ("zpl_center", "zpl_fwhm", "zpl_area", "psb_center", "psb_fwhm", "psb_area", "baseline")

    def __post_init__(self):
        if not (self.zpl_fwhm > 0 and self.psb_fwhm > 0):
            raise ValueError("FWHMs must be positive")
        if self.zpl_area < 0 or self.psb_area < 0:
            raise ValueError("areas must be non-negative")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names], dtype=float)

    @classmethod
    def from_vector(cls, p) -> "SpectrumModel":
        return cls(*map(float, p))

    def __call__(self, wl):
        return spectrum_curve(wl, self.vector())

    def as_dict(self) -> dict:
        return asdict(self)


def spectrum_curve(wl, p):
    c_l, w_l, a_l, c_g, w_g, a_g, base = p
    return lorentzian(wl, c_l, w_l, a_l) + gaussian(wl, c_g, w_g, a_g) + base


@dataclass(frozen=True)
class TrplModel:
    """``F0 + A1 exp(-(t - t01)/tau1) + A2 exp(-(t - t02)/tau2)``, times in ns."""

    f0: float
    a1: float
    tau1: float
    a2: float = 0.0
    tau2: float = 1.0
    t01: float = 0.0
    t02: float = 0.0

    names = ("f0", "a1", "tau1", "a2", "tau2", "t01", "t02")

    def __post_init__(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("decay constants must be positive")
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError("amplitudes must be non-negative")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names], dtype=float)

    @classmethod
    def from_vector(cls, p) -> "TrplModel":
        return cls(*map(float, p))

    def __call__(self, t):
        return trpl_curve(t, self.vector())


def trpl_curve(t, p):
    f0, a1, tau1, a2, tau2, t01, t02 = p
    t = np.asarray(t, dtype=float)
    return f0 + a1 * np.exp(-(t - t01) / tau1) + a2 * np.exp(-(t - t02) / tau2)


@dataclass(frozen=True)
class G2Model:
    """Pulsed coincidence train.

    ``F(t) = B1 [e^{-|t|/tau1} + e^{-|t|/tau2}]
    + B2 sum_{0<|n|<=n_max} [e^{-|t + n T|/tau1} + e^{-|t + n T|/tau2}]``
    with ``T = t_rep``; times in ns.
    """

    b1: float
    b2: float
    tau1: float
    tau2: float
    t_rep: float
    n_max: int = 10

    names = ("b1", "b2", "tau1", "tau2", "t_rep")

    def __post_init__(self):
        if not self.t_rep > 0:
            raise ValueError("repetition period must be positive")
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("peak amplitudes must be non-negative")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("decay constants must be positive")
        if self.n_max < 1:
            raise ValueError("need at least one side peak")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.names], dtype=float)

    @classmethod
    def from_vector(cls, p, n_max: int = 10) -> "G2Model":
        return cls(*map(float, p), n_max=n_max)

    def __call__(self, t):
        return g2_curve(t, self.vector(), self.n_max)

    def g2_zero(self) -> float:
        return g2_zero(self.vector(), self.n_max)


def _pair(t, tau1, tau2):
    a = np.abs(t)
    return np.exp(-a / tau1) + np.exp(-a / tau2)


def g2_curve(t, p, n_max: int = 10):
    b1, b2, tau1, tau2, t_rep = p
    t = np.asarray(t, dtype=float)
    out = b1 * _pair(t, tau1, tau2)
    for n in range(1, n_max + 1):
        out = out + b2 * (_pair(t + n * t_rep, tau1, tau2) + _pair(t - n * t_rep, tau1, tau2))
    return out


def g2_zero(p, n_max: int = 10) -> float:
    """``F(0) / max_t F(t)`` of the fitted train.

    The cusps of the train sit at multiples of ``t_rep``, so the maximum is
    searched on those points and refined on a dense grid over one period.
    """
    b1, b2, tau1, tau2, t_rep = p
    cand = t_rep * np.arange(-n_max, n_max + 1)
    dense = np.linspace(-t_rep, t_rep, 4001)
    vals = np.concatenate([g2_curve(cand, p, n_max), g2_curve(dense, p, n_max)])
    peak = float(np.max(vals))
    if peak <= 0:
        raise ValueError("coincidence model vanishes everywhere")
    return float(g2_curve(0.0, p, n_max)) / peak
