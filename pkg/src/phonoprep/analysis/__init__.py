"""Fitting toolkit for emission spectra, decays, coincidence trains and spectral diffusion."""

from .diffusion import BIN_WIDTH_NM, DiffusionResult, fit_center_histogram, frame_centers, spectral_diffusion
from .g2 import fit_g2, initial_g2, peak_spacing
from .io import read_frames, read_series, read_table, write_frames, write_json, write_series
from .models import (
    G2Model,
    SpectrumModel,
    TrplModel,
    g2_curve,
    g2_zero,
    gaussian,
    lorentzian,
    spectrum_curve,
    trpl_curve,
)
from .results import DataError, FitResult, poisson_sigma
from .spectrum import debye_waller, fit_lorentzian, fit_spectrum, initial_spectrum
from .synthetic import g2_model_for, synth_frames, synth_g2, synth_spectrum, synth_trpl, trpl_from_weights
from .trpl import fit_trpl, initial_trpl, relative_weights

__all__ = [
    "BIN_WIDTH_NM",
    "DataError",
    "DiffusionResult",
    "FitResult",
    "G2Model",
    "SpectrumModel",
    "TrplModel",
    "debye_waller",
    "fit_center_histogram",
    "fit_g2",
    "fit_lorentzian",
    "fit_spectrum",
    "fit_trpl",
    "frame_centers",
    "g2_curve",
    "g2_model_for",
    "g2_zero",
    "gaussian",
    "initial_g2",
    "initial_spectrum",
    "initial_trpl",
    "lorentzian",
    "peak_spacing",
    "poisson_sigma",
    "read_frames",
    "read_series",
    "read_table",
    "relative_weights",
    "spectral_diffusion",
    "spectrum_curve",
    "synth_frames",
    "synth_g2",
    "synth_spectrum",
    "synth_trpl",
    "trpl_curve",
    "trpl_from_weights",
    "write_frames",
    "write_json",
    "write_series",
]
