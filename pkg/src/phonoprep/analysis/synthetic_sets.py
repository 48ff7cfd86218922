"""Named synthetic data sets with recorded generator parameters.

Each set is a data file plus ``generator.json`` holding the exact generator
inputs and the noiseless reference quantities a fit should recover.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import write_frames, write_json, write_series
from .models import SpectrumModel
from .synthetic import g2_model_for, synth_frames, synth_g2, synth_spectrum, synth_trpl, trpl_from_weights

KINDS = ("spectrum", "trpl", "g2", "diffusion")

SPECTRUM = {"zpl_center": 800.0, "zpl_fwhm": 0.108, "psb_center": 800.35, "psb_fwhm": 0.782,
            "debye_waller": 0.551, "baseline_fraction": 0.02, "peak_snr": 50.0}
TRPL = {"taus_ns": (1.33, 8.31), "weights_percent": (80.4, 19.6), "peak_snr": 50.0, "background_fraction": 0.005,
        "bin_ns": 0.02, "t_min_ns": -2.0, "t_max_ns": 50.0}
G2 = {"g2_zero": 0.079, "t_rep_ns": 12.5, "tau1_ns": 0.8, "tau2_ns": 2.0, "peak_snr": 40.0, "bin_ns": 0.05,
      "periods_each_side": 6.5}
DIFFUSION = {"n_frames": 300, "mu_nm": 800.0, "sigma_nm": 0.0129, "zpl_fwhm_nm": 0.108, "peak_snr": 30.0}


def _spectrum(out: Path, rng) -> list[Path]:
    p = SPECTRUM
    dwf = p["debye_waller"]
    model = SpectrumModel(p["zpl_center"], p["zpl_fwhm"], dwf, p["psb_center"], p["psb_fwhm"], 1 - dwf, 0.0)
    wl = np.round(np.arange(797.0, 803.0 + 1e-9, 0.01), 4)
    peak = float(np.max(model(wl)))
    model = SpectrumModel(*model.vector()[:6], p["baseline_fraction"] * peak)
    counts, _ = synth_spectrum(model, wl, p["peak_snr"], seed=rng)
    data = out / "spectrum.csv"
    write_series(data, wl, counts, "wavelength_nm,counts")
    return [data, _record(out, "spectrum", p, {"debye_waller": dwf, "zpl_fwhm_nm": p["zpl_fwhm"],
                                                "psb_fwhm_nm": p["psb_fwhm"]})]


def _trpl(out: Path, rng) -> list[Path]:
    p = TRPL
    model = trpl_from_weights(p["background_fraction"], 1.0, p["taus_ns"], p["weights_percent"])
    t = np.round(np.arange(p["t_min_ns"], p["t_max_ns"] + 1e-9, p["bin_ns"]), 6)
    counts, _ = synth_trpl(model, t, p["peak_snr"], seed=rng)
    data = out / "trpl.csv"
    write_series(data, t, counts, "delay_ns,counts")
    return [data, _record(out, "trpl", p, {"tau1_ns": p["taus_ns"][0], "tau2_ns": p["taus_ns"][1],
                                            "weight1_percent": p["weights_percent"][0]})]


def _g2(out: Path, rng) -> list[Path]:
    p = G2
    model = g2_model_for(p["g2_zero"], 1.0, p["tau1_ns"], p["tau2_ns"], p["t_rep_ns"])
    half = p["periods_each_side"] * p["t_rep_ns"]
    t = np.round(np.arange(-half, half + 1e-9, p["bin_ns"]), 6)
    counts, _ = synth_g2(model, t, p["peak_snr"], seed=rng)
    data = out / "g2.csv"
    write_series(data, t, counts, "delay_ns,coincidences")
    return [data, _record(out, "g2", p, {"g2_zero": float(model.g2_zero()), "t_rep_ns": p["t_rep_ns"]})]


def _diffusion(out: Path, rng) -> list[Path]:
    p = DIFFUSION
    frames, centers = synth_frames(p["n_frames"], p["mu_nm"], p["sigma_nm"], fwhm=p["zpl_fwhm_nm"],
                                   peak_snr=p["peak_snr"], seed=rng)
    data = out / "frames.csv"
    write_frames(data, frames)
    return [data, _record(out, "diffusion", p, {"sigma_nm": p["sigma_nm"], "mu_nm": p["mu_nm"],
                                                 "sample_sigma_nm": float(np.std(centers, ddof=1))})]


def _record(out: Path, kind: str, params: dict, expected: dict) -> Path:
    path = out / "generator.json"
    write_json(path, {"kind": kind, "parameters": params, "expected": expected})
    return path


def write_set(kind: str, out, seed: int = 2024) -> list[Path]:
    """Generate one named set into ``out``; returns the written paths."""
    if kind not in KINDS:
        raise ValueError(f"unknown synthetic set {kind!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    return {"spectrum": _spectrum, "trpl": _trpl, "g2": _g2, "diffusion": _diffusion}[kind](out, rng)
