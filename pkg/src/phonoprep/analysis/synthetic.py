"""Seeded synthetic data with Poisson counting noise.

``peak_snr`` is the signal-to-noise ratio at the maximum of the noiseless
curve; with Poisson statistics that fixes the peak count to ``peak_snr**2``.
"""

from __future__ import annotations

import numpy as np

from .models import G2Model, SpectrumModel, TrplModel, g2_curve, lorentzian, spectrum_curve, trpl_curve


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _noisy(curve, peak_snr, rng, scale=True):
    curve = np.clip(np.asarray(curve, float), 0.0, None)
    if scale:
        peak = float(np.max(curve))
        if peak <= 0:
            return np.zeros_like(curve), 0.0
        factor = peak_snr**2 / peak
    else:
        factor = 1.0
    return rng.poisson(curve * factor).astype(float), factor


def synth_spectrum(model: SpectrumModel, wl, peak_snr: float = 50.0, seed=0):
    """Noisy spectrum; returns ``(counts, scale)`` where ``scale`` multiplies the model areas and baseline."""
    return _noisy(spectrum_curve(np.asarray(wl, float), model.vector()), peak_snr, _rng(seed))


def synth_trpl(model: TrplModel, t, peak_snr: float | None = None, seed=0):
    """Noisy decay histogram; counts are the model in absolute units unless ``peak_snr`` rescales them."""
    t = np.asarray(t, float)
    curve = trpl_curve(t, model.vector())
    curve = np.where(t < model.t01, model.f0, curve)
    return _noisy(curve, peak_snr, _rng(seed), scale=peak_snr is not None)


def trpl_from_weights(f0, peak, taus, weights_percent, t0=0.0) -> TrplModel:
    """Biexponential whose components carry the given percentages of ``A_i tau_i``."""
    (tau1, tau2), (w1, w2) = taus, weights_percent
    r1, r2 = w1 / tau1, w2 / tau2
    a1, a2 = peak * r1 / (r1 + r2), peak * r2 / (r1 + r2)
    return TrplModel(f0, a1, tau1, a2, tau2, t0, t0)


def synth_g2(model: G2Model, t, peak_snr: float | None = None, seed=0):
    """Noisy coincidence histogram."""
    curve = g2_curve(np.asarray(t, float), model.vector(), model.n_max)
    return _noisy(curve, peak_snr, _rng(seed), scale=peak_snr is not None)


def g2_model_for(g2_target: float, b2: float, tau1: float, tau2: float, t_rep: float, n_max: int = 10) -> G2Model:
    """Train with ``b1`` chosen so that the noiseless ``g2(0)`` equals ``g2_target``."""
    from scipy.optimize import brentq

    from .models import g2_zero

    def f(b1):
        return g2_zero([b1, b2, tau1, tau2, t_rep], n_max) - g2_target

    if not 0.0 <= g2_target < 1.0:
        raise ValueError("target g2(0) must lie in [0, 1)")
    if f(0.0) >= 0:
        return G2Model(0.0, b2, tau1, tau2, t_rep, n_max)
    b1 = brentq(f, 0.0, b2, xtol=1e-12)
    return G2Model(b1, b2, tau1, tau2, t_rep, n_max)


def synth_frames(
    n_frames: int,
    mu: float,
    sigma: float,
    *,
    fwhm: float = 0.108,
    peak_snr: float = 30.0,
    baseline: float = 20.0,
    half_span: float = 0.6,
    step: float = 0.01,
    seed=0,
):
    """Spectra of a Lorentzian ZPL whose center is drawn from ``N(mu, sigma)`` per frame.

    Returns ``(frames, true_centers)`` with ``frames`` a list of ``(wl, counts)``.
    """
    rng = _rng(seed)
    wl = mu + np.arange(-half_span, half_span + 0.5 * step, step)
    peak = peak_snr**2
    area = peak * np.pi * fwhm / 2
    centers = mu + sigma * rng.standard_normal(n_frames)
    frames = []
    for c in centers:
        curve = lorentzian(wl, c, fwhm, area) + baseline
        frames.append((wl.copy(), rng.poisson(curve).astype(float)))
    return frames, centers
