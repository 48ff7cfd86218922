"""Pulsed second-order correlation histograms."""

from __future__ import annotations

import math

import numpy as np

from ..lsq import levenberg_marquardt
from .models import G2Model, g2_curve, g2_zero
from .results import DataError, FitResult, check_series, make_result, poisson_sigma

MIN_SIDE_PEAKS = 5
SPACING_TOL = 0.05


def peak_spacing(t, counts) -> float:
    """Repetition period from the first strong maximum of the histogram autocorrelation."""
    t, counts = np.asarray(t, float), np.asarray(counts, float)
    step = float(np.median(np.diff(t)))
    s = counts - counts.mean()
    n = s.size
    ac = np.correlate(s, s, mode="full")[n - 1:]
    ac = ac / (n - np.arange(n))
    # skip the central lobe, then take the largest autocorrelation over the next lags
    neg = np.nonzero(ac < 0)[0]
    if neg.size == 0:
        raise DataError("coincidences: no periodic structure found")
    start = int(neg[0])
    window = ac[start : n // 2]
    if window.size < 3 or np.max(window) <= 0:
        raise DataError("coincidences: no periodic structure found")
    # first local maximum reaching 70% of the strongest one (avoids picking a multiple)
    strong = np.nonzero(window >= 0.7 * np.max(window))[0]
    k = start + int(strong[0])
    while k + 1 < n // 2 and ac[k + 1] > ac[k]:
        k += 1
    # parabolic refinement of the maximum
    if 0 < k < n - 1:
        a, b, c = ac[k - 1], ac[k], ac[k + 1]
        den = a - 2 * b + c
        frac = 0.5 * (a - c) / den if den != 0 else 0.0
    else:
        frac = 0.0
    return (k + frac) * step


def initial_g2(t, counts, n_max: int = 10) -> G2Model:
    t, counts = np.asarray(t, float), np.asarray(counts, float)
    t_rep = peak_spacing(t, counts)
    half = 0.5 * t_rep
    base = float(np.percentile(counts, 5))
    side_max = []
    for n in range(1, n_max + 1):
        for sgn in (-1, 1):
            sel = np.abs(t - sgn * n * t_rep) < 0.25 * t_rep
            if np.any(sel):
                side_max.append(float(np.max(counts[sel])))
    if not side_max:
        raise DataError("coincidences: no side peaks in range")
    side = float(np.median(side_max)) - base
    centre = float(np.max(counts[np.abs(t) < 0.25 * t_rep])) - base
    # decay constant from the half width of the strongest side peak
    n_star = 1
    sel = np.abs(t - n_star * t_rep) < half
    tt, yy = t[sel] - n_star * t_rep, counts[sel] - base
    above = tt[yy > 0.5 * side]
    hwhm = 0.5 * (above.max() - above.min()) if above.size >= 2 else 0.05 * t_rep
    tau_e = max(hwhm / math.log(2), 2 * float(np.median(np.diff(t))))
    b2 = max(side, 1.0) / 2
    b1 = max(centre, 0.0) / 2
    return G2Model(b1, b2, 0.5 * tau_e, 2.0 * tau_e, t_rep, n_max)


def fit_g2(t, counts, init: G2Model | None = None, *, max_iter: int = 500) -> tuple[FitResult, float]:
    """Fit the pulsed coincidence train and return ``(fit, g2(0))``.

    ``tau1`` and ``tau2`` enter symmetrically and are reported sorted.
    """
    t, counts = check_series(t, counts, min_points=50, what="coincidences")
    if np.ptp(counts) <= 0:
        raise DataError("coincidences: histogram is flat")
    spacing = peak_spacing(t, counts)
    seed = init or initial_g2(t, counts)
    reach = min(-t[0], t[-1]) / spacing
    if reach < MIN_SIDE_PEAKS - 0.25:
        raise DataError(f"coincidences: histogram spans {reach:.1f} periods each side, need {MIN_SIDE_PEAKS}")
    n_max = max(seed.n_max, int(math.ceil(max(-t[0], t[-1]) / spacing)) + 1)
    sigma = poisson_sigma(counts)
    step = float(np.median(np.diff(t)))
    lower = [0.0, 0.0, 0.05 * step, 0.05 * step, 0.8 * spacing]
    upper = [np.inf, np.inf, 2 * spacing, 2 * spacing, 1.2 * spacing]

    def residual(p):
        return (g2_curve(t, p, n_max) - counts) / sigma

    lsq = levenberg_marquardt(residual, seed.vector(), lower=lower, upper=upper, max_iter=max_iter)
    x, err = lsq.x.copy(), lsq.stderr.copy()
    if x[2] > x[3]:
        x[[2, 3]] = x[[3, 2]]
        err[[2, 3]] = err[[3, 2]]
    lsq.x, lsq.stderr = x, err
    result = make_result("g2", G2Model.names, lsq)
    value = g2_zero(x, n_max)
    mismatch = abs(x[4] - spacing) / spacing
    result.extras.update(
        g2_zero=value,
        n_max=n_max,
        peak_spacing=spacing,
        t_rep_mismatch=bool(mismatch > SPACING_TOL),
    )
    return result, value
