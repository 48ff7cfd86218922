"""Time-resolved photoluminescence: one or two exponentials on a constant background."""

from __future__ import annotations

import numpy as np

from ..lsq import levenberg_marquardt
from .models import TrplModel, trpl_curve
from .results import DataError, FitResult, check_series, make_result, poisson_sigma

DEGENERACY_TOL = 1e-3
COVERAGE_FACTOR = 3.0


def _log_slope_tau(t, y):
    """Decay constant from a straight-line fit of ``log y`` (positive samples only)."""
    keep = y > 0
    if np.count_nonzero(keep) < 3:
        return None
    slope = np.polyfit(t[keep] - t[keep][0], np.log(y[keep]), 1, w=np.sqrt(y[keep]))[0]
    return -1.0 / slope if slope < 0 else None


def initial_trpl(t, counts, n_exp: int = 2) -> TrplModel:
    """Seed from the peak onward: baseline from the last decile, tau from log-linear slopes."""
    t, counts = np.asarray(t, float), np.asarray(counts, float)
    i0 = int(np.argmax(counts))
    t, y = t[i0:], counts[i0:]
    t0 = float(t[0])
    f0 = float(np.median(y[-max(len(y) // 10, 3):]))
    s = y - f0
    span = t[-1] - t0
    peak = max(float(s[0]), 1.0)
    # tail: samples between 30% and 3% of the peak signal (or the latter half if too few)
    tail = (s < 0.3 * peak) & (s > 0.03 * peak)
    if np.count_nonzero(tail) < 5:
        tail = t > t0 + 0.5 * span
    tau_long = _log_slope_tau(t[tail], s[tail]) or span / 5
    tau_long = float(np.clip(tau_long, 1e-3 * span, span))
    if n_exp == 1:
        return TrplModel(max(f0, 0.0), peak, tau_long, 0.0, 1.0, t0, t0)
    # long component extrapolated back to the peak; the remainder seeds the fast one
    a_long = float(np.clip(np.exp(np.mean(np.log(np.clip(s[tail], 1e-12, None)) + (t[tail] - t0) / tau_long)), 0, peak))
    fast = s - a_long * np.exp(-(t - t0) / tau_long)
    early = (fast > 0.1 * max(fast[0], 1.0)) & (t < t0 + tau_long)
    tau_short = _log_slope_tau(t[early], fast[early]) if np.count_nonzero(early) >= 3 else None
    if tau_short is None or not tau_short < 0.7 * tau_long:
        tau_short = tau_long / 5
    a_short = max(float(fast[0]), 0.1 * peak)
    return TrplModel(max(f0, 0.0), a_short, float(tau_short), min(a_long, peak), tau_long, t0, t0)


def relative_weights(model: TrplModel) -> tuple[float, float]:
    """Percent of the integrated decay counts ``A_i tau_i`` carried by each exponential."""
    w1 = model.a1 * model.tau1
    w2 = model.a2 * model.tau2
    total = w1 + w2
    if total <= 0:
        raise ValueError("decay amplitudes vanish")
    return 100.0 * w1 / total, 100.0 * w2 / total


def fit_trpl(t, counts, init: TrplModel | None = None, n_exp: int = 2, *, max_iter: int = 500) -> FitResult:
    """Fit the decay from the histogram maximum onward.

    Offsets are held at the time of the maximum, where the amplitudes are
    the values of each component. Decay constants are reported sorted, so
    ``tau1`` is the fast component.
    """
    if n_exp not in (1, 2):
        raise ValueError("n_exp must be 1 or 2")
    t, counts = check_series(t, counts, min_points=10, what="decay")
    if np.ptp(counts) <= 0:
        raise DataError("decay: counts are flat")
    i0 = int(np.argmax(counts))
    tt, yy = t[i0:], counts[i0:]
    if tt.size < 2 * n_exp + 3:
        raise DataError("decay: too few samples after the maximum")
    seed = init or initial_trpl(t, counts, n_exp)
    t0 = float(tt[0])
    span = float(tt[-1] - t0)
    longest = seed.tau1 if n_exp == 1 else max(seed.tau1, seed.tau2)
    if span < COVERAGE_FACTOR * longest:
        raise DataError(
            f"decay: data cover {span:.3g} ns after the maximum, need {COVERAGE_FACTOR:g} x {longest:.3g} ns"
        )
    sigma = poisson_sigma(yy)
    step = float(np.min(np.diff(tt)))

    if n_exp == 1:
        names = ("f0", "a1", "tau1")
        p0 = [seed.f0, seed.a1, seed.tau1]
        lower, upper = [-np.inf, 0.0, 0.05 * step], [np.inf, np.inf, 100 * span]

        def full(p):
            return [p[0], p[1], p[2], 0.0, 1.0, t0, t0]
    else:
        names = ("f0", "a1", "tau1", "a2", "tau2")
        p0 = [seed.f0, seed.a1, seed.tau1, seed.a2, seed.tau2]
        lower = [-np.inf, 0.0, 0.05 * step, 0.0, 0.05 * step]
        upper = [np.inf, np.inf, 100 * span, np.inf, 100 * span]

        def full(p):
            return [p[0], p[1], p[2], p[3], p[4], t0, t0]

    def residual(p):
        return (trpl_curve(tt, full(p)) - yy) / sigma

    lsq = levenberg_marquardt(residual, p0, lower=lower, upper=upper, max_iter=max_iter)
    x, err = lsq.x.copy(), lsq.stderr.copy()
    if n_exp == 2 and x[2] > x[4]:
        x[[1, 2, 3, 4]] = x[[3, 4, 1, 2]]
        err[[1, 2, 3, 4]] = err[[3, 4, 1, 2]]
    lsq.x, lsq.stderr = x, err
    fixed = {"t01": t0, "t02": t0}
    if n_exp == 1:
        fixed.update(a2=0.0, tau2=float("nan"))
    result = make_result(f"trpl{n_exp}", names, lsq, fixed=fixed)
    if n_exp == 2:
        model = TrplModel(*(result[n] for n in TrplModel.names))
        w1, w2 = relative_weights(model)
        result.extras.update(
            weight1_percent=w1,
            weight2_percent=w2,
            tau_degenerate=bool(abs(x[2] - x[4]) / x[2] < DEGENERACY_TOL),
        )
    else:
        result.extras.update(weight1_percent=100.0, weight2_percent=0.0, tau_degenerate=False)
    result.extras["fit_start_ns"] = t0
    return result
