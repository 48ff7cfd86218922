"""Spectral-diffusion statistics from a time-ordered stack of spectra."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf as _erf

from ..lsq import FitConvergenceError, levenberg_marquardt
from .results import DataError
from .spectrum import fit_lorentzian

BIN_WIDTH_NM = 0.005
MAX_EXCLUDED = 0.20
MIN_FRAMES = 30


@dataclass
class DiffusionResult:
    """Mean and spread of the per-frame ZPL centers.

    Unpacks as ``(mu, sigma, centers)``.
    """

    mu: float
    sigma: float
    centers: np.ndarray
    excluded: list[int] = field(default_factory=list)
    n_frames: int = 0
    method: str = "gaussian"
    bin_edges: np.ndarray | None = None
    histogram: np.ndarray | None = None

    def __iter__(self):
        return iter((self.mu, self.sigma, self.centers))

    def to_record(self) -> dict:
        return {
            "model": "spectral_diffusion",
            "mu_nm": self.mu,
            "sigma_nm": self.sigma,
            "method": self.method,
            "n_frames": self.n_frames,
            "n_excluded": len(self.excluded),
            "excluded_frames": list(self.excluded),
            "centers_nm": [float(c) for c in self.centers],
        }


def _frame_center(frame):
    wl, counts = frame
    try:
        fit = fit_lorentzian(wl, counts)
    except (FitConvergenceError, DataError, ValueError):
        return None
    c = fit["center"]
    wl = np.asarray(wl, float)
    if not (np.min(wl) < c < np.max(wl)) or not math.isfinite(c):
        return None
    return c


def frame_centers(frames, jobs: int = 1) -> list[float | None]:
    """Per-frame Lorentzian centers; ``None`` marks a frame whose fit failed."""
    frames = list(frames)
    if jobs > 1 and len(frames) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_frame_center, frames, chunksize=max(1, len(frames) // (4 * jobs))))
    return [_frame_center(f) for f in frames]


def center_histogram(centers, bin_width: float = BIN_WIDTH_NM):
    """Counts on bins of ``bin_width`` aligned to integer multiples of the width."""
    c = np.asarray(centers, float)
    lo = math.floor(c.min() / bin_width)
    hi = math.floor(c.max() / bin_width) + 1
    edges = bin_width * np.arange(lo, hi + 1)
    counts, _ = np.histogram(c, bins=edges)
    return edges, counts


def fit_center_histogram(centers, bin_width: float = BIN_WIDTH_NM):
    """Gaussian fit of the binned centers; moments when fewer than three bins are populated.

    Returns ``(mu, sigma, method, edges, counts)``.
    """
    c = np.asarray(centers, float)
    edges, counts = center_histogram(c, bin_width)
    mu_m, sd_m = float(np.mean(c)), float(np.std(c, ddof=1)) if c.size > 1 else 0.0
    if np.count_nonzero(counts) < 3:
        return mu_m, sd_m, "moments", edges, counts
    # one empty bin each side constrains the tails
    e = np.concatenate([[edges[0] - bin_width], edges, [edges[-1] + bin_width]])
    y = np.concatenate([[0], counts, [0]]).astype(float)
    p0 = [mu_m, max(sd_m, 0.5 * bin_width), float(c.size)]

    def residual(p):
        # Poisson deviance residuals of the bin-integrated Gaussian (maximum likelihood)
        cdf = 0.5 * (1.0 + _erf((e - p[0]) / (math.sqrt(2.0) * p[1])))
        mean = np.maximum(p[2] * np.diff(cdf), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(y > 0, y * np.log(y / mean), 0.0)
        dev = np.maximum(2.0 * (mean - y + term), 0.0)
        return np.sign(y - mean) * np.sqrt(dev)

    try:
        lsq = levenberg_marquardt(
            residual, p0, lower=[e[0], 1e-3 * bin_width, 0.0], upper=[e[-1], np.ptp(e), np.inf]
        )
    except (FitConvergenceError, ValueError):
        return mu_m, sd_m, "moments", edges, counts
    return float(lsq.x[0]), float(lsq.x[1]), "gaussian", edges, counts


def spectral_diffusion(
    frames,
    *,
    bin_width: float = BIN_WIDTH_NM,
    max_excluded: float = MAX_EXCLUDED,
    min_frames: int = MIN_FRAMES,
    jobs: int = 1,
) -> DiffusionResult:
    """Track the ZPL center frame by frame and fit the histogram of centers."""
    frames = list(frames)
    if len(frames) < min_frames:
        raise DataError(f"diffusion: need at least {min_frames} frames, got {len(frames)}")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    raw = frame_centers(frames, jobs)
    excluded = [i for i, c in enumerate(raw) if c is None]
    if len(excluded) > max_excluded * len(frames):
        raise DataError(
            f"diffusion: {len(excluded)} of {len(frames)} frames failed the per-frame fit "
            f"(limit {100 * max_excluded:.0f}%)"
        )
    centers = np.array([c for c in raw if c is not None])
    mu, sigma, method, edges, counts = fit_center_histogram(centers, bin_width)
    return DiffusionResult(mu, sigma, centers, excluded, len(frames), method, edges, counts)
