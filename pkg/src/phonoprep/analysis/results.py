"""Fit result records."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..lsq import LsqResult


class DataError(ValueError):
    """Input data unusable for the requested analysis."""


@dataclass
class FitResult:
    """Converged fit: named parameters, standard errors and diagnostics.

    Only constructed from a converged optimisation; failed fits raise
    :class:`~phonoprep.lsq.FitConvergenceError` instead.
    """

    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    iterations: int
    converged: bool
    cost_history: list[float] = field(default_factory=list, repr=False)
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def to_record(self) -> dict:
        """Plain record with a fixed key order, suitable for JSON."""
        return {
            "model": self.model,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norm": _clean(self.residual_norm),
            "parameters": {k: _clean(v) for k, v in self.params.items()},
            "standard_errors": {k: _clean(v) for k, v in self.stderr.items()},
            "extras": {k: _clean(v) for k, v in self.extras.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2) + "\n"


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def make_result(model: str, names, lsq: LsqResult, *, fixed: dict | None = None, extras: dict | None = None) -> FitResult:
    """Assemble a :class:`FitResult` from free parameters plus fixed ones."""
    params = {n: float(v) for n, v in zip(names, lsq.x)}
    stderr = {n: float(v) for n, v in zip(names, lsq.stderr)}
    for n, v in (fixed or {}).items():
        params[n] = float(v)
        stderr[n] = 0.0
    return FitResult(
        model=model,
        params=params,
        stderr=stderr,
        residual_norm=lsq.residual_norm,
        iterations=lsq.iterations,
        converged=lsq.converged,
        cost_history=list(lsq.cost_history),
        extras=dict(extras or {}),
    )


def poisson_sigma(counts) -> np.ndarray:
    """Per-bin standard deviation ``sqrt(max(counts, 1))``."""
    return np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))


def check_series(x, y, *, min_points: int, what: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DataError(f"{what}: abscissa and counts must be 1-D arrays of equal length")
    if x.size < min_points:
        raise DataError(f"{what}: need at least {min_points} samples, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError(f"{what}: non-finite values in data")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    if np.any(np.diff(x) <= 0):
        raise DataError(f"{what}: abscissa values must be distinct")
    if np.max(y) <= 0:
        raise DataError(f"{what}: counts are all zero")
    return x, y
