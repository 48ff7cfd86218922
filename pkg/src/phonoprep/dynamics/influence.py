"""Discretised Feynman-Vernon influence functional.

With the coupling ``|X><X|`` held constant on each step ``[k dt, (k+1) dt]``
the influence functional is a product of pair factors

    b_d(j, j') = exp(-(s+_j - s-_j) (eta_d s+_j' - conj(eta_d) s-_j'))

between a later step (index ``j``) and an earlier step ``d`` steps back
(index ``j'``), plus the on-step factor ``b_0(j)``.  The coefficients are
the bath correlation integrated over pairs of steps,

    eta_0 = int_0^dt dt1 int_0^t1 dt2 C(t1 - t2)
    eta_d = int over two steps d apart of C(t1 - t2),   d >= 1,

evaluated directly in frequency space so no finite differences of the
lineshape function are taken.
"""

from __future__ import annotations

import numpy as np

from ..phonon_env import spectral_transform
from .liouville import S_MINUS, S_PLUS


def influence_coefficients(J, temperature: float, dt: float, kmax: int) -> tuple[np.ndarray, float]:
    """``eta_d`` for ``d = 0..kmax`` and the quadrature error estimate."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    if kmax < 0:
        raise ValueError("kmax must be non-negative")

    def self_kernel(w, t, coth):
        s = np.sin(0.5 * w * dt)
        return (coth * 2.0 * s * s - 1j * (w * dt - np.sin(w * dt))) / (w * w)

    def pair_kernel(w, t, coth):
        s = np.sin(0.5 * w * dt)
        return 4.0 * s * s / (w * w) * (coth * np.cos(w * t) - 1j * np.sin(w * t))

    eta = np.zeros(kmax + 1, dtype=complex)
    eta0, err0 = spectral_transform(J, temperature, np.array([dt]), self_kernel)
    eta[0] = eta0[0]
    err = err0
    if kmax >= 1:
        lags = dt * np.arange(1, kmax + 1)
        vals, err1 = spectral_transform(J, temperature, lags, pair_kernel)
        eta[1:] = vals
        err = max(err, err1)
    return eta, err


def self_factor(eta0: complex) -> np.ndarray:
    """On-step factor ``b_0(j)``, shape ``(4,)``."""
    x = S_PLUS - S_MINUS
    return np.exp(-x * (eta0 * S_PLUS - np.conj(eta0) * S_MINUS))


def pair_factor(eta_d: complex) -> np.ndarray:
    """Pair factor ``b_d[j_later, j_earlier]``, shape ``(4, 4)``."""
    x = (S_PLUS - S_MINUS)[:, None]
    return np.exp(-x * (eta_d * S_PLUS[None, :] - np.conj(eta_d) * S_MINUS[None, :]))


def influence_factors(eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(b_0, [b_1, ..., b_K])`` from the coefficients."""
    b0 = self_factor(eta[0])
    pairs = np.array([pair_factor(e) for e in eta[1:]]).reshape(-1, 4, 4)
    return b0, pairs
