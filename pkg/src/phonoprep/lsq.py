"""Damped least squares (Levenberg-Marquardt) with standard errors.

Small, dependency-free engine used by every fit in the package.  It keeps
the cost of each accepted iterate so callers can audit monotone descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class FitConvergenceError(RuntimeError):
    """Raised instead of returning parameters from a fit that did not converge."""

    def __init__(self, message: str, *, iterations: int, residual_norm: float, last_x: np.ndarray):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.last_x = last_x


@dataclass
class LsqResult:
    x: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    cost_history: list[float] = field(default_factory=list)
    n_data: int = 0


def _numeric_jacobian(fun, x, r0, rel_step=1e-7):
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-3)
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        J[:, i] = (fun(xp) - fun(xm)) / (2 * h)
    return J


def _projected(g, x, lo, hi):
    """Gradient with components pushing out of the box removed."""
    g = g.copy()
    g[(x <= lo) & (g > 0)] = 0.0
    g[(x >= hi) & (g < 0)] = 0.0
    return g


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    *,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    xtol: float = 1e-8,
    ftol: float = 1e-15,
    gtol: float = 1e-12,
    max_iter: int = 500,
    scale_covariance: bool = True,
    lower: Sequence[float] | None = None,
    upper: Sequence[float] | None = None,
) -> LsqResult:
    """Minimise ``0.5 * ||residual(x)||^2``.

    Converges when the relative step falls below ``xtol``, the relative cost
    decrease of an accepted step below ``ftol``, or the scaled gradient below
    ``gtol``.  Standard errors come from ``(J^T J)^-1`` at the optimum,
    multiplied by the reduced chi-square when ``scale_covariance``.
    Optional ``lower``/``upper`` bounds are enforced by projecting each
    trial point onto the box.
    """
    x = np.array(x0, dtype=float)
    lo = np.full(x.size, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(x.size, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if lo.shape != x.shape or hi.shape != x.shape or np.any(lo > hi):
        raise ValueError("bounds must match x0 and satisfy lower <= upper")
    x = np.clip(x, lo, hi)
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual is not finite at the starting point")
    m, n = r.size, x.size
    if m < n:
        raise ValueError(f"{m} residuals cannot determine {n} parameters")
    jac = jacobian if jacobian is not None else (lambda p: _numeric_jacobian(residual, p, residual(p)))

    cost = 0.5 * float(r @ r)
    history = [cost]
    lam, nu = None, 2.0
    converged = False
    it = 0
    J = jac(x)
    while it < max_iter:
        it += 1
        g = J.T @ r
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-300)
        if np.max(np.abs(_projected(g, x, lo, hi)) / np.sqrt(diag)) <= gtol * max(np.sqrt(2 * cost), 1e-300):
            converged = True
            break
        if lam is None:
            lam = 1e-3
        # variables pinned at a bound by the gradient stay out of the step
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        Af, gf = A[np.ix_(free, free)], g[free]
        accepted = False
        while not accepted:
            try:
                step = np.zeros(n)
                step[free] = np.linalg.solve(Af + lam * np.diag(diag[free]), -gf)
            except np.linalg.LinAlgError:
                lam *= nu
                nu *= 2
                if lam > 1e300:
                    break
                continue
            x_new = np.clip(x + step, lo, hi)
            step = x_new - x
            r_new = np.asarray(residual(x_new), dtype=float)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            predicted = -(g @ step) - 0.5 * step @ (A @ step)
            if cost_new < cost and predicted > 0:
                rho = (cost - cost_new) / predicted
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                accepted = True
            else:
                lam *= nu
                nu *= 2
                if lam > 1e30:
                    break
        if not accepted:
            # no step of any length lowers the cost: a local minimum to machine
            # precision, possibly at a kink of the model where the gradient is not zero
            converged = bool(np.isfinite(cost))
            break
        rel_step = np.linalg.norm(step) / (np.linalg.norm(x) + xtol)
        rel_cost = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        if rel_step < xtol or rel_cost < ftol:
            converged = True
            break
        J = jac(x)

    if not converged:
        raise FitConvergenceError(
            f"least squares did not converge in {it} iterations",
            iterations=it,
            residual_norm=float(np.sqrt(2 * cost)),
            last_x=x,
        )
    J = jac(x)
    A = J.T @ J
    cov = np.linalg.pinv(A)
    if scale_covariance and m > n:
        cov = cov * (2 * cost / (m - n))
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return LsqResult(x, stderr, cov, float(np.sqrt(2 * cost)), it, True, history, m)
