"""Time propagation of the driven emitter.

All three solvers share one discretisation.  Step ``k`` covers
``[t_k, t_k + dt]`` and is split symmetrically::

    rho_{k+1} = U2_k  I_k  U1_k  rho_k

where ``U1``/``U2`` are half-step system propagators (Hamiltonian plus
Lindblad dephasing) and ``I_k`` is the diagonal influence of step ``k``
coupled to steps ``k-1 ... k-K``.  ``ProcessTensor`` contracts compressed
influence MPSs; ``BruteForcePathSum`` sums every Liouville path explicitly;
``ClosedSystem`` drops the influence entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .influence import influence_coefficients, influence_factors
from .liouville import DIAGONAL, half_step_propagators, unvec, vec
from .process_tensor import CONSTRUCTIONS

SOLVER_KINDS = ("ProcessTensor", "BruteForcePathSum", "ClosedSystem")
BRUTE_FORCE_MAX_STEPS = 14
# largest path array held at once by the brute-force oracle (entries)
_BRUTE_CHUNK = 4**11


class InvariantViolation(RuntimeError):
    """Trace, Hermiticity or positivity drift beyond tolerance."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters of a propagation.

    ``memory`` is the cutoff ``K`` in steps; ``svd_tol`` the relative
    singular-value threshold; ``gamma`` the Lindblad dephasing rate (1/ps).
    ``construction`` selects the process-tensor builder: ``"uniform"``
    (cost independent of the number of steps) or ``"sequential"``.
    """

    dt: float
    memory: int
    svd_tol: float = 1e-7
    gamma: float = 0.0
    solver_kind: str = "ProcessTensor"
    max_bond: int = 1024
    invariant_tol: float = 1e-8
    construction: str = "uniform"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.memory < 1:
            raise ValueError("memory cutoff K must be >= 1")
        if not 0 <= self.svd_tol < 1:
            raise ValueError("svd_tol must lie in [0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.solver_kind not in SOLVER_KINDS:
            raise ValueError(f"unknown solver kind {self.solver_kind!r}")
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"unknown process-tensor construction {self.construction!r}")
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")

    @classmethod
    def for_pulse(
        cls,
        t_p: float,
        *,
        steps_per_tp: int = 40,
        memory_time: float | None = None,
        omega_c: float = 2.03,
        **kw,
    ) -> "SolverConfig":
        """Default grid: ``dt = t_p/steps_per_tp`` and ``K dt >= 4/omega_c``."""
        dt = t_p / steps_per_tp
        mem_t = memory_time if memory_time is not None else 4.0 / omega_c
        return cls(dt=dt, memory=max(1, math.ceil(mem_t / dt - 1e-9)), **kw)


def time_grid(window: tuple[float, float], dt: float) -> tuple[np.ndarray, float]:
    """Step start times covering ``window`` and the step actually used.

    The step is shrunk slightly if needed so the window holds an integer
    number of steps.
    """
    t0, t1 = window
    n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    step = (t1 - t0) / n
    return t0 + step * np.arange(n), step


@dataclass
class Trajectory:
    """Density matrices at ``times`` (initial state first)."""

    times: np.ndarray
    states: np.ndarray  # (N+1, 2, 2)
    solver_kind: str
    truncation_error: float = 0.0
    max_bond: int = 1
    diagnostics: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return self.states[:, 1, 1].real

    def to_csv(self) -> str:
        """One line per step: ``t, Re/Im of rho_GG, rho_GX, rho_XG, rho_XX``."""
        lines = ["t_ps,re_gg,im_gg,re_gx,im_gx,re_xg,im_xg,re_xx,im_xx"]
        for t, rho in zip(self.times, self.states):
            flat = rho.reshape(4)
            cols = [f"{t:.12e}"]
            for z in flat:
                cols.append(f"{z.real:.15e}")
                cols.append(f"{z.imag:.15e}")
            lines.append(",".join(cols))
        return "\n".join(lines) + "\n"


def validate_state(rho: np.ndarray, tol: float = 1e-8) -> None:
    """Check Hermiticity, unit trace and positivity of a 2x2 density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise ValueError("two-level density matrix must be 2x2")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def ground_state() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def _check_step(rho: np.ndarray, prev_trace: complex, step: int, tol: float) -> complex:
    tr = np.trace(rho)
    if abs(tr - prev_trace) > tol or abs(tr.imag) > tol:
        raise InvariantViolation(f"trace drift {abs(tr - prev_trace):.3e} at step {step}", step)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise InvariantViolation(f"Hermiticity violated by {herm:.3e} at step {step}", step)
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev[0] < -tol:
        raise InvariantViolation(f"negative eigenvalue {ev[0]:.3e} at step {step}", step)
    return tr


def _propagators(hamiltonian, cfg: SolverConfig, n_steps: int | None = None):
    times, dt = time_grid(hamiltonian.window, cfg.dt)
    if n_steps is not None and len(times) != n_steps:
        raise ValueError(f"process tensors cover {n_steps} steps but the window needs {len(times)}")
    U1, U2 = half_step_propagators(hamiltonian, times, dt, cfg.gamma)
    return times, dt, U1, U2


def _finish(times, dt, states, kind, **kw) -> Trajectory:
    all_times = np.append(times, times[-1] + dt)
    return Trajectory(all_times, np.array(states), kind, **kw)


def propagate_closed(hamiltonian, cfg: SolverConfig, rho0: np.ndarray | None = None) -> Trajectory:
    """Emitter without phonons (Lindblad term still applied)."""
    rho0 = ground_state() if rho0 is None else np.asarray(rho0, dtype=complex)
    validate_state(rho0, cfg.invariant_tol)
    times, dt, U1, U2 = _propagators(hamiltonian, cfg)
    v = vec(rho0)
    states = [rho0]
    tr = np.trace(rho0)
    for k in range(len(times)):
        v = U2[k] @ (U1[k] @ v)
        rho = unvec(v)
        tr = _check_step(rho, tr, k + 1, cfg.invariant_tol)
        states.append(rho)
    return _finish(times, dt, states, "ClosedSystem")


def propagate(
    hamiltonian,
    baths: Sequence,
    cfg: SolverConfig,
    rho0: np.ndarray | None = None,
    *,
    check_invariants: bool = True,
) -> Trajectory:
    """Contract the system propagators with one process tensor per bath."""
    rho0 = ground_state() if rho0 is None else np.asarray(rho0, dtype=complex)
    validate_state(rho0, cfg.invariant_tol)
    baths = list(baths)
    if not baths:
        traj = propagate_closed(hamiltonian, cfg, rho0)
        traj.solver_kind = "ProcessTensor"
        return traj
    dt0 = baths[0].dt
    for pt in baths:
        if not math.isclose(pt.dt, dt0, rel_tol=1e-12):
            raise ValueError("all process tensors must share dt")
    times, dt, U1, U2 = _propagators(hamiltonian, cfg)
    n = len(times)
    if not math.isclose(dt, dt0, rel_tol=1e-9):
        raise ValueError(f"process tensor step {dt0} differs from the propagation step {dt}")
    for pt in baths:
        if not pt.covers(n):
            raise ValueError(f"process tensor {pt.source!r} does not cover {n} steps")

    m = len(baths)
    state = vec(rho0)
    for pt in reversed(baths):
        state = np.multiply.outer(pt.boundary(), state)
    log_state = 0.0
    defect = 0.0
    states = [rho0]
    tr = np.trace(rho0)
    for k in range(n):
        state = state @ U1[k].T
        for i, pt in enumerate(baths):
            A = pt.site(k)
            s = np.moveaxis(state, i, 0)
            # contract the bond of bath i separately for every Liouville index
            parts = [np.tensordot(A[:, j, :], s[..., j], axes=([0], [0])) for j in range(4)]
            state = np.moveaxis(np.stack(parts, axis=-1), 0, i)
        state = state @ U2[k].T
        nrm = np.linalg.norm(state)
        if nrm == 0 or not np.isfinite(nrm):
            raise InvariantViolation(f"propagated state vanished or overflowed at step {k + 1}", k + 1)
        state = state / nrm
        log_state += math.log(nrm)
        out = state
        scale = log_state
        for pt in baths:
            cap, cap_log = pt.cap(k)
            out = np.tensordot(cap, out, axes=([0], [0]))
            scale += cap_log
        rho = unvec(out * math.exp(scale))
        defect = max(defect, float(np.max(np.abs(rho - rho.conj().T))))
        # Hermitian part: the exact output of the conjugation-symmetrised process tensor
        rho = 0.5 * (rho + rho.conj().T)
        if check_invariants:
            tr = _check_step(rho, tr, k + 1, cfg.invariant_tol)
        states.append(rho)
    return _finish(
        times,
        dt,
        states,
        "ProcessTensor",
        truncation_error=float(sum(pt.truncation_error for pt in baths)),
        max_bond=max(pt.max_bond for pt in baths),
        diagnostics={"bond_dims": {pt.source: pt.max_bond for pt in baths}, "hermiticity_defect": defect},
    )


def propagate_brute_force(
    hamiltonian,
    densities: Sequence,
    temperature: float,
    cfg: SolverConfig,
    rho0: np.ndarray | None = None,
) -> Trajectory:
    """Exact sum over all ``4**N`` Liouville paths of the discretised functional.

    Every bath enters through its own influence coefficients; pair factors
    beyond ``cfg.memory`` steps are dropped exactly as in the process tensor.
    Only meant as a reference for ``N <= 14``.
    """
    rho0 = ground_state() if rho0 is None else np.asarray(rho0, dtype=complex)
    validate_state(rho0, cfg.invariant_tol)
    times, dt, U1, U2 = _propagators(hamiltonian, cfg)
    n = len(times)
    if n > BRUTE_FORCE_MAX_STEPS:
        raise ValueError(f"brute-force path sum limited to {BRUTE_FORCE_MAX_STEPS} steps, got {n}")
    kmax = min(cfg.memory, n - 1)
    b0 = np.ones(4, dtype=complex)
    pairs = np.ones((kmax, 4, 4), dtype=complex)
    for J in densities:
        eta, _ = influence_coefficients(J, temperature, dt, kmax)
        jb0, jpairs = influence_factors(eta)
        b0 = b0 * jb0
        pairs = pairs * jpairs

    # transfer between consecutive path points
    M = [U1[k + 1] @ U2[k] for k in range(n - 1)]
    out = np.zeros((n, 4), dtype=complex)

    # Full path arrays up to `split` steps, then loop over those prefixes.
    split = 0
    while 4 ** (n - split) > _BRUTE_CHUNK:
        split += 1
    split = max(split, 1)

    # paths over the first `split` points, array axes = (j_0, ..., j_{split-1})
    P = (U1[0] @ vec(rho0)) * b0
    out[0] = P
    for step in range(1, split):
        P = _advance(P, M[step - 1], b0, pairs, step, kmax, prefix=())
        out[step] = P.reshape(-1, 4).sum(axis=0)

    if split < n:
        prefixes = np.ndindex(*(4,) * split)
        for prefix in prefixes:
            amp = P[prefix]
            if amp == 0:
                continue
            # first free point: index j_split, depends on j_{split-1} through M
            Q = amp * M[split - 1][:, prefix[-1]] * b0
            for d in range(1, min(kmax, split) + 1):
                Q = Q * pairs[d - 1][:, prefix[split - d]]
            out[split] += Q
            for step in range(split + 1, n):
                Q = _advance(Q, M[step - 1], b0, pairs, step, kmax, prefix=prefix)
                out[step] += Q.reshape(-1, 4).sum(axis=0)

    states = [rho0] + [unvec(U2[k] @ out[k]) for k in range(n)]
    return _finish(times, dt, states, "BruteForcePathSum")


def _advance(P, M, b0, pairs, step, kmax, prefix):
    """Append path point ``step`` to the path array ``P``.

    ``P`` has one axis per free point ``len(prefix) .. step-1``; points in
    ``prefix`` are fixed indices.
    """
    p = len(prefix)
    new = P[..., None] * M.T * b0  # (..., j_{step-1}, j_step)
    nax = new.ndim
    for d in range(1, min(kmax, step) + 1):
        k = step - d
        if k < p:
            new = new * pairs[d - 1][:, prefix[k]]
        else:
            shape = [1] * nax
            shape[k - p] = 4
            shape[-1] = 4
            new = new * pairs[d - 1].T.reshape(shape)
    return new


class PopulationRangeError(RuntimeError):
    """Final population left the physical range beyond round-off."""


def final_population(trajectory_or_rho, tol: float = 1e-6) -> float:
    """``rho_XX`` at the last sample, clamped to ``[0, 1]`` within ``tol``."""
    if isinstance(trajectory_or_rho, Trajectory):
        rho = trajectory_or_rho.states[-1]
    else:
        rho = np.asarray(trajectory_or_rho)
    p = float(np.real(rho[1, 1]))
    if not np.isfinite(p) or p < -tol or p > 1 + tol:
        raise PopulationRangeError(f"final population {p!r} outside [0, 1]")
    return min(1.0, max(0.0, p))
