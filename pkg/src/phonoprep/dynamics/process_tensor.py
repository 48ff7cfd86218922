"""Process tensors: one bath's influence functional as a compressed MPS.

The influence functional ``F(j_0, ..., j_{N-1})`` of a bath coupling
through ``|X><X|`` is diagonal in Liouville space, so its process tensor
is a matrix product state over the step indices.  Site ``k`` has shape
``(D_left, 4, D_right)``.

Construction grows the chain one step at a time.  Adding step ``n``
multiplies the last ``K`` sites by their pair factors with ``j_n``; the
new index rides along the bond as a copy tensor (bond x 4) and becomes
the physical leg of the new site.  The touched window is then
recompressed by a right-to-left SVD sweep with the left part kept
left-orthonormal.

Future steps on the population subspace (``j`` in ``DIAGONAL``) leave the
influence of past steps unchanged, so contracting all sites after ``n``
with the population average yields the exact functional truncated at
``n``.  These contractions are the ``caps``.

Because the discretised functional is invariant under time translation,
it can also be written as a uniform MPS: one site tensor repeated for
every step, closed by boundary vectors.  :func:`build_uniform_process_tensor`
constructs that form by contracting the influence network one memory
depth at a time, from ``d = K`` down to ``d = 0``.  Its cost grows with
``K`` but not with the number of steps, and the result serves any number
of steps.  The sequential builder remains the reference construction.

Both constructions finally restore an exact property of the functional
that truncation perturbs: a population index at the latest step, followed
by population-averaged future steps, leaves the past untouched.  A
rank-one correction of the population slices enforces it.  The sequential
form is then rescaled so the fully population-averaged functional is 1.
Together these make propagation trace-preserving to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from scipy.sparse.linalg import LinearOperator, eigs

from .influence import influence_coefficients, influence_factors
from .liouville import DIAGONAL

#: contraction vector used to close the chain after the current step
CAP_VECTOR = np.zeros(4)
CAP_VECTOR[DIAGONAL] = 0.5
CONSTRUCTIONS = ("sequential", "uniform")
# relative accuracy of the environment fixed points used to pick kept vectors
_ENV_TOL = 1e-5


class BondDimensionError(RuntimeError):
    """Process-tensor bond dimension exceeded the configured hard cap."""

    def __init__(self, message: str, bond_profile: list[int], truncation_error: float, step: int):
        super().__init__(message)
        self.bond_profile = bond_profile
        self.truncation_error = truncation_error
        self.step = step


@dataclass
class ProcessTensor:
    """Compressed influence of one bath over ``n_steps`` steps of ``dt``.

    The represented functional is ``exp(log_scale) * MPS(sites)``.
    ``caps[k]`` closes the bond to the right of site ``k``; its true value is
    ``exp(cap_logs[k]) * caps[k]``.
    """

    sites: list[np.ndarray]
    caps: list[np.ndarray]
    cap_logs: np.ndarray
    log_scale: float
    dt: float
    memory: int
    svd_tol: float
    truncation_error: float
    source: str
    temperature: float
    eta: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def n_steps(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> list[int]:
        return [s.shape[2] for s in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    def covers(self, n_steps: int) -> bool:
        return n_steps == self.n_steps

    def boundary(self) -> np.ndarray:
        return np.ones(1, dtype=complex)

    def site(self, k: int) -> np.ndarray:
        return self.sites[k]

    def cap(self, k: int) -> tuple[np.ndarray, float]:
        """Closing vector after step ``k`` and the log of its scale."""
        return self.caps[k], float(self.cap_logs[k]) + self.log_scale

    def to_dense(self) -> np.ndarray:
        """Full ``4**N`` tensor; for tests on short chains only."""
        if self.n_steps > 12:
            raise ValueError("dense expansion limited to 12 steps")
        out = np.ones((1, 1))
        for s in self.sites:
            out = np.einsum("pa,ajb->pjb", out, s).reshape(-1, s.shape[2])
        return out.reshape((4,) * self.n_steps) * math.exp(self.log_scale)


def _truncate(s: np.ndarray, svd_tol: float, shape: tuple[int, int]) -> tuple[int, float]:
    if s.size == 0 or s[0] == 0.0:
        return 1, 0.0
    if svd_tol > 0:
        cut = svd_tol * s[0]
    else:
        # numerical rank: nothing above round-off is discarded
        cut = s[0] * max(shape) * np.finfo(float).eps
    keep = max(1, int(np.count_nonzero(s > cut)))
    discarded = float(np.sqrt(np.sum(s[keep:] ** 2)) / np.sqrt(np.sum(s**2)))
    return keep, discarded


def _grow_site(A: np.ndarray, b: np.ndarray, first: bool) -> np.ndarray:
    """Multiply site ``A`` by ``b[c, j]`` with ``c`` threaded on the bonds."""
    Dl, _, Dr = A.shape
    if first:
        out = np.einsum("ljr,cj->ljrc", A, b)
        return out.reshape(Dl, 4, Dr * 4)
    out = np.einsum("ljr,cj,cd->lcjrd", A, b, np.eye(4))
    return out.reshape(Dl * 4, 4, Dr * 4)


def build_process_tensor_from_eta(
    eta: np.ndarray,
    n_steps: int,
    dt: float,
    *,
    memory: int,
    svd_tol: float,
    max_bond: int = 4096,
    source: str = "",
    temperature: float = 0.0,
) -> ProcessTensor:
    """Assemble and compress the MPS for given influence coefficients."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    if memory < 1:
        raise ValueError("memory cutoff must be >= 1 step")
    if not 0 <= svd_tol < 1:
        raise ValueError("svd_tol must lie in [0, 1)")
    kmax = min(memory, n_steps - 1)
    if len(eta) < kmax + 1:
        raise ValueError("not enough influence coefficients for the memory cutoff")
    b0, pairs = influence_factors(np.asarray(eta)[: kmax + 1])

    sites: list[np.ndarray] = []
    log_scale = 0.0
    trunc = 0.0
    center = 0
    for n in range(n_steps):
        dmax = min(kmax, n)
        new = np.zeros((4 if dmax else 1, 4, 1), dtype=complex)
        if dmax:
            new[np.arange(4), np.arange(4), 0] = b0
        else:
            new[0, :, 0] = b0
        if dmax == 0:
            sites.append(new)
            continue
        w0 = n - dmax
        for k in range(w0, n):
            sites[k] = _grow_site(sites[k], pairs[n - k - 1], first=(k == w0))
        sites.append(new)

        # left-orthonormalise from the old centre to the new last site
        for k in range(min(center, w0), n):
            Dl, d, Dr = sites[k].shape
            q, r = np.linalg.qr(sites[k].reshape(Dl * d, Dr))
            sites[k] = q.reshape(Dl, d, q.shape[1])
            sites[k + 1] = np.einsum("ab,bjc->ajc", r, sites[k + 1])
        # right-to-left truncation sweep over the window
        for k in range(n, w0, -1):
            Dl, d, Dr = sites[k].shape
            mat = sites[k].reshape(Dl, d * Dr)
            u, s, vh = np.linalg.svd(mat, full_matrices=False)
            keep, discarded = _truncate(s, svd_tol, mat.shape)
            if keep > max_bond:
                raise BondDimensionError(
                    f"bond dimension {keep} exceeds cap {max_bond} at step {n}",
                    [x.shape[2] for x in sites[:-1]],
                    trunc,
                    n,
                )
            trunc += discarded
            sites[k] = vh[:keep].reshape(keep, d, Dr)
            sites[k - 1] = np.einsum("ajb,bc->ajc", sites[k - 1], u[:, :keep] * s[:keep])
        center = w0
        norm = np.linalg.norm(sites[center])
        if norm == 0 or not np.isfinite(norm):
            raise FloatingPointError(f"process tensor collapsed at step {n}")
        sites[center] /= norm
        log_scale += math.log(norm)

    caps, cap_logs = _caps(sites)
    for k in range(n_steps):
        _enforce_population_closure(sites[k], caps[k])
    # unit weight for the population-averaged future; exact tensors already have it
    z = np.einsum("ajb,j,b->a", sites[0], CAP_VECTOR, caps[0])[0]
    sites[0] = sites[0] * (abs(z) / z)
    log_scale = -(math.log(abs(z)) + float(cap_logs[0]))
    return ProcessTensor(
        sites=sites,
        caps=caps,
        cap_logs=cap_logs,
        log_scale=log_scale,
        dt=dt,
        memory=kmax,
        svd_tol=svd_tol,
        truncation_error=trunc,
        source=source,
        temperature=temperature,
        eta=np.asarray(eta)[: kmax + 1].copy(),
    )


def _caps(sites: list[np.ndarray]) -> tuple[list[np.ndarray], np.ndarray]:
    n = len(sites)
    caps: list[np.ndarray] = [np.zeros(0)] * n
    logs = np.zeros(n)
    v = np.ones(1, dtype=complex)
    acc = 0.0
    caps[n - 1] = v
    for k in range(n - 1, 0, -1):
        v = np.einsum("ajb,j,b->a", sites[k], CAP_VECTOR, v)
        nv = np.linalg.norm(v)
        if nv == 0:
            raise FloatingPointError("vanishing process-tensor cap")
        v = v / nv
        acc += math.log(nv)
        caps[k - 1] = v
        logs[k - 1] = acc
    return caps, logs


def _enforce_population_closure(site: np.ndarray, cap: np.ndarray) -> None:
    """Make ``site[:, j, :] @ cap`` equal for both population indices.

    The average of the two is kept, so the caps stay valid.
    """
    i0, i3 = DIAGONAL
    delta = 0.5 * (site[:, i0, :] @ cap - site[:, i3, :] @ cap)
    u = cap.conj() / np.vdot(cap, cap).real
    site[:, i0, :] -= np.outer(delta, u)
    site[:, i3, :] += np.outer(delta, u)


@dataclass
class UniformProcessTensor:
    """Translation-invariant process tensor.

    The functional over any number of steps is
    ``left @ site(j_0) @ site(j_1) ... @ right``; ``left`` encodes an
    infinite past spent in ``|G><G|`` and ``right`` the population-averaged
    future.
    """

    tensor: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dt: float
    memory: int
    svd_tol: float
    truncation_error: float
    source: str
    temperature: float
    eta: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    row_bonds: list[int] = field(default_factory=list)

    n_steps = None
    log_scale = 0.0

    @property
    def bond_dims(self) -> list[int]:
        return [self.tensor.shape[0]]

    @property
    def max_bond(self) -> int:
        return max([self.tensor.shape[0]] + self.row_bonds)

    def covers(self, n_steps: int) -> bool:
        return n_steps >= 1

    def boundary(self) -> np.ndarray:
        return self.left

    def site(self, k: int) -> np.ndarray:
        return self.tensor

    def cap(self, k: int) -> tuple[np.ndarray, float]:
        return self.right, 0.0

    def to_dense(self, n_steps: int) -> np.ndarray:
        """Full ``4**n_steps`` tensor; for tests on short chains only."""
        if n_steps > 12:
            raise ValueError("dense expansion limited to 12 steps")
        out = self.left[None, :]
        for _ in range(n_steps):
            out = np.einsum("pa,ajb->pjb", out, self.tensor).reshape(-1, self.tensor.shape[2])
        return (out @ self.right).reshape((4,) * n_steps)


def _dominant_fixed_points(A: np.ndarray, guess: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Right and left fixed points of the transfer map of a uniform MPS.

    ``A`` has shape ``(D, p, D)``.  Returns Hermitian ``R`` (ket, bra) and
    ``L`` (ket, bra), each with unit trace.
    """
    D, p, _ = A.shape
    rows = A.reshape(D, p * D)
    cols = A.reshape(D * p, D)

    def right(x):
        T = (cols @ x.reshape(D, D)).reshape(D, p * D)
        return (T @ rows.conj().T).ravel()

    def left(x):
        T = (x.reshape(D, D).T @ rows).reshape(D * p, D)
        return (cols.conj().T @ T).T.ravel()

    v0 = (np.eye(D) if guess is None else guess).astype(complex).ravel()
    out = []
    for f in (right, left):
        if D * D <= 144:
            M = np.stack([f(e) for e in np.eye(D * D, dtype=complex)], axis=1)
            w, v = np.linalg.eig(M)
            vec = v[:, int(np.argmax(np.abs(w)))]
        else:
            op = LinearOperator((D * D, D * D), matvec=f, dtype=complex)
            _, v = eigs(op, k=1, which="LM", tol=_ENV_TOL, v0=v0, ncv=min(D * D - 1, 20))
            vec = v[:, 0]
        X = vec.reshape(D, D)
        X = X / np.trace(X)
        out.append(0.5 * (X + X.conj().T))
    return out[0], out[1]


def _psd_factor(X: np.ndarray) -> np.ndarray:
    """``F`` with ``X = F F^dag`` (negative round-off eigenvalues clipped)."""
    w, W = np.linalg.eigh(X)
    return W * np.sqrt(np.clip(w, 0.0, None))


def _shift_row(A: np.ndarray, svd_tol: float, max_bond: int, guess, depth: int):
    """Move every diagonal leg one site to the left and recompress.

    ``A[a, v, g, b]`` holds a vertical leg ``v`` and a diagonal leg ``g``.
    The cut between ``g`` and ``v`` is truncated using the environments
    of the infinite chain, and the result is regrouped so each site holds
    its own ``v`` and the right neighbour's ``g``.
    """
    D = A.shape[0]
    R, L = _dominant_fixed_points(A.reshape(D, 16, D), guess)
    Xr = _psd_factor(R)
    Xl = _psd_factor(L.conj()).conj().T
    Ag = A.transpose(0, 2, 1, 3)  # a g v b
    MR = (Ag.reshape(16 * D, D) @ Xr).reshape(4 * D, 4 * D)
    LM = (Xl @ Ag.reshape(D, 16 * D)).reshape(4 * D, 4 * D)
    theta = (Xl @ MR.reshape(D, 16 * D)).reshape(4 * D, 4 * D)
    U, s, Vh = np.linalg.svd(theta, full_matrices=False)
    keep, discarded = _truncate(s, svd_tol, theta.shape)
    if keep > max_bond:
        raise BondDimensionError(
            f"bond dimension {keep} exceeds cap {max_bond} at memory depth {depth}", [D, keep], discarded, depth
        )
    U, s, Vh = U[:, :keep], s[:keep], Vh[:keep]
    isq = 1.0 / np.sqrt(s)
    P = ((MR @ Vh.conj().T) * isq).reshape(D, 4 * keep)
    Q = (isq[:, None] * (U.conj().T @ LM)).reshape(keep * 4, D)
    out = (Q @ P).reshape(keep, 4, 4, keep)
    return out / np.max(np.abs(out)), discarded, np.diag(s / s[0])


def build_uniform_process_tensor_from_eta(
    eta: np.ndarray,
    dt: float,
    *,
    svd_tol: float,
    max_bond: int = 4096,
    source: str = "",
    temperature: float = 0.0,
) -> UniformProcessTensor:
    """Uniform MPS for memory ``K = len(eta) - 1``.

    The influence network is contracted row by row, from memory depth ``K``
    down to ``0``; each row multiplies the pair factors in and shifts the
    diagonal legs by one site.
    """
    eta = np.asarray(eta, dtype=complex)
    K = len(eta) - 1
    if K < 0:
        raise ValueError("need at least eta_0")
    if not 0 <= svd_tol < 1:
        raise ValueError("svd_tol must lie in [0, 1)")
    b0, pairs = influence_factors(eta)
    trunc = 0.0
    rows: list[int] = []
    if K == 0:
        A = np.zeros((1, 4, 1), dtype=complex)
        A[0, :, 0] = b0
    else:
        A = pairs[K - 1].reshape(1, 4, 4, 1).astype(complex)
        guess = None
        for d in range(K, 0, -1):
            A, discarded, guess = _shift_row(A, svd_tol, max_bond, guess, d)
            trunc += discarded
            rows.append(A.shape[0])
            if d > 1:
                A = A * pairs[d - 2][None, :, :, None]
        A = np.einsum("ajjb->ajb", A) * b0[None, :, None]

    Acap = np.einsum("ajb,j->ab", A, CAP_VECTOR)
    w, v = np.linalg.eig(Acap)
    i = int(np.argmax(np.abs(w)))
    A = A / w[i]
    right = v[:, i]
    _enforce_population_closure(A, right)
    w0, v0 = np.linalg.eig(A[:, DIAGONAL[0], :].T)
    i0 = int(np.argmin(np.abs(w0 - 1.0)))
    if abs(w0[i0] - 1.0) > 1e-6:
        raise FloatingPointError(f"ground-state transfer eigenvalue {w0[i0]} differs from 1")
    left = v0[:, i0]
    right = right / (left @ right)
    return UniformProcessTensor(
        tensor=A,
        left=left,
        right=right,
        dt=dt,
        memory=K,
        svd_tol=svd_tol,
        truncation_error=trunc,
        source=source,
        temperature=temperature,
        eta=eta.copy(),
        row_bonds=rows,
    )


def _source_label(J) -> str:
    labels = [J.label] if hasattr(J, "label") else [j.label for j in J]
    return "+".join(labels)


def build_process_tensor(J, temperature: float, cfg, n_steps: int, *, source: str | None = None):
    """Process tensor for spectral density ``J`` (one density or a list to sum).

    ``cfg`` supplies ``dt``, ``memory``, ``svd_tol``, ``max_bond`` and
    ``construction``.  The uniform construction ignores ``n_steps`` beyond
    clipping the memory to ``n_steps - 1``.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    kmax = min(cfg.memory, n_steps - 1)
    eta, _ = influence_coefficients(J, temperature, cfg.dt, kmax)
    source = _source_label(J) if source is None else source
    construction = getattr(cfg, "construction", "sequential")
    if construction == "uniform":
        return build_uniform_process_tensor_from_eta(
            eta, cfg.dt, svd_tol=cfg.svd_tol, max_bond=cfg.max_bond, source=source, temperature=temperature
        )
    if construction != "sequential":
        raise ValueError(f"unknown construction {construction!r}")
    return build_process_tensor_from_eta(
        eta,
        n_steps,
        cfg.dt,
        memory=max(cfg.memory, 1),
        svd_tol=cfg.svd_tol,
        max_bond=cfg.max_bond,
        source=source,
        temperature=temperature,
    )
