"""Liouville-space conventions for the two-level emitter.

A density matrix ``rho`` is vectorised row-major, ``vec[2a + b] = rho[a, b]``
with ``0 = |G>`` and ``1 = |X>``.  The phonon coupling operator ``|X><X|``
is diagonal in this basis; ``S_PLUS``/``S_MINUS`` hold its eigenvalue on
the ket and bra side of each Liouville index.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

S_PLUS = np.array([0.0, 0.0, 1.0, 1.0])
S_MINUS = np.array([0.0, 1.0, 0.0, 1.0])
#: Liouville indices whose ket and bra coincide (populations)
DIAGONAL = np.array([0, 3])

PROJ_X = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(4)


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(2, 2)


def liouvillian(H: np.ndarray, gamma: float = 0.0) -> np.ndarray:
    """Generator of ``-i[H, rho] + gamma L_{|X><X|}[rho]`` on ``vec(rho)``."""
    L = -1j * (np.kron(H, IDENTITY2) - np.kron(IDENTITY2, H.T))
    if gamma:
        A = PROJ_X
        AdA = A.conj().T @ A
        L = L + gamma * (np.kron(A, A.conj()) - 0.5 * np.kron(AdA, IDENTITY2) - 0.5 * np.kron(IDENTITY2, AdA.T))
    return L


def half_step_propagators(hamiltonian, times: np.ndarray, dt: float, gamma: float):
    """Propagators for the two half steps of every time step.

    Step ``k`` spans ``[times[k], times[k] + dt]``; each half step uses the
    Hamiltonian at its own midpoint.  Returns two ``(N, 4, 4)`` arrays.
    """
    gens = []
    for offset in (0.25, 0.75):
        gens.append(np.stack([liouvillian(hamiltonian(t + offset * dt), gamma) for t in times]))
    # scipy's expm maps over leading axes
    return expm(gens[0] * (0.5 * dt)), expm(gens[1] * (0.5 * dt))
