"""Small dense linear algebra and fixed-step ODE integration.

Everything here works on plain ``numpy`` arrays.  Matrices are 2-D float
arrays, vectors are 1-D float arrays.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ComplexSpectrum, Defective, Diverged, Singular

DEFAULT_DT = 1e-3
DEFAULT_BOUND = 1e6


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class EigenResult:
    """Real eigenpairs, ascending by eigenvalue.

    Column ``i`` of ``eigenvectors`` has unit norm, its first nonzero entry is
    positive and it pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return V @ np.diag(self.eigenvalues) @ np.linalg.inv(V)


def _fix_sign(v: np.ndarray, tol: float) -> np.ndarray:
    for x in v:
        if abs(x) > tol:
            return v if x > 0 else -v
    return v


def eigendecompose_real(A, cond_limit: float = 1e12) -> EigenResult:
    """Eigendecomposition of a real-diagonalizable matrix.

    Raises
    ------
    ComplexSpectrum
        If any eigenvalue has imaginary part above ``1e-9 * ||A||``.
    Defective
        If the eigenvector matrix has condition number above ``cond_limit``.
    """
    A = _as_square(A)
    scale = np.linalg.norm(A)
    w, V = np.linalg.eig(A)
    if np.any(np.abs(w.imag) > 1e-9 * scale):
        raise ComplexSpectrum(f"complex eigenvalues {w}")
    w = w.real
    V = V.real
    V = V / np.linalg.norm(V, axis=0)
    V = np.column_stack([_fix_sign(V[:, i], 1e-12) for i in range(V.shape[1])])
    # ascending eigenvalue, ties by lexicographic eigenvector order
    order = sorted(range(len(w)), key=lambda i: (w[i], tuple(V[:, i])))
    w = w[order]
    V = V[:, order]
    if np.linalg.cond(V) > cond_limit:
        raise Defective("eigenvector matrix is numerically singular")
    return EigenResult(eigenvalues=w, eigenvectors=V)


def qr_decompose(A):
    """QR factorization with a strictly positive diagonal in ``R``.

    Returns ``(Q, R)`` with ``Q`` orthonormal and ``Q @ R == A``.
    """
    A = _as_square(A)
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    if np.any(np.abs(d) < 1e-12 * np.linalg.norm(A)) or not np.any(A):
        raise Singular("matrix is singular to working precision")
    signs = np.where(d < 0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    return Q, np.triu(R)


def skew_permutation(n: int) -> np.ndarray:
    """Permutation matrix with ones on the anti-diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.fliplr(np.eye(n))


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


def time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    """Sample times ``t0, t0+dt, ..., t1``; the last step may be shorter."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    n = int(np.ceil((t1 - t0) / dt - 1e-9))
    t = t0 + dt * np.arange(n + 1, dtype=float)
    t[-1] = t1
    return t


def rk4_step(deriv: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = deriv(t, y)
    k2 = deriv(t + h / 2, y + h / 2 * k1)
    k3 = deriv(t + h / 2, y + h / 2 * k2)
    k4 = deriv(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_rk4(deriv, y0, t0: float, t1: float, dt: float = DEFAULT_DT,
                  bound: float = DEFAULT_BOUND) -> Trajectory:
    """Classical fourth-order Runge-Kutta on a fixed grid.

    ``deriv(t, y)`` returns the state derivative.  Raises :class:`Diverged`
    as soon as a state norm exceeds ``bound`` (or becomes non-finite); the
    exception carries the samples computed so far in ``partial``.
    """
    t = time_grid(t0, t1, dt)
    y = np.array(y0, dtype=float).reshape(-1)
    ys = np.empty((len(t), y.size))
    ys[0] = y
    for k in range(len(t) - 1):
        y = rk4_step(deriv, t[k], y, t[k + 1] - t[k])
        norm = np.linalg.norm(y)
        if not np.isfinite(norm) or norm > bound:
            raise Diverged(f"state norm {norm:.3g} exceeded {bound:.3g} at t={t[k + 1]:.6g}",
                           t=t[k + 1], partial=Trajectory(t[:k + 1], ys[:k + 1]))
        ys[k + 1] = y
    return Trajectory(t, ys)
