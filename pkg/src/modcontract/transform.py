"""Auxiliary-space coordinate transforms and differential-dynamics blocks.

The auxiliary coordinates are ``z = T_y y`` and ``a = T_a^-1 u``.  ``T_y``
diagonalizes ``df/dy`` and ``T_a`` makes the input gain
``R = T_y df/du T_a`` upper triangular, which turns the closed loop into a
hierarchy of 2x2 subsystems ``(z_i, a_i)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, Singular, SingularInputMap
from .latent import LatentModel
from .numerics import eigendecompose_real, qr_decompose, skew_permutation

TRIANGULAR_TOL = 1e-8


@dataclass(frozen=True)
class TransformPair:
    T_y: np.ndarray
    T_a: np.ndarray
    Lambda: np.ndarray
    R: np.ndarray
    R_qr: np.ndarray = None

    @property
    def dim(self) -> int:
        return self.T_y.shape[0]

    @property
    def lambda_diag(self) -> np.ndarray:
        return np.diag(self.Lambda).copy()

    @property
    def r_diag(self) -> np.ndarray:
        return np.diag(self.R).copy()

    def metric_bounds(self) -> tuple:
        """Smallest eigenvalues of ``T_y^T T_y`` and ``T_a^-T T_a^-1``."""
        Ta_inv = np.linalg.inv(self.T_a)
        return (float(np.linalg.eigvalsh(self.T_y.T @ self.T_y)[0]),
                float(np.linalg.eigvalsh(Ta_inv.T @ Ta_inv)[0]))

    def theta_norm(self) -> float:
        """Spectral norm of the block-diagonal map ``[T_y; T_a^-1]``."""
        return max(np.linalg.norm(self.T_y, 2), np.linalg.norm(np.linalg.inv(self.T_a), 2))

    def offdiag_lambda(self) -> float:
        L = self.Lambda
        return float(np.max(np.abs(L - np.diag(np.diag(L))), initial=0.0))

    def strict_lower_r(self) -> float:
        return float(np.max(np.abs(np.tril(self.R, -1)), initial=0.0))

    def summary(self) -> dict:
        return {
            "lambda": self.lambda_diag.tolist(),
            "r": self.R.tolist(),
            "metric_bounds": list(self.metric_bounds()),
        }


def transforms_from_jacobians(jy, ju, min_metric: float = 0.0) -> TransformPair:
    jy = np.asarray(jy, dtype=float)
    ju = np.asarray(ju, dtype=float)
    n = jy.shape[0]
    if ju.shape != (n, n):
        raise DimMismatch(f"df/du must be {n}x{n}, got {ju.shape}")
    eig = eigendecompose_real(jy)
    T_y = np.linalg.inv(eig.eigenvectors)
    P = skew_permutation(n)
    G = T_y @ ju
    try:
        Q, R_qr = qr_decompose(G.T @ P)
    except Singular as exc:
        raise SingularInputMap(str(exc)) from exc
    # (P Q^T)^-1 = Q P for orthogonal Q and involutive P
    T_a = Q @ P
    Lambda = T_y @ jy @ eig.eigenvectors
    R = G @ T_a
    pair = TransformPair(T_y=T_y, T_a=T_a, Lambda=Lambda, R=R, R_qr=R_qr)
    if min_metric > 0 and min(pair.metric_bounds()) < min_metric:
        raise SingularInputMap(f"metric bound {min(pair.metric_bounds()):.3g} below {min_metric:.3g}")
    return pair


def build_transforms(model: LatentModel, y, u, t: float = 0.0, min_metric: float = 0.0) -> TransformPair:
    """Transforms at one operating point of ``model``.

    ``T_y`` is the inverse of the eigenvector matrix of ``df/dy`` (its rows
    are left eigenvectors), so ``Lambda = T_y df/dy T_y^-1`` is diagonal in
    ascending order.  ``Q R_qr = (T_y df/du)^T P`` and ``T_a = (P Q^T)^-1``,
    which gives ``R = P R_qr^T P``.
    """
    return transforms_from_jacobians(model.jac_y(y, u, t), model.jac_u(y, u, t), min_metric)


@dataclass(frozen=True)
class AuxDifferentialSystem:
    """Blocks of ``d/dt [dz; da] = F [dz; da]`` and their per-dimension split."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    lambda_diag: np.ndarray
    r: np.ndarray
    pi_s1: np.ndarray
    pi_s2: np.ndarray
    self_feedback: list = field(default_factory=list)
    couplings: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.lambda_diag.size

    @property
    def F(self) -> np.ndarray:
        return self.F1 + self.F2

    @property
    def r_diag(self) -> np.ndarray:
        return np.diag(self.r).copy()

    def grouped(self, which: str = "F1") -> np.ndarray:
        """``which`` reordered to ``(z_1, a_1, z_2, a_2, ...)``."""
        n = self.dim
        order = np.ravel(np.column_stack([np.arange(n), n + np.arange(n)]))
        M = getattr(self, which)
        return M[np.ix_(order, order)]

    def block(self, i: int, j: int, which: str = "F1") -> np.ndarray:
        G = self.grouped(which)
        return G[2 * i:2 * i + 2, 2 * j:2 * j + 2]


def _diag_of(m, name, n):
    m = np.asarray(m, dtype=float)
    if m.ndim == 2:
        if m.shape != (n, n):
            raise DimMismatch(f"{name} must be {n}x{n}")
        if np.any(m - np.diag(np.diag(m))):
            raise ValueError(f"{name} must be diagonal")
        return np.diag(m).copy()
    if m.shape != (n,):
        raise DimMismatch(f"{name} must have {n} entries")
    return m.copy()


def assemble_blocks(tp: TransformPair, jac_pi_s1, jac_pi_s2, Tdot_y=None) -> AuxDifferentialSystem:
    """Differential dynamics of the closed loop in auxiliary coordinates.

    ``jac_pi_s1`` and ``jac_pi_s2`` are the diagonal policy Jacobians (one
    independent network per dimension).  ``Tdot_y`` defaults to zero.
    """
    n = tp.dim
    p1 = _diag_of(jac_pi_s1, "jac_pi_s1", n)
    p2 = _diag_of(jac_pi_s2, "jac_pi_s2", n)
    Tdot = np.zeros((n, n)) if Tdot_y is None else np.asarray(Tdot_y, dtype=float)
    if Tdot.shape != (n, n):
        raise DimMismatch(f"Tdot_y must be {n}x{n}")
    P1 = np.diag(p1)
    P2 = np.diag(p2)
    W = Tdot @ np.linalg.inv(tp.T_y)
    A = W + tp.Lambda
    B = tp.R
    C = P1 @ A + P2
    D = P1 @ tp.R
    F1 = np.block([[tp.Lambda, tp.R], [P1 @ tp.Lambda + P2, P1 @ tp.R]])
    Z = np.zeros((n, n))
    F2 = np.block([[W, Z], [P1 @ W, Z]])
    lam = tp.lambda_diag
    self_feedback = [
        np.array([[lam[i], tp.R[i, i]], [p1[i] * lam[i] + p2[i], p1[i] * tp.R[i, i]]])
        for i in range(n)
    ]
    couplings = {
        (i, j): np.array([[0.0, tp.R[i, j]], [0.0, p1[i] * tp.R[i, j]]])
        for i in range(n) for j in range(i + 1, n)
    }
    return AuxDifferentialSystem(A=A, B=B, C=C, D=D, F1=F1, F2=F2, lambda_diag=lam,
                                 r=tp.R.copy(), pi_s1=p1, pi_s2=p2,
                                 self_feedback=self_feedback, couplings=couplings)


@dataclass(frozen=True)
class CombinationVerdict:
    kind: str
    ok: bool
    max_violation: float
    where: tuple = None


def check_combination(sys: AuxDifferentialSystem, kind: str = "hierarchical",
                      tol: float = TRIANGULAR_TOL) -> CombinationVerdict:
    """Check the coupling structure of the grouped ``F1``.

    Subsystems are ordered so that subsystem ``i`` may only be driven by
    ``j > i``.  ``hierarchical`` requires every block ``F_ij`` with ``i > j``
    to vanish; ``feedback`` requires ``F_ij = -F_ji^T`` for all ``i != j``.
    Violations are compared against ``tol * max(1, max|F1|)``.
    """
    n = sys.dim
    G = sys.grouped("F1")
    scale = max(1.0, float(np.max(np.abs(G))))
    worst, where = 0.0, None
    for i in range(n):
        for j in range(i):
            blk_low = G[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if kind == "hierarchical":
                v = float(np.max(np.abs(blk_low)))
            elif kind == "feedback":
                blk_up = G[2 * j:2 * j + 2, 2 * i:2 * i + 2]
                v = float(np.max(np.abs(blk_up + blk_low.T)))
            else:
                raise ValueError(f"unknown combination kind {kind!r}")
            if v > worst or where is None:
                worst, where = max(worst, v), (i, j)
    return CombinationVerdict(kind=kind, ok=worst <= tol * scale, max_violation=worst, where=where)


def tdot_estimate(tp_prev: TransformPair, tp_now: TransformPair, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if tp_prev.T_y.shape != tp_now.T_y.shape:
        raise DimMismatch("transform pairs differ in size")
    return (tp_now.T_y - tp_prev.T_y) / dt
