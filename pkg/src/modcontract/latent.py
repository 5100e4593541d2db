"""Latent-space models and composite variables.

A composite variable ``y = K1 e + K2 de/dt`` turns second-order tracking
error dynamics into a first-order latent system.  When the error dynamics
come from a task-space controller with gains ``(Lambda_d, Kd, Kp)`` the
latent system is the diagonal LTI model ``A dy/dt + B y + u = 0``.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimMismatch, MixedKp, NegativeDiscriminant


@dataclass(frozen=True)
class LatentModel:
    """``dy/dt = f(y, u, t)`` with Jacobians in ``y`` and ``u``."""

    dim_y: int
    dim_u: int
    f: Callable
    jac_y: Callable
    jac_u: Callable
    name: str = "latent"

    def derivative(self, y, u, t=0.0) -> np.ndarray:
        return np.asarray(self.f(y, u, t), dtype=float)


def _diag_vec(x, name, strict=True, allow_zero=False):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        if np.any(x - np.diag(np.diag(x))):
            raise ValueError(f"{name} must be diagonal")
        x = np.diag(x).copy()
    x = np.atleast_1d(x).astype(float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    if allow_zero:
        if np.any(x < 0):
            raise ValueError(f"{name} must be nonnegative")
    elif strict and np.any(x <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return x


@dataclass(frozen=True)
class CompositeMap:
    """Diagonal gains of ``y = K1 e + K2 de/dt`` stored as vectors.

    ``k1`` may be zero only for the pure-velocity composition ``y = de/dt``.
    """

    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        k1 = _diag_vec(self.k1, "K1", allow_zero=True)
        k2 = _diag_vec(self.k2, "K2")
        if k1.shape != k2.shape:
            raise DimMismatch("K1 and K2 differ in size")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)

    @property
    def dim(self) -> int:
        return self.k1.size


@dataclass(frozen=True)
class LatentLTI:
    """``A dy/dt + B y + u = 0`` with positive diagonal ``A`` and ``B``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _diag_vec(self.a, "A")
        b = _diag_vec(self.b, "B")
        if a.shape != b.shape:
            raise DimMismatch("A and B differ in size")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class GainSet:
    """Task-space gains of ``Lambda_d e'' + Kd e' + Kp e + u = 0``."""

    lambda_d: np.ndarray
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        lam = _diag_vec(self.lambda_d, "lambda_d")
        kp = _diag_vec(self.kp, "Kp", allow_zero=True)
        kd = _diag_vec(self.kd, "Kd")
        if not lam.shape == kp.shape == kd.shape:
            raise DimMismatch("gain vectors differ in size")
        object.__setattr__(self, "lambda_d", lam)
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)

    @property
    def dim(self) -> int:
        return self.kp.size

    @property
    def discriminant(self) -> np.ndarray:
        return self.kd**2 - 4 * self.kp * self.lambda_d


def composite_apply(m: CompositeMap, e, edot) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    edot = np.asarray(edot, dtype=float)
    if e.shape != (m.dim,) or edot.shape != (m.dim,):
        raise DimMismatch(f"expected vectors of size {m.dim}, got {e.shape} and {edot.shape}")
    return m.k1 * e + m.k2 * edot


def composite_zero_decay_rate(m: CompositeMap) -> np.ndarray:
    """Per-dimension decay rate of ``e`` on the manifold ``y = 0``."""
    return m.k1 / m.k2


def solve_composite_gains(g: GainSet, branch: str = "plus"):
    """Composite gains and latent LTI model for a task-space gain set.

    With every ``Kp_i > 0``::

        K1_i = Kp_i / lam_i
        K2_i = 2 Kp_i / (Kd_i +/- sqrt(Kd_i^2 - 4 Kp_i lam_i))
        A_ii = lam_i / (2 Kp_i) * (Kd_i +/- sqrt(...)),  B_ii = lam_i

    With every ``Kp_i = 0`` the composition is ``y = de/dt`` and
    ``A = Lambda_d``, ``B = Kd``.

    Returns
    -------
    (CompositeMap, LatentLTI)
    """
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    zero = g.kp == 0
    if np.all(zero):
        return (CompositeMap(np.zeros(g.dim), np.ones(g.dim)),
                LatentLTI(g.lambda_d.copy(), g.kd.copy()))
    if np.any(zero):
        raise MixedKp("Kp is zero in some but not all dimensions")
    disc = g.discriminant
    # round-off below zero is the repeated root
    disc = np.where((disc < 0) & (disc >= -1e-12 * g.kd**2), 0.0, disc)
    if np.any(disc < 0):
        raise NegativeDiscriminant(f"Kd^2 - 4 Kp lambda_d < 0 in dims {np.flatnonzero(disc < 0).tolist()}")
    sign = 1.0 if branch == "plus" else -1.0
    root = g.kd + sign * np.sqrt(disc)
    k1 = g.kp / g.lambda_d
    k2 = 2 * g.kp / root
    a = g.lambda_d / (2 * g.kp) * root
    return CompositeMap(k1, k2), LatentLTI(a, g.lambda_d.copy())


def lti_model(l: LatentLTI) -> LatentModel:
    """``dy/dt = -A^-1 B y - A^-1 u`` with constant diagonal Jacobians."""
    ainv = 1.0 / l.a
    jy = np.diag(-ainv * l.b)
    ju = np.diag(-ainv)
    gain = -ainv * l.b

    def f(y, u, t=0.0):
        return gain * np.asarray(y, dtype=float) - ainv * np.asarray(u, dtype=float)

    return LatentModel(
        dim_y=l.dim,
        dim_u=l.dim,
        f=f,
        jac_y=lambda y, u, t=0.0: jy.copy(),
        jac_u=lambda y, u, t=0.0: ju.copy(),
        name="lti",
    )


def linear_model(jy, ju, name="linear") -> LatentModel:
    """``dy/dt = Jy y + Ju u`` for constant matrices."""
    jy = np.array(jy, dtype=float)
    ju = np.array(ju, dtype=float)
    if jy.shape[0] != jy.shape[1] or ju.shape[0] != jy.shape[0]:
        raise DimMismatch("inconsistent Jacobian shapes")

    def f(y, u, t=0.0):
        return jy @ np.asarray(y, dtype=float) + ju @ np.asarray(u, dtype=float)

    return LatentModel(jy.shape[0], ju.shape[1], f,
                       lambda y, u, t=0.0: jy.copy(), lambda y, u, t=0.0: ju.copy(), name)


def finite_difference_jacobians(model: LatentModel, y, u, t=0.0, h=1e-6):
    """Central-difference Jacobians of ``model.f``; used as a test oracle."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    jy = np.empty((model.dim_y, y.size))
    ju = np.empty((model.dim_y, u.size))
    for k in range(y.size):
        d = np.zeros_like(y)
        d[k] = h
        jy[:, k] = (model.derivative(y + d, u, t) - model.derivative(y - d, u, t)) / (2 * h)
    for k in range(u.size):
        d = np.zeros_like(u)
        d[k] = h
        ju[:, k] = (model.derivative(y, u + d, t) - model.derivative(y, u - d, t)) / (2 * h)
    return jy, ju


def central_difference(t, y) -> np.ndarray:
    """Time derivative of sampled data: central inside, second-order one-sided at the ends."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.gradient(y, t, axis=0, edge_order=2)
