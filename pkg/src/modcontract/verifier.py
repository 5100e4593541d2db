"""Analytic and empirical contraction checks.

Analytic side: per-dimension margins of the self-feedback blocks, roots of
their characteristic polynomials, and the global symmetric-part condition on
``F1``.  Empirical side: log-linear fits of the distance between trajectory
pairs, and steady error balls under bounded disturbances.
"""

import cmath
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .transform import AuxDifferentialSystem, TransformPair


def sym_lambda_max(M) -> float:
    """Largest eigenvalue of ``M^T + M``."""
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(M + M.T)[-1])


@dataclass(frozen=True)
class MarginReport:
    c1: np.ndarray
    c2: np.ndarray
    alpha: float
    worst_c1: float
    worst_c2: float
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.worst_c1 < -self.alpha and self.worst_c2 < -self.alpha

    def failing_dims(self) -> list:
        bad = (self.c1 >= -self.alpha) | (self.c2 >= -self.alpha)
        return sorted(set(np.nonzero(bad)[1].tolist())) if bad.size else []


def margin_values(sys: AuxDifferentialSystem):
    """``c1 = dpi/ds1 * R_ii + Lambda_ii`` and ``c2 = dpi/ds2 * R_ii`` per dimension."""
    r = sys.r_diag
    return sys.pi_s1 * r + sys.lambda_diag, sys.pi_s2 * r


def margins(sampler: Callable, states: Iterable, alpha: float) -> MarginReport:
    """Evaluate the margins at every sampled state.

    ``sampler(state)`` returns the :class:`AuxDifferentialSystem` at that
    state.  States are processed in the given order, so the report is
    reproducible for a fixed sample set.
    """
    c1s, c2s = [], []
    for s in states:
        c1, c2 = margin_values(sampler(s))
        c1s.append(c1)
        c2s.append(c2)
    if not c1s:
        raise ValueError("no states to evaluate")
    c1 = np.array(c1s)
    c2 = np.array(c2s)
    return MarginReport(c1=c1, c2=c2, alpha=float(alpha), worst_c1=float(c1.max()),
                        worst_c2=float(c2.max()), n_samples=len(c1s))


def margins_of(systems: Iterable[AuxDifferentialSystem], alpha: float) -> MarginReport:
    return margins(lambda s: s, systems, alpha)


@dataclass(frozen=True)
class CharRoots:
    root1: complex
    root2: complex
    complex_pair: bool

    @property
    def max_real(self) -> float:
        return max(self.root1.real, self.root2.real)


def char_roots(Lambda_ii: float, R_ii: float, j1: float, j2: float) -> CharRoots:
    """Roots of ``s^2 - (Lambda_ii + j1 R_ii) s - R_ii j2 = 0``, larger real part first."""
    b = -(Lambda_ii + j1 * R_ii)
    c = -R_ii * j2
    disc = b * b - 4.0 * c
    if disc < 0:
        sq = cmath.sqrt(disc)
        r1, r2 = (-b + sq) / 2, (-b - sq) / 2
        return CharRoots(complex(r1), complex(r2), True)
    sq = disc ** 0.5
    q = -0.5 * (b + (sq if b >= 0 else -sq))
    if q == 0.0:
        r1 = r2 = 0.0
    else:
        r1, r2 = q, c / q
    hi, lo = max(r1, r2), min(r1, r2)
    return CharRoots(complex(hi), complex(lo), False)


@dataclass(frozen=True)
class Theorem1Verdict:
    ok: bool
    lambda_max_f1: float
    nu_plus: float
    threshold: float
    beta: float


def theorem1_lambda_max(F1, F2, beta: float) -> Theorem1Verdict:
    """``lambda_max(F1^T + F1) < -(beta + max(nu+, 0))`` with ``nu+ = lambda_max(F2^T + F2)``."""
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    if F1.shape != F2.shape or F1.shape[0] != F1.shape[1]:
        raise ValueError("F1 and F2 must be square and of equal size")
    lam = sym_lambda_max(F1)
    nu = sym_lambda_max(F2)
    thr = -(beta + max(nu, 0.0))
    return Theorem1Verdict(ok=lam < thr, lambda_max_f1=lam, nu_plus=nu, threshold=thr, beta=float(beta))


def model_error_check(F1_real, F1_hat, beta: float, nu_plus: float) -> bool:
    """True when the real symmetric part is dominated by the model's and the model certifies."""
    F1_real = np.asarray(F1_real, dtype=float)
    F1_hat = np.asarray(F1_hat, dtype=float)
    if F1_real.shape != F1_hat.shape:
        raise ValueError("F1_real and F1_hat differ in shape")
    diff = sym_lambda_max(F1_real - F1_hat)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(F1_hat))))
    return diff <= tol and sym_lambda_max(F1_hat) < -(beta + max(nu_plus, 0.0))


@dataclass(frozen=True)
class ContractionFit:
    """Log-linear fit of pair distances.

    ``beta_hat`` is the mean decay rate over pairs, ``r2`` the worst
    coefficient of determination among them.
    """

    beta_hat: float
    r2: float
    horizon: float
    pair_count: int
    slopes: tuple = ()
    r2s: tuple = ()
    beta_hat_z: Optional[float] = None


def _fit_log(t, d, floor):
    keep = d > floor
    t, d = t[keep], d[keep]
    if t.size < 3:
        raise ValueError("fewer than three samples above the distance floor")
    logd = np.log(d)
    slope, icpt = np.polyfit(t, logd, 1)
    resid = logd - (slope * t + icpt)
    sst = float(np.sum((logd - logd.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0 else 1.0
    return float(slope), min(max(r2, 0.0), 1.0)


def empirical_contraction(simulate: Callable, init_pairs, horizon: float, skip_frac: float = 0.05,
                          floor: float = 1e-10, T_y=None) -> ContractionFit:
    """Fit the exponential decay of ``||xi1(t) - xi2(t)||`` over trajectory pairs.

    ``simulate(y0, horizon)`` returns a :class:`~modcontract.numerics.Trajectory`
    in latent coordinates.  The first ``skip_frac`` of the horizon is left
    out of the fit.  With ``T_y`` the fit is repeated on ``z = T_y y``.
    """
    slopes, r2s, slopes_z = [], [], []
    for y0a, y0b in init_pairs:
        ta = simulate(np.asarray(y0a, dtype=float), horizon)
        tb = simulate(np.asarray(y0b, dtype=float), horizon)
        window = ta.t >= ta.t[0] + skip_frac * horizon
        diff = (ta.y - tb.y)[window]
        s, r2 = _fit_log(ta.t[window], np.linalg.norm(diff, axis=1), floor)
        slopes.append(s)
        r2s.append(r2)
        if T_y is not None:
            sz, _ = _fit_log(ta.t[window], np.linalg.norm(diff @ np.asarray(T_y).T, axis=1), floor)
            slopes_z.append(sz)
    if not slopes:
        raise ValueError("no trajectory pairs given")
    return ContractionFit(beta_hat=-float(np.mean(slopes)), r2=float(min(r2s)), horizon=float(horizon),
                          pair_count=len(slopes), slopes=tuple(slopes), r2s=tuple(r2s),
                          beta_hat_z=-float(np.mean(slopes_z)) if slopes_z else None)


@dataclass(frozen=True)
class RobustnessBound:
    d_bar: float
    beta: float
    scale: float
    ball_radius: float
    observed_steady: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.observed_steady <= self.ball_radius * (1.0 + self.slack)


def default_robustness_scale(tp: TransformPair) -> float:
    """``sup ||Theta_M|| * sqrt(m_bar / m_low)`` for ``M = Theta_M^T Theta_M``."""
    Ta_inv = np.linalg.inv(tp.T_a)
    eig = np.concatenate([np.linalg.eigvalsh(tp.T_y.T @ tp.T_y), np.linalg.eigvalsh(Ta_inv.T @ Ta_inv)])
    m_low, m_bar = float(eig.min()), float(eig.max())
    return float(np.sqrt(m_bar) * np.sqrt(m_bar / m_low))


def robustness_check(simulate: Callable, y0, disturbance, d_bar: float, beta: float, horizon: float,
                     scale: float = 1.0, slack: float = 0.0, tail: float = 0.2) -> RobustnessBound:
    """Compare a nominal and a disturbed trajectory from the same start.

    ``simulate(y0, horizon, disturbance)`` returns a trajectory; ``None``
    means undisturbed.  The observed steady distance is the maximum over the
    final ``tail`` fraction of the horizon.
    """
    nominal = simulate(np.asarray(y0, dtype=float), horizon, None)
    disturbed = simulate(np.asarray(y0, dtype=float), horizon, disturbance)
    dist = np.linalg.norm(disturbed.y - nominal.y, axis=1)
    window = nominal.t >= nominal.t[0] + (1.0 - tail) * horizon
    observed = float(dist[window].max())
    return RobustnessBound(d_bar=float(d_bar), beta=float(beta), scale=float(scale),
                           ball_radius=float(scale * d_bar / beta), observed_steady=observed,
                           slack=float(slack))
