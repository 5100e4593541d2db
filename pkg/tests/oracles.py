"""Independent reference computations shared by the test modules."""

import numpy as np


def random_diagonalizable(rng, n, lam_range=(-5.0, -0.1), min_gap=0.05, cond_max=50.0):
    """``V diag(lam) V^-1`` with distinct real eigenvalues and a well-conditioned ``V``."""
    while True:
        lam = np.sort(rng.uniform(*lam_range, size=n))
        if n > 1 and np.min(np.diff(lam)) < min_gap:
            continue
        V = rng.standard_normal((n, n))
        if np.linalg.cond(V) < cond_max:
            return V @ np.diag(lam) @ np.linalg.inv(V), lam, V


def random_nonsingular(rng, n, cond_max=1e3):
    while True:
        A = rng.standard_normal((n, n))
        if np.linalg.cond(A) < cond_max:
            return A


def eigvec_2x2_lower(a, c, d):
    """Unit eigenvectors of ``[[a, 0], [c, d]]`` with ``a != d``, first nonzero entry positive.

    Eigenvalue ``d`` has eigenvector ``(0, 1)``; eigenvalue ``a`` has
    ``(a - d, c)`` normalized.
    """
    v_a = np.array([a - d, c], dtype=float)
    v_a /= np.linalg.norm(v_a)
    if v_a[0] < 0:
        v_a = -v_a
    return {a: v_a, d: np.array([0.0, 1.0])}


def quadratic_roots(b, c):
    """Roots of ``s^2 + b s + c`` from numpy's companion-matrix solver."""
    return np.roots([1.0, b, c])


def sym2_lambda_max(M):
    """Largest eigenvalue of a symmetric 2x2 matrix in closed form."""
    a, b, d = M[0, 0], M[0, 1], M[1, 1]
    return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + b * b)


def critically_damped(t, e0=1.0, omega=2.0):
    """``e(t)`` for ``e'' + 2 omega e' + omega^2 e = 0`` with ``e(0) = e0``, ``e'(0) = 0``."""
    return e0 * (1.0 + omega * t) * np.exp(-omega * t)


def random_gainset_arrays(rng, n, kp_zero=False):
    """``(lambda_d, kp, kd)`` with nonnegative discriminant in every dimension."""
    lam = rng.uniform(0.5, 3.0, size=n)
    if kp_zero:
        return lam, np.zeros(n), rng.uniform(0.5, 10.0, size=n)
    kp = rng.uniform(0.5, 20.0, size=n)
    kd = np.sqrt(4 * kp * lam) * rng.uniform(1.0, 2.0, size=n)
    return lam, kp, kd


def smooth_input(rng, n, amplitude=1.0, n_modes=3):
    """Bounded smooth input ``u(t)``: a random sum of sinusoids per dimension."""
    amp = rng.uniform(-1.0, 1.0, size=(n_modes, n)) * amplitude / n_modes
    freq = rng.uniform(0.2, 3.0, size=(n_modes, n))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n_modes, n))
    return lambda t: np.sum(amp * np.sin(freq * t + phase), axis=0)


def fd_bank_jacobian(bank, z, s2, h=1e-6):
    """Central differences of ``bank.forward`` in ``z_i`` and ``s2_i`` (diagonals only)."""
    from modcontract.policy import PolicyState

    n = bank.dim
    d1, d2 = np.zeros(n), np.zeros(n)
    for i in range(n):
        dz = np.zeros(n)
        dz[i] = h
        d1[i] = (bank.forward(z + dz, PolicyState(s2, 0.0))[i]
                 - bank.forward(z - dz, PolicyState(s2, 0.0))[i]) / (2 * h)
        d2[i] = (bank.forward(z, PolicyState(s2 + dz, 0.0))[i]
                 - bank.forward(z, PolicyState(s2 - dz, 0.0))[i]) / (2 * h)
    return d1, d2
