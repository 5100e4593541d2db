import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modcontract.errors import ComplexSpectrum, Defective, Diverged, Singular
from modcontract.numerics import (eigendecompose_real, integrate_rk4, qr_decompose, rk4_step,
                                  skew_permutation, time_grid)
from oracles import eigvec_2x2_lower, random_diagonalizable, random_nonsingular


class TestEigen:
    def test_diagonal_input(self):
        res = eigendecompose_real(np.diag([-2.0, -1.0]))
        np.testing.assert_array_equal(res.eigenvalues, [-2.0, -1.0])
        np.testing.assert_array_equal(res.eigenvectors, np.eye(2))

    def test_lower_triangular_peg_shape(self):
        a, c, d = -1 / 0.0437, 7.0, -1 / 0.01
        res = eigendecompose_real([[a, 0.0], [c, d]])
        np.testing.assert_allclose(res.eigenvalues, [-100.0, a], rtol=1e-12)
        ref = eigvec_2x2_lower(a, c, d)
        np.testing.assert_allclose(res.eigenvectors[:, 0], ref[d], atol=1e-12)
        np.testing.assert_allclose(res.eigenvectors[:, 1], ref[a], atol=1e-12)
        assert res.eigenvalues[1] == pytest.approx(-22.883295194508008)

    def test_rotation_is_complex(self):
        with pytest.raises(ComplexSpectrum):
            eigendecompose_real([[0.0, 1.0], [-1.0, 0.0]])

    def test_defective(self):
        with pytest.raises((Defective, ComplexSpectrum)):
            eigendecompose_real([[1.0, 1.0], [0.0, 1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            eigendecompose_real(np.ones((2, 3)))

    def test_sign_and_norm_convention(self):
        rng = np.random.default_rng(3)
        A, _, _ = random_diagonalizable(rng, 4)
        V = eigendecompose_real(A).eigenvectors
        np.testing.assert_allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-14)
        for col in V.T:
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0

    def test_ascending_order_and_pairs(self):
        rng = np.random.default_rng(4)
        A, lam, _ = random_diagonalizable(rng, 5)
        res = eigendecompose_real(A)
        assert np.all(np.diff(res.eigenvalues) >= 0)
        np.testing.assert_allclose(res.eigenvalues, lam, rtol=1e-9, atol=1e-9)
        for i in range(5):
            v = res.eigenvectors[:, i]
            assert np.linalg.norm(A @ v - res.eigenvalues[i] * v) <= 1e-9 * np.linalg.norm(A)

    def test_reconstruct_1000_random(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(2, 6))
            A, _, _ = random_diagonalizable(rng, n)
            res = eigendecompose_real(A)
            assert np.linalg.norm(res.reconstruct() - A) <= 1e-8 * np.linalg.norm(A)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        A, _, _ = random_diagonalizable(rng, 3)
        r1, r2 = eigendecompose_real(A), eigendecompose_real(A.copy())
        np.testing.assert_array_equal(r1.eigenvectors, r2.eigenvectors)


class TestQR:
    def test_identity(self):
        Q, R = qr_decompose(np.eye(3))
        np.testing.assert_allclose(Q, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(R, np.eye(3), atol=1e-15)

    def test_swap(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        Q, R = qr_decompose(P)
        np.testing.assert_allclose(Q, P, atol=1e-15)
        np.testing.assert_allclose(R, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(Q @ R, P, atol=1e-15)

    @pytest.mark.parametrize("A", [[[1.0, 1.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]])
    def test_singular(self, A):
        with pytest.raises(Singular):
            qr_decompose(A)

    def test_1000_random(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(2, 6))
            A = random_nonsingular(rng, n)
            Q, R = qr_decompose(A)
            assert np.linalg.norm(Q.T @ Q - np.eye(n)) < 1e-10
            assert np.all(np.tril(R, -1) == 0)
            assert np.all(np.diag(R) > 0)
            assert np.linalg.norm(Q @ R - A) < 1e-10 * np.linalg.norm(A)


class TestSkew:
    def test_small(self):
        np.testing.assert_array_equal(skew_permutation(1), [[1.0]])
        np.testing.assert_array_equal(skew_permutation(2), [[0.0, 1.0], [1.0, 0.0]])
        P3 = skew_permutation(3)
        assert [tuple(ix) for ix in np.argwhere(P3 == 1)] == [(0, 2), (1, 1), (2, 0)]

    @pytest.mark.parametrize("n", range(1, 9))
    def test_involution(self, n):
        P = skew_permutation(n)
        np.testing.assert_array_equal(P @ P, np.eye(n))

    def test_invalid(self):
        with pytest.raises(ValueError):
            skew_permutation(0)


class TestRK4:
    def test_constant(self):
        tr = integrate_rk4(lambda t, y: np.zeros_like(y), [3.0], 0.0, 1.0)
        assert np.all(tr.y == 3.0)
        assert tr.t[0] == 0.0 and tr.t[-1] == 1.0

    def test_exponential_decay(self):
        tr = integrate_rk4(lambda t, y: -y, [1.0], 0.0, 1.0, dt=1e-3)
        assert abs(tr.final[0] - np.exp(-1.0)) < 1e-6

    def test_divergence_carries_partial(self):
        with pytest.raises(Diverged) as info:
            integrate_rk4(lambda t, y: y, [1.0], 0.0, 100.0, dt=1e-2, bound=1e6)
        exc = info.value
        assert exc.partial is not None and exc.t > np.log(1e6) - 0.1
        assert np.all(np.abs(exc.partial.y) <= 1e6)

    def test_fourth_order(self):
        lam = -2.0
        errs = []
        for dt in (0.1, 0.05, 0.025):
            tr = integrate_rk4(lambda t, y: lam * y, [1.0], 0.0, 2.0, dt=dt)
            errs.append(np.max(np.abs(tr.y[:, 0] - np.exp(lam * tr.t))))
        assert errs[0] / errs[1] >= 14 and errs[1] / errs[2] >= 14

    def test_grid_short_last_step(self):
        t = time_grid(0.0, 1.0, 0.3)
        np.testing.assert_allclose(t, [0.0, 0.3, 0.6, 0.9, 1.0])

    @pytest.mark.parametrize("dt", [0.0, -1e-3])
    def test_bad_dt(self, dt):
        with pytest.raises(ValueError):
            time_grid(0.0, 1.0, dt)

    @settings(max_examples=50, deadline=None)
    @given(lam=st.floats(-3.0, 1.0), y0=st.floats(-5.0, 5.0), h=st.floats(1e-3, 0.1))
    def test_single_step_matches_taylor(self, lam, y0, h):
        y1 = rk4_step(lambda t, y: lam * y, 0.0, np.array([y0]), h)[0]
        z = lam * h
        assert y1 == pytest.approx(y0 * (1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24), rel=1e-12, abs=1e-12)
