import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modcontract.envs import SecondOrderPlant
from modcontract.errors import DimMismatch, MixedKp, NegativeDiscriminant
from modcontract.latent import (CompositeMap, GainSet, LatentLTI, central_difference, composite_apply,
                                composite_zero_decay_rate, finite_difference_jacobians, linear_model,
                                lti_model, solve_composite_gains)
from modcontract.numerics import integrate_rk4
from oracles import random_gainset_arrays, smooth_input


def composition_residual(gains, branch, rng, horizon=2.0, dt=1e-3):
    plant = SecondOrderPlant(gains, branch)
    u_fn = smooth_input(rng, gains.dim)
    e0 = rng.uniform(-1, 1, size=gains.dim)
    ed0 = rng.uniform(-1, 1, size=gains.dim)
    traj, ys, us = plant.simulate_open_loop(u_fn, e0, ed0, horizon, dt)
    ydot = central_difference(traj.t, ys)
    res = np.linalg.norm(plant.lti.a * ydot + plant.lti.b * ys + us, axis=1)
    scale = np.linalg.norm(ys, axis=1) + np.linalg.norm(us, axis=1) + 1.0
    return float(np.max(res / scale))


class TestComposite:
    def test_identity_gains(self):
        m = CompositeMap(np.ones(2), np.ones(2))
        np.testing.assert_array_equal(composite_apply(m, [1.0, 0.0], [0.0, 1.0]), [1.0, 1.0])

    def test_on_manifold(self):
        m = CompositeMap(np.diag([4.0, 4.0]), np.diag([2.0, 2.0]))
        np.testing.assert_array_equal(composite_apply(m, [1.0, 1.0], [-2.0, -2.0]), [0.0, 0.0])

    def test_dim_mismatch(self):
        m = CompositeMap(np.ones(2), np.ones(2))
        with pytest.raises(DimMismatch):
            composite_apply(m, [1.0, 0.0, 0.0], [0.0, 1.0])

    @pytest.mark.parametrize("k1,k2,rate", [([1, 1, 1], [1, 1, 1], [1, 1, 1]), ([4], [2], [2]),
                                            ([1, 9], [2, 3], [0.5, 3])])
    def test_decay_rate(self, k1, k2, rate):
        np.testing.assert_allclose(composite_zero_decay_rate(CompositeMap(np.diag(k1), np.diag(k2))), rate)

    @pytest.mark.parametrize("k1,k2", [([-1.0], [1.0]), ([1.0], [0.0]), ([[1.0, 0.5], [0.0, 1.0]], [1.0, 1.0])])
    def test_invalid(self, k1, k2):
        with pytest.raises(ValueError):
            CompositeMap(k1, k2)


class TestSolver:
    def test_worked_case(self):
        m, l = solve_composite_gains(GainSet([1.0], [4.0], [4.0]))
        assert m.k1[0] == 4.0 and m.k2[0] == 2.0 and l.a[0] == 0.5 and l.b[0] == 1.0

    def test_worked_case_expands_to_error_dynamics(self):
        # A y' + B y = 0.5 (4 e' + 2 e'') + (4 e + 2 e') = e'' + 4 e' + 4 e
        m, l = solve_composite_gains(GainSet([1.0], [4.0], [4.0]))
        coeff_edd = l.a[0] * m.k2[0]
        coeff_ed = l.a[0] * m.k1[0] + l.b[0] * m.k2[0]
        coeff_e = l.b[0] * m.k1[0]
        assert (coeff_edd, coeff_ed, coeff_e) == (1.0, 4.0, 4.0)

    def test_kp_zero(self):
        m, l = solve_composite_gains(GainSet([2.0], [0.0], [6.0]))
        np.testing.assert_array_equal(m.k1, [0.0])
        np.testing.assert_array_equal(m.k2, [1.0])
        np.testing.assert_array_equal(l.a, [2.0])
        np.testing.assert_array_equal(l.b, [6.0])

    def test_negative_discriminant(self):
        with pytest.raises(NegativeDiscriminant):
            solve_composite_gains(GainSet([1.0], [10.0], [2.0]))

    def test_mixed_kp(self):
        with pytest.raises(MixedKp):
            solve_composite_gains(GainSet([1.0, 1.0], [0.0, 4.0], [4.0, 4.0]))

    def test_bad_branch(self):
        with pytest.raises(ValueError):
            solve_composite_gains(GainSet([1.0], [4.0], [4.0]), branch="both")

    def test_plus_branch_is_faster_on_manifold(self):
        g = GainSet([1.0], [3.0], [5.0])
        mp, _ = solve_composite_gains(g, "plus")
        mm, _ = solve_composite_gains(g, "minus")
        assert mp.k2[0] < mm.k2[0]
        assert composite_zero_decay_rate(mp)[0] > composite_zero_decay_rate(mm)[0]

    @settings(max_examples=60, deadline=None)
    @given(lam=st.floats(0.1, 5.0), kp=st.floats(0.1, 20.0), extra=st.floats(1.0, 3.0),
           branch=st.sampled_from(["plus", "minus"]))
    def test_coefficients_match_error_dynamics(self, lam, kp, extra, branch):
        kd = np.sqrt(4 * kp * lam) * extra
        m, l = solve_composite_gains(GainSet([lam], [kp], [kd]), branch)
        a, b, k1, k2 = l.a[0], l.b[0], m.k1[0], m.k2[0]
        # A K2 e'' + (A K1 + B K2) e' + B K1 e == lam e'' + kd e' + kp e
        np.testing.assert_allclose([a * k2, a * k1 + b * k2, b * k1], [lam, kd, kp], rtol=1e-9)

    @pytest.mark.parametrize("branch", ["plus", "minus"])
    def test_composition_residual(self, branch):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            gains = GainSet(*random_gainset_arrays(rng, n))
            assert composition_residual(gains, branch, rng) <= 1e-4

    def test_composition_residual_kp_zero(self):
        rng = np.random.default_rng(12)
        gains = GainSet(*random_gainset_arrays(rng, 2, kp_zero=True))
        assert composition_residual(gains, "plus", rng) <= 1e-4

    def test_manifold_invariance_and_decay(self):
        g = GainSet([1.0, 2.0], [3.0, 1.0], [5.0, 4.0])
        plant = SecondOrderPlant(g)
        e0 = np.array([1.0, -0.5])
        ed0 = -plant.composite.k1 / plant.composite.k2 * e0
        traj, ys, _ = plant.simulate_open_loop(lambda t: np.zeros(2), e0, ed0, 2.0)
        assert np.max(np.abs(ys)) < 1e-9
        rate = np.min(composite_zero_decay_rate(plant.composite))
        enorm = np.linalg.norm(traj.y[:, :2], axis=1)
        slope = np.polyfit(traj.t, np.log(enorm), 1)[0]
        assert -slope >= rate - 1e-2


class TestLTIModel:
    def test_identity(self):
        model = lti_model(LatentLTI(np.ones(2), np.ones(2)))
        np.testing.assert_array_equal(model.derivative([1.0, 2.0], [0.5, -1.0]), [-1.5, -1.0])

    def test_scalar(self):
        model = lti_model(LatentLTI([0.5], [1.0]))
        np.testing.assert_array_equal(model.derivative([2.0], [0.0]), [-4.0])
        np.testing.assert_array_equal(model.jac_u([2.0], [0.0]), [[-2.0]])

    def test_jacobians_match_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            model = lti_model(LatentLTI(rng.uniform(0.2, 3, n), rng.uniform(0.2, 3, n)))
            y, u = rng.standard_normal(n), rng.standard_normal(n)
            jy, ju = finite_difference_jacobians(model, y, u)
            np.testing.assert_allclose(model.jac_y(y, u), jy, atol=1e-10)
            np.testing.assert_allclose(model.jac_u(y, u), ju, atol=1e-10)

    def test_open_loop_decay(self):
        model = lti_model(LatentLTI([0.5], [1.0]))
        tr = integrate_rk4(lambda t, y: model.derivative(y, [0.0], t), [1.0], 0.0, 1.0)
        assert tr.final[0] == pytest.approx(np.exp(-2.0), abs=1e-9)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            LatentLTI([0.0], [1.0])

    def test_linear_model_shapes(self):
        with pytest.raises(DimMismatch):
            linear_model(np.eye(2), np.eye(3))


def test_central_difference_quadratic_exact():
    t = np.linspace(0.0, 1.0, 11)
    y = (t ** 2)[:, None]
    np.testing.assert_allclose(central_difference(t, y)[:, 0], 2 * t, atol=1e-12)
