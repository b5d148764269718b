import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import solve_discrete_are

from mpsc.errors import ConvergenceError, DimensionError
from mpsc.linsys import (LinearModel, Trajectory, TubeGain, apply_tube_feedback, lqr_gain,
                         riccati_residual, spectral_radius, step_nominal, step_plant)

from .conftest import A_MODEL, A_TRUE, B, K_PAPER

unit = arrays(float, 2, elements=st.floats(-1, 1))


def test_model_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        LinearModel([[1.0, 0.0]], [[1.0]])
    with pytest.raises(DimensionError):
        LinearModel(np.eye(2), [[1.0]])
    with pytest.raises(ValueError):
        LinearModel([[np.nan]], [[1.0]])


def test_model_is_immutable(model):
    with pytest.raises(ValueError):
        model.A[0, 0] = 5.0


def test_step_nominal_values(model, plant):
    assert np.array_equal(step_nominal(model, [0, 0], [0]), [0.0, 0.0])
    np.testing.assert_allclose(step_nominal(plant, [-0.7, 1.0], [0]), [-0.6, 1.01], atol=1e-15)
    np.testing.assert_allclose(step_nominal(plant, [1.0, 0.0], [2.5]), [1.0, -0.05], atol=1e-15)


def test_step_nominal_dimension_check(model):
    with pytest.raises(DimensionError):
        step_nominal(model, [0, 0, 0], [0])


@settings(max_examples=50, deadline=None)
@given(unit, unit, st.floats(-1, 1), st.floats(-1, 1))
def test_step_nominal_linear(z1, z2, v1, v2):
    m = LinearModel(A_MODEL, B)
    lhs = step_nominal(m, z1 + z2, [v1 + v2])
    rhs = step_nominal(m, z1, [v1]) + step_nominal(m, z2, [v2]) - step_nominal(m, [0, 0], [0])
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_step_plant_mismatch(model, plant):
    _, w = step_plant(model, model, [0.3, -0.2], [1.0])
    assert np.array_equal(w, [0.0, 0.0])
    _, w = step_plant(plant, model, [1.0, 0.0], [0.0])
    np.testing.assert_allclose(w, [0.0, -0.07], atol=1e-15)
    _, w = step_plant(plant, model, [0.0, 1.0], [0.0])
    np.testing.assert_allclose(w, [0.0, 0.02], atol=1e-15)


def test_step_plant_noise_enters_disturbance(model, plant):
    x1, w1 = step_plant(plant, model, [0.1, 0.2], [0.3], noise=[0.01, -0.02])
    x0, w0 = step_plant(plant, model, [0.1, 0.2], [0.3])
    np.testing.assert_allclose(x1 - x0, [0.01, -0.02], atol=1e-15)
    np.testing.assert_allclose(w1 - w0, [0.01, -0.02], atol=1e-15)


def test_step_plant_deterministic(model, plant):
    a = step_plant(plant, model, [0.4, -0.1], [1.2])
    b = step_plant(plant, model, [0.4, -0.1], [1.2])
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_tube_feedback(gain):
    assert np.array_equal(apply_tube_feedback(gain, [0.7], [0.2, 0.3], [0.2, 0.3]), [0.7])
    np.testing.assert_allclose(apply_tube_feedback(gain, [0.0], [0.1, 0.0], [0.0, 0.0]), [-0.412])
    np.testing.assert_allclose(apply_tube_feedback(gain, [1.0], [0.0, -0.1], [0.0, 0.0]), [1.532])


def test_tube_gain_rejects_unstable(model):
    with pytest.raises(ValueError, match="Schur"):
        TubeGain([[0.0, 0.0]], LinearModel([[1.1, 0.0], [0.0, 0.5]], B))
    with pytest.raises(DimensionError):
        TubeGain([[1.0]], model)


def test_paper_gain_spectral_radius(model, plant):
    # closed loop on the model is [[1, 0.1], [-0.642, 0.248]]
    rho = spectral_radius(np.array(A_MODEL) + np.array(B) @ np.array(K_PAPER))
    lam = np.roots([1.0, -1.248, 0.248 + 0.0642])
    assert rho == pytest.approx(np.abs(lam).max(), abs=1e-12)
    assert rho == pytest.approx(0.9018, abs=1e-4)
    rho_true = spectral_radius(np.array(A_TRUE) + np.array(B) @ np.array(K_PAPER))
    assert 0.0 < rho_true < 1.0


def test_spectral_radius_simple():
    assert spectral_radius(np.eye(2)) == pytest.approx(1.0)
    assert spectral_radius([[0.5, 0.0], [0.0, -0.25]]) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        spectral_radius([[1.0, 2.0]])


def test_spectral_radius_checks_eigen_residual(monkeypatch):
    def bad_eig(M):
        return np.array([0.5, 0.1]), np.eye(2)

    monkeypatch.setattr(np.linalg, "eig", bad_eig)
    with pytest.raises(ConvergenceError):
        spectral_radius([[1.0, 1.0], [0.0, 1.0]])


def test_lqr_scalar_cases():
    K = lqr_gain(LinearModel([[0.0]], [[1.0]]), [[1.0]], [[1.0]]).K
    assert K[0, 0] == pytest.approx(0.0, abs=1e-12)
    K = lqr_gain(LinearModel([[1.0]], [[1.0]]), [[1.0]], [[1.0]]).K
    # p = (1 + sqrt 5)/2 solves p = 1 + p - p^2/(1 + p); K = -p/(1 + p)
    p = (1 + np.sqrt(5)) / 2
    assert K[0, 0] == pytest.approx(-p / (1 + p), abs=1e-10)
    assert K[0, 0] == pytest.approx(-0.618, abs=1e-3)


def test_lqr_paper_model(model):
    Q, R = np.eye(2), np.eye(1)
    g = lqr_gain(model, Q, R)
    assert spectral_radius(g.closed_loop) < 1.0
    A, Bm = model.A, model.B
    # oracle: scipy's Schur-method Riccati solver
    P = solve_discrete_are(A, Bm, Q, R)
    assert riccati_residual(model, Q, R, P) < 1e-9
    np.testing.assert_allclose(g.K, -np.linalg.solve(R + Bm.T @ P @ Bm, Bm.T @ P @ A), atol=1e-9)


def test_lqr_iteration_cap(model):
    with pytest.raises(ConvergenceError):
        lqr_gain(model, np.eye(2), np.eye(1), max_iter=3)


def test_trajectory_validation():
    Trajectory(np.zeros((3, 2)), np.zeros((2, 1)))
    with pytest.raises(DimensionError):
        Trajectory(np.zeros((3, 2)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        Trajectory(np.full((2, 2), np.inf), np.zeros((1, 1)))
