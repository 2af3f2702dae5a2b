"""Adaptive-moment updates against a hand-rolled scalar reference."""

import numpy as np
import pytest

from kggan.autodiff import Tensor
from kggan.errors import ContractError, NumericalAbort
from kggan.optim import AdamState, adam_step


def scalar_adam_reference(grad_fn, w0, lr, beta1, beta2, eps, steps):
    """Plain-float Adam on a scalar problem; returns the weight trajectory."""
    w, m, v = w0, 0.0, 0.0
    trajectory = []
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        w = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        trajectory.append(w)
    return trajectory


class TestAdam:
    def test_zero_gradients_leave_params_unchanged(self, rng):
        p = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        before = p.data.copy()
        state = AdamState.for_params([p])
        adam_step([p], state, grads=[np.zeros((3, 3))])
        assert np.array_equal(p.data, before)
        assert state.step_count == 1

    def test_first_step_magnitude_is_learning_rate(self, rng):
        p = Tensor(np.zeros(4), requires_grad=True)
        state = AdamState.for_params([p], learning_rate=0.05)
        g = np.full(4, 1.7)
        adam_step([p], state, grads=[g])
        # bias-corrected ratio g / sqrt(g^2) = sign(g)
        assert np.allclose(np.abs(p.data), 0.05, rtol=1e-6)

    def test_quadratic_trajectory_matches_scalar_reference(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        p = Tensor([1.0], requires_grad=True)
        state = AdamState.for_params([p], learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps)
        mine = []
        for _ in range(10):
            adam_step([p], state, grads=[2.0 * p.data])
            mine.append(float(p.data[0]))
        expected = scalar_adam_reference(lambda w: 2.0 * w, 1.0, lr, b1, b2, eps, 10)
        assert np.max(np.abs(np.asarray(mine) - np.asarray(expected))) < 1e-10

    def test_step_count_increments(self, rng):
        p = Tensor(rng.standard_normal(2), requires_grad=True)
        state = AdamState.for_params([p])
        for expected in range(1, 5):
            adam_step([p], state, grads=[np.ones(2)])
            assert state.step_count == expected

    def test_second_moment_nonnegative(self, rng):
        p = Tensor(rng.standard_normal(6), requires_grad=True)
        state = AdamState.for_params([p])
        for _ in range(20):
            adam_step([p], state, grads=[rng.standard_normal(6)])
            assert np.all(state.second_moment[0] >= 0.0)

    def test_nan_gradient_aborts_naming_parameter(self):
        p = Tensor(np.zeros(2), requires_grad=True, name="G.w1")
        state = AdamState.for_params([p])
        with pytest.raises(NumericalAbort, match="G.w1"):
            adam_step([p], state, grads=[np.array([np.nan, 0.0])])

    def test_missing_gradient_rejected(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        state = AdamState.for_params([p])
        with pytest.raises(ContractError):
            adam_step([p], state)

    def test_state_misalignment_rejected(self, rng):
        p = Tensor(np.zeros(2), requires_grad=True)
        q = Tensor(np.zeros(2), requires_grad=True)
        state = AdamState.for_params([p])
        with pytest.raises(ContractError):
            adam_step([p, q], state, grads=[np.zeros(2), np.zeros(2)])
