import numpy as np
import pytest

from steerguard.autodiff import Optimizer, OptimizerState, Tensor, adam_step, backward, sgd_step
from steerguard.autodiff import ops
from steerguard.core.errors import GradientError, ValidationError


def _with_grad(values, grad):
    t = Tensor(np.array(values), requires_grad=True)
    t.grad = np.array(grad)
    return t


def test_sgd_step():
    p = _with_grad([1.0, 2.0], [0.5, -1.0])
    state = OptimizerState(kind='sgd', learning_rate=0.1)
    sgd_step([p], state)
    np.testing.assert_allclose(p.data, [0.95, 2.1])
    assert state.step_count == 1


def test_first_adam_step_moves_by_learning_rate():
    p = _with_grad([1.0, 2.0, 3.0], [0.5, -3.0, 1e-3])
    state = OptimizerState(kind='adam', learning_rate=0.01)
    adam_step([p], state)
    np.testing.assert_allclose(p.data, [0.99, 2.01, 2.99], atol=1e-6)


def test_adam_keeps_moments_per_parameter():
    a = _with_grad([0.0], [1.0])
    b = _with_grad([0.0, 0.0], [1.0, 1.0])
    state = OptimizerState(kind='adam', learning_rate=0.1)
    adam_step([a, b], state)
    assert state.first_moments[0].shape == (1,)
    assert state.first_moments[1].shape == (2,)


def test_missing_gradient():
    p = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(GradientError):
        sgd_step([p], OptimizerState(kind='sgd', learning_rate=0.1))


def test_state_validation():
    with pytest.raises(ValidationError):
        OptimizerState(kind='rmsprop', learning_rate=0.1)
    with pytest.raises(ValidationError):
        OptimizerState(kind='adam', learning_rate=-1.0)
    with pytest.raises(ValidationError):
        adam_step([_with_grad([1.0], [1.0])], OptimizerState(kind='sgd', learning_rate=0.1))


@pytest.mark.parametrize('kind', ['adam', 'sgd'])
def test_optimizer_minimizes_quadratic(kind):
    w = Tensor(np.array([2.0, -1.5]), requires_grad=True)
    optimizer = Optimizer([w], kind, learning_rate=0.1)
    target = Tensor(np.zeros(2))
    for _ in range(200):
        optimizer.zero_grad()
        backward(ops.mse_loss(w, target), inputs=optimizer.params)
        optimizer.step()
    assert np.abs(w.data).max() < 0.05
