import numpy as np
import pytest

from steerguard.autodiff import Tensor, grad_check
from steerguard.autodiff import ops
from steerguard.core.errors import GradientError
from steerguard.models import ARCHITECTURES, build_model
from steerguard.models.zoo import to_nchw


def test_dense_tanh(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)
    target = Tensor(rng.normal(size=(3, 2)))
    assert grad_check(lambda: ops.mse_loss(ops.tanh(ops.dense(x, w, b)), target), [w, b]) < 1e-4


@pytest.mark.parametrize('stride', [1, 2])
def test_conv(rng, stride):
    x = Tensor(rng.normal(size=(2, 3, 5, 5)), requires_grad=True)
    w = Tensor(rng.normal(size=(2, 3, 3, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)
    assert grad_check(lambda: ops.mean(ops.tanh(ops.conv2d(x, w, b, stride=stride))), [x, w, b]) < 1e-4


def test_norms_and_bce(rng):
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    p = Tensor(rng.uniform(0.1, 0.9, size=(4, 1)), requires_grad=True)
    target = Tensor(np.array([[1.0], [0.0], [1.0], [0.0]]))
    assert grad_check(lambda: ops.mean(ops.l2_norm(x, axis=1)), [x]) < 1e-4
    assert grad_check(lambda: ops.l2_norm(x), [x]) < 1e-4
    assert grad_check(lambda: ops.bce_loss(ops.sigmoid(p), target), [p]) < 1e-4


def test_upsample_repeat(rng):
    x = Tensor(rng.normal(size=(1, 2, 2, 2)), requires_grad=True)
    weights = Tensor(rng.normal(size=(3, 2, 4, 4)))
    assert grad_check(
        lambda: ops.mse_loss(ops.repeat_batch(ops.upsample(x, 2), 3), weights), [x]) < 1e-4


@pytest.mark.parametrize('arch', sorted(ARCHITECTURES))
def test_architectures(rng, arch):
    model = build_model(arch, 8, seed=2, strict_size=False)
    x = Tensor(to_nchw(rng.uniform(size=(2, 8, 8, 3))), requires_grad=True)
    target = Tensor(np.array([[0.3], [-0.2]]))

    def builder():
        return ops.mse_loss(model.forward(x), target)

    assert grad_check(builder, model.parameters() + [x], max_coords=6) < 1e-4


def test_non_deterministic_builder(rng):
    w = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GradientError):
        grad_check(lambda: ops.mean(ops.scale(w, float(rng.uniform()))), [w])
