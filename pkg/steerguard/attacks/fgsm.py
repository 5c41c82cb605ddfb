"""
Iterative targeted fast gradient sign method.
"""
import numpy as np

from steerguard.attacks.base import (AdversarialExample, AttackConfig, AttackId,
                                     AttackRunner, make_example)
from steerguard.autodiff import ops
from steerguard.autodiff.tensor import Tensor, backward
from steerguard.models.zoo import RegressionModel, from_nchw, predict, to_nchw


def input_gradient(model: RegressionModel, image: np.ndarray, target: float) -> np.ndarray:
    """d J(f(x), target) / dx for one H x W x 3 image (J = squared error)"""
    x = Tensor(to_nchw(image), requires_grad=True)
    loss = ops.mse_loss(model.forward(x), Tensor(np.array([[target]])))
    backward(loss, inputs=[x])
    return from_nchw(x.grad)[0]


def it_fgsm(model: RegressionModel, image: np.ndarray, cfg: AttackConfig = None,
            sample_id: str = None) -> AdversarialExample:
    """
    x'_0 = x;  x'_{k+1} = clip(x'_k - eps * sign(grad_x J(x'_k, f(x) + s*delta)), 0, 1)

    Runs exactly cfg.fgsm_iters steps; the result is within eps * iters of x in
    max-norm.
    """
    cfg = cfg or AttackConfig()
    x = model.check_images(image)[0]
    pred_original = predict(model, x)
    target = cfg.target_for(pred_original)
    x_adv = x.copy()
    for _ in range(cfg.fgsm_iters):
        grad = input_gradient(model, x_adv, target)
        x_adv = np.clip(x_adv - cfg.fgsm_epsilon * np.sign(grad), 0.0, 1.0)
    return make_example(model, x, x_adv - x, AttackId.IT_FGSM, cfg.delta, cfg.fgsm_iters,
                        pred_original, sample_id)


class ItFgsmRunner(AttackRunner):
    attack_id = AttackId.IT_FGSM

    def attack(self, model, image, sample_id=None):
        return it_fgsm(model, image, self.config, sample_id)
