"""
Optimization-based attack: Adam on the perturbation itself.

    minimize  w * ||eps||_2 + J(clip(x + eps), f(x) + s*delta)

with J the squared error and w = opt_norm_weight.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from steerguard.attacks.base import (AdversarialExample, AttackConfig, AttackId,
                                     AttackRunner, make_example)
from steerguard.autodiff import ops
from steerguard.autodiff.optim import ADAM, OptimizerState, adam_step
from steerguard.autodiff.tensor import Tensor, backward, no_grad
from steerguard.models.zoo import RegressionModel, from_nchw, predict, to_nchw

logger = logging.getLogger(__name__)


def _clipped_input(x: np.ndarray, eps: Tensor) -> Tensor:
    """clip(x + eps, 0, 1) in value, identity gradient w.r.t. eps"""
    clipped = np.clip(x + eps.data, 0.0, 1.0)
    return ops.add(Tensor(clipped - eps.data), eps)


def _project(x: np.ndarray, eps: np.ndarray, bound: Optional[float], keep_in_box: bool) -> np.ndarray:
    if bound is not None:
        eps = np.clip(eps, -bound, bound)
    if keep_in_box:
        eps = np.clip(x + eps, 0.0, 1.0) - x
    return eps


def minimize_perturbation(model: RegressionModel, image: np.ndarray, pred_original: float,
                          cfg: AttackConfig, init: Optional[np.ndarray] = None,
                          bound: Optional[float] = None, keep_in_box: bool = True
                          ) -> Tuple[np.ndarray, int]:
    """
    Run Adam from `init` (zeros by default) until the clipped image deviates by
    at least delta or opt_max_iters steps have been taken.

    Returns (perturbation, steps taken). On failure the iterate with the
    largest deviation is returned. `bound` clips each iterate to
    [-bound, bound]; `keep_in_box` keeps x + eps inside [0, 1].
    """
    x = to_nchw(image)
    start = np.zeros_like(x) if init is None else _project(x, to_nchw(init), bound, keep_in_box)
    eps = Tensor(start, requires_grad=True)
    target = Tensor(np.array([[cfg.target_for(pred_original)]]))
    state = OptimizerState(kind=ADAM, learning_rate=cfg.opt_lr)

    best, best_deviation = eps.data.copy(), -1.0
    steps = 0
    while True:
        pred = model.forward(_clipped_input(x, eps))
        deviation = abs(float(pred.data.reshape(-1)[0]) - pred_original)
        if deviation > best_deviation:
            best, best_deviation = eps.data.copy(), deviation
        if deviation >= cfg.delta or steps == cfg.opt_max_iters:
            break
        loss = ops.add(ops.scale(ops.l2_norm(eps), cfg.opt_norm_weight),
                       ops.mse_loss(pred, target))
        eps.zero_grad()
        backward(loss, inputs=[eps])
        adam_step([eps], state)
        eps.data = _project(x, eps.data, bound, keep_in_box)
        steps += 1
    logger.debug(f'opt: {steps} steps, deviation {best_deviation:.4f}')
    return from_nchw(best)[0], steps


def opt_attack(model: RegressionModel, image: np.ndarray, cfg: AttackConfig = None,
               sample_id: str = None) -> AdversarialExample:
    cfg = cfg or AttackConfig()
    x = model.check_images(image)[0]
    pred_original = predict(model, x)
    perturbation, steps = minimize_perturbation(model, x, pred_original, cfg)
    return make_example(model, x, perturbation, AttackId.OPT, cfg.delta, steps,
                        pred_original, sample_id)


def deviation_of(model: RegressionModel, image: np.ndarray, perturbation: np.ndarray,
                 pred_original: float) -> float:
    with no_grad():
        return abs(predict(model, np.clip(image + perturbation, 0.0, 1.0)) - pred_original)


class OptRunner(AttackRunner):
    attack_id = AttackId.OPT

    def attack(self, model, image, sample_id=None):
        return opt_attack(model, image, self.config, sample_id)
