"""
Adversarial training: retrain from scratch on

    L = alpha * J(x, y) + (1 - alpha) * J(x', y)

where x' is a fixed adversarial copy of the training set, crafted once against
the source model with the chosen attack.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from steerguard.attacks import AttackConfig, AttackRunner, get_attack_runner
from steerguard.autodiff import ops
from steerguard.autodiff.tensor import Tensor
from steerguard.core.errors import AttackError, ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.training import TrainConfig, eval_rmse, fit, regression_loss
from steerguard.models.zoo import RegressionModel, build_model, to_nchw
from steerguard.tasks import map_ordered

logger = logging.getLogger(__name__)


@dataclass
class HardenedModel:
    model: RegressionModel
    history: List[float]
    clean_rmse: float
    attack_id: str
    alpha: float


def adversarial_images(source: RegressionModel, dataset: Dataset, runner: AttackRunner,
                       jobs: int = 1) -> np.ndarray:
    """Adversarial copy of every training image; universal artifacts are crafted first"""
    require_nonempty(dataset, 'training set')
    if runner.needs_preparation:
        runner.prepare(source, dataset)
    crafted = map_ordered(lambda s: runner.craft(source, s.image), dataset.samples, jobs)
    images = np.stack(crafted)
    if np.array_equal(images, dataset.images):
        raise AttackError(f'{runner.attack_id.value} left every training image unchanged')
    return images


def adversarial_train(source: RegressionModel, dataset: Dataset, attack_id, alpha: float = 0.5,
                      cfg: Optional[TrainConfig] = None, attack_cfg: Optional[AttackConfig] = None,
                      eval_dataset: Optional[Dataset] = None, runner: Optional[AttackRunner] = None,
                      jobs: int = 1) -> HardenedModel:
    """
    Train a fresh model of the source architecture on clean + adversarial pairs.

    alpha=1 reproduces train_model step for step; alpha=0 trains on the
    adversarial images only.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f'alpha must be in [0, 1], got {alpha}')
    require_nonempty(dataset, 'training set')
    cfg = cfg or TrainConfig()
    runner = runner or get_attack_runner(attack_id, attack_cfg)

    clean = source.check_images(dataset.images)
    adversarial = adversarial_images(source, dataset, runner, jobs) if alpha < 1.0 else clean
    labels = dataset.labels
    model = build_model(source.arch_id, source.input_size, seed=cfg.seed, strict_size=False)

    def batch_loss(indices):
        clean_loss = adv_loss = None
        if alpha > 0.0:
            pred = model.forward(Tensor(to_nchw(clean[indices])))
            clean_loss = regression_loss(pred, labels[indices], cfg.loss)
        if alpha < 1.0:
            pred = model.forward(Tensor(to_nchw(adversarial[indices])))
            adv_loss = regression_loss(pred, labels[indices], cfg.loss)
        if adv_loss is None:
            return clean_loss
        if clean_loss is None:
            return adv_loss
        return ops.add(ops.scale(clean_loss, alpha), ops.scale(adv_loss, 1.0 - alpha))

    history = fit(model, len(dataset), batch_loss, cfg,
                  tag=f'adv-train {source.arch_id}/{runner.attack_id.value}')
    clean_rmse = eval_rmse(model, eval_dataset or dataset)
    logger.info(f'Hardened {source.arch_id} with {runner.attack_id.value} (alpha={alpha}): '
                f'clean RMSE {clean_rmse:.4f}')
    return HardenedModel(model, history, clean_rmse, runner.attack_id.value, alpha)
