"""
Regression defensive distillation.

A student of the teacher's architecture is fitted to

    L = mean_i( lambda * ||z_i - z'_i|| + ||f(x_i) - g(x_i)|| )

where z / z' are teacher / student activations at the feature tap (last
hidden dense layer) and f / g are teacher / student outputs. Norms are plain
(unsquared) Euclidean.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from steerguard.autodiff import ops
from steerguard.autodiff.tensor import Tensor
from steerguard.core.errors import ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.training import TrainConfig, eval_rmse, fit
from steerguard.models.zoo import RegressionModel, build_model, to_nchw

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0)


@dataclass(frozen=True)
class DistillConfig:
    lam: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    optimizer: str = 'adam'
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError(f'lambda must be >= 0, got {self.lam}')

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           optimizer=self.optimizer, lr=self.lr, seed=self.seed)


@dataclass
class DistilledModel:
    model: RegressionModel
    history: List[float]
    clean_rmse: float
    lam: float


def distillation_loss(student: RegressionModel, images: np.ndarray, teacher_out: np.ndarray,
                      teacher_features: np.ndarray, lam: float) -> Tensor:
    out, features = student.forward(Tensor(to_nchw(images)), return_features=True)
    output_term = ops.l2_norm(ops.sub(out, Tensor(teacher_out.reshape(out.shape))), axis=1)
    if lam == 0:
        return ops.mean(output_term)
    feature_term = ops.l2_norm(ops.sub(features, Tensor(teacher_features)), axis=1)
    return ops.mean(ops.add(ops.scale(feature_term, lam), output_term))


def distill_train(teacher: RegressionModel, dataset: Dataset, cfg: Optional[DistillConfig] = None,
                  student: Optional[RegressionModel] = None,
                  eval_dataset: Optional[Dataset] = None) -> DistilledModel:
    cfg = cfg or DistillConfig()
    require_nonempty(dataset, 'training set')
    if teacher.feature_tap is None:
        raise ValidationError(f'{teacher.arch_id} has no feature tap to distill')
    if student is None:
        student = build_model(teacher.arch_id, teacher.input_size, seed=cfg.seed, strict_size=False)
    if student.arch_id != teacher.arch_id or student.input_size != teacher.input_size:
        raise ValidationError(f'student {student.arch_id}/{student.input_size} does not match '
                              f'teacher {teacher.arch_id}/{teacher.input_size}')

    images = teacher.check_images(dataset.images)
    teacher_out = teacher.predict_batch(images)
    teacher_features = teacher.features_batch(images)

    def batch_loss(indices):
        return distillation_loss(student, images[indices], teacher_out[indices],
                                 teacher_features[indices], cfg.lam)

    history = fit(student, len(dataset), batch_loss, cfg.train_config(),
                  tag=f'distill {teacher.arch_id} lambda={cfg.lam}')
    clean_rmse = eval_rmse(student, eval_dataset or dataset)
    return DistilledModel(student, history, clean_rmse, cfg.lam)


def distillation_sweep(teacher: RegressionModel, dataset: Dataset,
                       lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                       cfg: Optional[DistillConfig] = None,
                       eval_dataset: Optional[Dataset] = None) -> List[Tuple[float, RegressionModel]]:
    """One student per lambda; lambda 0 stands for the undistilled teacher"""
    cfg = cfg or DistillConfig()
    results = []
    for lam in lambdas:
        if lam == 0:
            results.append((0.0, teacher))
            continue
        distilled = distill_train(teacher, dataset, replace(cfg, lam=float(lam)), eval_dataset=eval_dataset)
        logger.info(f'lambda={lam}: clean RMSE {distilled.clean_rmse:.4f}')
        results.append((float(lam), distilled.model))
    return results
