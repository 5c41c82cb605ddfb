"""
Training loops and RMSE evaluation for steering regressors.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from steerguard.autodiff import ops
from steerguard.autodiff.optim import Optimizer
from steerguard.autodiff.tensor import Tensor
from steerguard.core.errors import ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.zoo import RegressionModel, to_nchw

logger = logging.getLogger(__name__)

MSE = 'mse'
ABS = 'abs'


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    optimizer: str = 'adam'
    lr: float = 0.001
    seed: int = 0
    loss: str = MSE  # 'abs' = mean |pred - label|

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f'epochs must be >= 1, got {self.epochs}')
        if self.batch_size < 1:
            raise ValidationError(f'batch_size must be >= 1, got {self.batch_size}')
        if self.lr <= 0:
            raise ValidationError(f'lr must be > 0, got {self.lr}')
        if self.loss not in (MSE, ABS):
            raise ValidationError(f'loss must be mse or abs, got {self.loss!r}')

    @classmethod
    def from_settings(cls, settings: dict, **overrides) -> 'TrainConfig':
        values = dict(
            epochs=int(settings.get('train_epochs', cls.epochs)),
            batch_size=int(settings.get('train_batch_size', cls.batch_size)),
            optimizer=str(settings.get('train_optimizer', cls.optimizer)),
            lr=float(settings.get('train_lr', cls.lr)),
            seed=int(settings.get('seed', cls.seed)),
        )
        values.update(overrides)
        return cls(**values)


def regression_loss(pred: Tensor, target: np.ndarray, kind: str = MSE) -> Tensor:
    """Mean squared or mean absolute error over an (N,1) prediction"""
    target = Tensor(np.asarray(target, dtype=np.float64).reshape(pred.shape))
    if kind == MSE:
        return ops.mse_loss(pred, target)
    # |d| summed over the batch = per-sample l2 norm of a length-1 row
    return ops.mean(ops.l2_norm(ops.sub(pred, target), axis=1))


def fit(model: RegressionModel, n: int, batch_loss: Callable[[np.ndarray], Tensor],
        cfg: TrainConfig, tag: str = 'train') -> List[float]:
    """
    Generic minibatch loop: each epoch visits a seeded permutation of range(n)
    and calls `batch_loss(indices)`. Returns the mean loss per epoch.
    """
    if n < 1:
        raise ValidationError('cannot train on an empty dataset')
    optimizer = Optimizer(model.parameters(), cfg.optimizer, cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            indices = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            loss = batch_loss(indices)
            loss.backward(inputs=optimizer.params)
            optimizer.step()
            total += loss.item() * len(indices)
            count += len(indices)
        history.append(total / count)
        logger.debug(f'{tag} epoch {epoch + 1}/{cfg.epochs}: loss={history[-1]:.6f}')
    optimizer.zero_grad()
    logger.info(f'{tag}: {cfg.epochs} epochs, final loss {history[-1]:.6f}')
    return history


def train_model(model: RegressionModel, dataset: Dataset, cfg: Optional[TrainConfig] = None):
    """Fit in place; returns (model, per-epoch loss history)"""
    require_nonempty(dataset, 'training set')
    cfg = cfg or TrainConfig()
    images = model.check_images(dataset.images)
    labels = dataset.labels

    def batch_loss(indices):
        pred = model.forward(Tensor(to_nchw(images[indices])))
        return regression_loss(pred, labels[indices], cfg.loss)

    history = fit(model, len(dataset), batch_loss, cfg, tag=f'train {model.arch_id}')
    return model, history


def rmse(predictions: np.ndarray, labels: np.ndarray) -> float:
    diff = np.asarray(predictions, dtype=np.float64) - np.asarray(labels, dtype=np.float64)
    return float(np.sqrt(np.mean(diff ** 2)))


def eval_rmse(model: RegressionModel, dataset: Dataset) -> float:
    require_nonempty(dataset)
    return rmse(model.predict_batch(dataset.images), dataset.labels)


def baseline_rmse(dataset: Dataset) -> float:
    """RMSE of the constant-zero predictor"""
    require_nonempty(dataset)
    return rmse(np.zeros(len(dataset)), dataset.labels)
