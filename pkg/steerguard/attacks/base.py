"""
Shared attack types: attack ids, configuration, the AdversarialExample result
and the runner interface every attack implements.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional

import numpy as np

from steerguard.core.errors import ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.zoo import RegressionModel, predict
from steerguard.tasks import map_ordered

logger = logging.getLogger(__name__)


class AttackId(str, Enum):
    IT_FGSM = 'it_fgsm'
    OPT = 'opt'
    OPT_UNI = 'opt_uni'
    ADVGAN = 'advgan'
    ADVGAN_UNI = 'advgan_uni'

    @classmethod
    def parse(cls, value) -> 'AttackId':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace('-', '_'))
        except ValueError:
            known = ', '.join(a.value for a in cls)
            raise ValidationError(f'unknown attack {value!r}; known: {known}')


ALL_ATTACKS = tuple(AttackId)
# only these ship an artifact that can be replayed against another model
TRANSFERABLE_ATTACKS = (AttackId.OPT_UNI, AttackId.ADVGAN, AttackId.ADVGAN_UNI)
UNIVERSAL_ATTACKS = (AttackId.OPT_UNI, AttackId.ADVGAN_UNI)


@dataclass(frozen=True)
class AttackConfig:
    delta: float = 0.3
    fgsm_epsilon: float = 0.01
    fgsm_iters: int = 5
    opt_lr: float = 0.005
    opt_max_iters: int = 100
    opt_norm_weight: float = 0.01
    gan_lr: float = 0.001
    gan_alpha: float = 1.0
    gan_epochs: int = 10
    gan_batch_size: int = 32
    gan_target_margin: float = 0.1
    perturb_clip: float = 0.3
    target_sign: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError(f'delta must be > 0, got {self.delta}')
        for name in ('fgsm_iters', 'opt_max_iters', 'gan_epochs', 'gan_batch_size'):
            if getattr(self, name) < 1:
                raise ValidationError(f'{name} must be >= 1, got {getattr(self, name)}')
        for name in ('fgsm_epsilon', 'opt_lr', 'gan_lr', 'perturb_clip'):
            if not getattr(self, name) > 0:
                raise ValidationError(f'{name} must be > 0, got {getattr(self, name)}')
        if self.opt_norm_weight < 0 or self.gan_alpha < 0 or self.gan_target_margin < 0:
            raise ValidationError('opt_norm_weight, gan_alpha and gan_target_margin must be >= 0')
        if self.target_sign not in (1, -1):
            raise ValidationError(f'target_sign must be +1 or -1, got {self.target_sign}')

    def target_for(self, pred_original: float) -> float:
        """Attack target f(x) + sign * delta"""
        return pred_original + self.target_sign * self.delta

    @classmethod
    def from_settings(cls, settings: dict, **overrides) -> 'AttackConfig':
        """Build from a resolved settings mapping (lower-case keys)"""
        values = {}
        for name, default in cls.__dataclass_fields__.items():
            if settings.get(name) is not None:
                values[name] = type(default.default)(settings[name])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def is_success(pred_original: float, pred_adversarial: float, delta: float) -> bool:
    """|f(x') - f(x)| >= delta"""
    if not delta > 0:
        raise ValidationError(f'delta must be > 0, got {delta}')
    return abs(float(pred_adversarial) - float(pred_original)) >= delta


@dataclass(frozen=True, eq=False)
class AdversarialExample:
    original: np.ndarray
    perturbation: np.ndarray
    pred_original: float
    pred_adversarial: float
    delta: float
    iterations_used: int
    attack_id: AttackId
    sample_id: Optional[str] = None

    @property
    def adversarial(self) -> np.ndarray:
        return np.clip(self.original + self.perturbation, 0.0, 1.0)

    @property
    def deviation(self) -> float:
        return abs(self.pred_adversarial - self.pred_original)

    @property
    def success(self) -> bool:
        return is_success(self.pred_original, self.pred_adversarial, self.delta)

    def rescore(self, delta: float) -> 'AdversarialExample':
        """Same images and predictions judged against another threshold"""
        if not delta > 0:
            raise ValidationError(f'delta must be > 0, got {delta}')
        return replace(self, delta=float(delta))


def make_example(model: RegressionModel, original: np.ndarray, perturbation: np.ndarray,
                 attack_id: AttackId, delta: float, iterations_used: int,
                 pred_original: Optional[float] = None, sample_id: Optional[str] = None
                 ) -> AdversarialExample:
    original = np.asarray(original, dtype=np.float64)
    perturbation = np.asarray(perturbation, dtype=np.float64)
    if original.shape != perturbation.shape:
        raise ValidationError(f'perturbation shape {perturbation.shape} '
                              f'does not match image {original.shape}')
    if pred_original is None:
        pred_original = predict(model, original)
    adversarial = np.clip(original + perturbation, 0.0, 1.0)
    return AdversarialExample(
        original=original,
        perturbation=perturbation,
        pred_original=float(pred_original),
        pred_adversarial=predict(model, adversarial),
        delta=float(delta),
        iterations_used=int(iterations_used),
        attack_id=AttackId(attack_id),
        sample_id=sample_id,
    )


class AttackRunner(ABC):
    """
    One attack bound to its configuration.

    Universal and generator attacks must be prepared (crafted/trained on a
    source model) or handed a loaded artifact before attack() is called;
    the artifact may then be replayed against any model of the same input size.
    """
    attack_id: AttackId

    def __init__(self, config: Optional[AttackConfig] = None):
        self.config = config or AttackConfig()

    @property
    def needs_preparation(self) -> bool:
        return False

    def prepare(self, model: RegressionModel, dataset: Dataset) -> 'AttackRunner':
        return self

    @abstractmethod
    def attack(self, model: RegressionModel, image: np.ndarray,
               sample_id: Optional[str] = None) -> AdversarialExample:
        raise NotImplementedError

    def craft(self, model: RegressionModel, image: np.ndarray) -> np.ndarray:
        """Adversarial image only: the work an attacker adds in front of inference"""
        return self.attack(model, image).adversarial

    def attack_dataset(self, model: RegressionModel, dataset: Dataset,
                       jobs: int = 1) -> List[AdversarialExample]:
        require_nonempty(dataset)
        examples = map_ordered(lambda s: self.attack(model, s.image, s.id), dataset.samples, jobs)
        hits = sum(e.success for e in examples)
        logger.info(f'{self.attack_id.value} on {model.arch_id}: {hits}/{len(examples)} successful')
        return examples

    def __repr__(self):
        return f'{type(self).__name__}({self.config!r})'
