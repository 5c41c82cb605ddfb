"""
Universal perturbation: a single grid v that deviates the model on most inputs.

One pass over the dataset in order. v starts as the optimization-attack
perturbation of the first sample; every later sample that clip(x + v) does not
already fool gets a warm-started Adam refinement of v, which is then clipped
to [-perturb_clip, perturb_clip].
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from steerguard.attacks.base import (AdversarialExample, AttackConfig, AttackId,
                                     AttackRunner, make_example)
from steerguard.attacks.optimization import deviation_of, minimize_perturbation
from steerguard.core.errors import ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.zoo import RegressionModel, predict
from steerguard.storage import get_artifact_store

logger = logging.getLogger(__name__)

PERTURBATION_KIND = 'perturbation'


@dataclass(frozen=True, eq=False)
class UniversalPerturbation:
    perturbation: np.ndarray
    fooling_rate: float
    source_arch: str
    delta: float

    @property
    def input_size(self) -> int:
        return self.perturbation.shape[0]


def craft_universal(model: RegressionModel, dataset: Dataset,
                    cfg: AttackConfig = None) -> UniversalPerturbation:
    cfg = cfg or AttackConfig()
    require_nonempty(dataset)
    images = model.check_images(dataset.images)
    preds = model.predict_batch(images)
    clip = cfg.perturb_clip

    first, _ = minimize_perturbation(model, images[0], float(preds[0]), cfg)
    v = np.clip(first, -clip, clip)
    refined = 0
    for index in range(1, len(images)):
        if deviation_of(model, images[index], v, float(preds[index])) >= cfg.delta:
            continue
        v, _ = minimize_perturbation(model, images[index], float(preds[index]), cfg,
                                     init=v, bound=clip, keep_in_box=False)
        v = np.clip(v, -clip, clip)
        refined += 1
        if refined % 50 == 0:
            logger.info(f'universal crafting: {index + 1}/{len(images)} samples visited')

    rate = fooling_rate(model, images, preds, v, cfg.delta)
    logger.info(f'universal perturbation on {model.arch_id}: {refined} refinements, fooling rate {rate:.3f}')
    return UniversalPerturbation(v, rate, model.arch_id, cfg.delta)


def fooling_rate(model: RegressionModel, images: np.ndarray, preds: np.ndarray,
                 perturbation: np.ndarray, delta: float) -> float:
    adv_preds = model.predict_batch(np.clip(images + perturbation, 0.0, 1.0))
    return float(np.mean(np.abs(adv_preds - preds) >= delta))


def apply_universal(model: RegressionModel, image: np.ndarray, perturbation: np.ndarray,
                    delta: float, attack_id: AttackId = AttackId.OPT_UNI,
                    sample_id: Optional[str] = None) -> AdversarialExample:
    x = model.check_images(image)[0]
    if perturbation.shape != x.shape:
        raise ValidationError(f'perturbation of shape {perturbation.shape} '
                              f'cannot be applied to {x.shape} images')
    return make_example(model, x, perturbation, attack_id, delta, 0, predict(model, x), sample_id)


def save_perturbation(universal: UniversalPerturbation, path: str, store=None) -> str:
    store = store or get_artifact_store()
    metadata = {
        'attack_id': AttackId.OPT_UNI.value,
        'delta': universal.delta,
        'fooling_rate': universal.fooling_rate,
        'source_arch': universal.source_arch,
    }
    return store.save(path, PERTURBATION_KIND, [('perturbation', universal.perturbation)], metadata)


def load_perturbation(path: str, store=None) -> UniversalPerturbation:
    store = store or get_artifact_store()
    header, arrays = store.load(path, expected_kind=PERTURBATION_KIND)
    metadata = header.get('metadata') or {}
    if 'perturbation' not in arrays:
        raise ValidationError(f'{path}: perturbation artifact has no perturbation array')
    return UniversalPerturbation(
        arrays['perturbation'],
        float(metadata.get('fooling_rate', 0.0)),
        str(metadata.get('source_arch', 'unknown')),
        float(metadata.get('delta', 0.3)),
    )


class OptUniRunner(AttackRunner):
    attack_id = AttackId.OPT_UNI

    def __init__(self, config: AttackConfig = None, universal: UniversalPerturbation = None):
        super().__init__(config)
        self.universal = universal

    @property
    def needs_preparation(self):
        return self.universal is None

    def prepare(self, model, dataset):
        self.universal = craft_universal(model, dataset, self.config)
        return self

    def attack(self, model, image, sample_id=None):
        if self.universal is None:
            raise ValidationError('opt_uni needs a crafted or loaded perturbation')
        return apply_universal(model, image, self.universal.perturbation, self.config.delta,
                               self.attack_id, sample_id)

    def craft(self, model, image):
        if self.universal is None:
            raise ValidationError('opt_uni needs a crafted or loaded perturbation')
        return np.clip(model.check_images(image)[0] + self.universal.perturbation, 0.0, 1.0)
