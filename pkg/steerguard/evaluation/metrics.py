"""
Measurement protocol: success rates, transfer matrices, threshold sweeps and
feature-squeezing detection curves.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from steerguard.attacks import (TRANSFERABLE_ATTACKS, AdversarialExample, AttackConfig,
                                AttackId, AttackRunner, get_attack_runner)
from steerguard.core.errors import ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.defenses.squeezing import DEFAULT_BITS, DEFAULT_MEDIAN_K, squeeze_scores
from steerguard.models.zoo import RegressionModel

logger = logging.getLogger(__name__)

ORIGINAL = 'original'
AttackSpec = Union[str, AttackId, AttackRunner]


def _runner(attack: AttackSpec, cfg: Optional[AttackConfig]) -> AttackRunner:
    if isinstance(attack, AttackRunner):
        return attack
    return get_attack_runner(attack, cfg)


def rate_of(examples: Sequence[AdversarialExample]) -> float:
    """Fraction of examples whose deviation reaches their delta"""
    if not examples:
        raise ValidationError('no adversarial examples to score')
    return sum(e.success for e in examples) / len(examples)


def run_attack(model: RegressionModel, attack: AttackSpec, dataset: Dataset,
               cfg: Optional[AttackConfig] = None, jobs: int = 1) -> List[AdversarialExample]:
    """Attack every sample; artifact attacks are crafted on `model` and `dataset` if needed"""
    require_nonempty(dataset)
    runner = _runner(attack, cfg)
    if runner.needs_preparation:
        runner.prepare(model, dataset)
    return runner.attack_dataset(model, dataset, jobs)


def success_rate(model: RegressionModel, attack: AttackSpec, dataset: Dataset,
                 cfg: Optional[AttackConfig] = None, jobs: int = 1) -> float:
    return rate_of(run_attack(model, attack, dataset, cfg, jobs))


@dataclass(frozen=True)
class TransferCell:
    source: str
    attack_id: str
    target: str
    success_rate: Optional[float]  # None on the diagonal

    @property
    def applicable(self) -> bool:
        return self.source != self.target


def name_models(models) -> Dict[str, RegressionModel]:
    """Dict of models keyed by arch id, suffixed -2, -3 ... on repeats"""
    if isinstance(models, dict):
        return dict(models)
    named: Dict[str, RegressionModel] = {}
    for model in models:
        name = model.arch_id
        suffix = 2
        while name in named:
            name = f'{model.arch_id}-{suffix}'
            suffix += 1
        named[name] = model
    return named


def transfer_matrix(models, attacks: Sequence[AttackSpec], dataset: Dataset,
                    delta: float = 0.3, cfg: Optional[AttackConfig] = None,
                    craft_dataset: Optional[Dataset] = None, include_diagonal: bool = False,
                    runners: Optional[Dict[Tuple[str, str], AttackRunner]] = None,
                    jobs: int = 1) -> List[TransferCell]:
    """
    Black-box matrix: artifacts crafted on each source model, replayed on every
    other model. Diagonal cells carry success_rate None unless
    include_diagonal is set. `runners` may supply already prepared runners keyed
    by (source name, attack id).
    """
    named = name_models(models)
    if len(named) < 2:
        raise ValidationError('transfer_matrix needs at least two models')
    sizes = {m.input_size for m in named.values()}
    if len(sizes) != 1:
        raise ValidationError(f'all models must share one input size, got {sorted(sizes)}')
    require_nonempty(dataset)
    base_cfg = replace(cfg or AttackConfig(), delta=delta)
    attack_ids = [AttackId.parse(a.attack_id if isinstance(a, AttackRunner) else a) for a in attacks]
    for attack_id in attack_ids:
        if attack_id not in TRANSFERABLE_ATTACKS:
            raise ValidationError(f'{attack_id.value} has no transferable artifact')
    runners = dict(runners or {})

    cells = []
    for source, source_model in named.items():
        for attack_id in attack_ids:
            runner = runners.get((source, attack_id.value)) or get_attack_runner(attack_id, base_cfg)
            if runner.needs_preparation:
                runner.prepare(source_model, craft_dataset or dataset)
            runners[(source, attack_id.value)] = runner
            for target, target_model in named.items():
                if target == source and not include_diagonal:
                    cells.append(TransferCell(source, attack_id.value, target, None))
                    continue
                examples = [e.rescore(delta) for e in runner.attack_dataset(target_model, dataset, jobs)]
                cells.append(TransferCell(source, attack_id.value, target, rate_of(examples)))
    return cells


def _check_ascending(values: Sequence[float], what: str) -> List[float]:
    values = [float(v) for v in values]
    if not values:
        raise ValidationError(f'{what} list is empty')
    if any(v <= 0 for v in values):
        raise ValidationError(f'{what} values must be > 0')
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValidationError(f'{what} values must be sorted ascending')
    return values


def rescore_sweep(examples: Sequence[AdversarialExample],
                  deltas: Sequence[float]) -> List[Tuple[float, float]]:
    """Success rate of a fixed example set at each delta"""
    deltas = _check_ascending(deltas, 'delta')
    return [(d, rate_of([e.rescore(d) for e in examples])) for d in deltas]


def threshold_sweep(model: RegressionModel, attack: AttackSpec, dataset: Dataset,
                    deltas: Sequence[float], cfg: Optional[AttackConfig] = None,
                    jobs: int = 1) -> List[Tuple[float, float]]:
    """Examples are generated once at the configured delta, then re-scored"""
    deltas = _check_ascending(deltas, 'delta')
    return rescore_sweep(run_attack(model, attack, dataset, cfg, jobs), deltas)


@dataclass(frozen=True)
class DetectionRow:
    threshold: float
    recall: float
    false_positive_rate: float
    attack_id: str
    model_id: str


def detection_curve(model: RegressionModel, clean: Union[Dataset, np.ndarray],
                    adversarial: Sequence[AdversarialExample], thresholds: Sequence[float],
                    successful_only: bool = True, bits: int = DEFAULT_BITS,
                    k: int = DEFAULT_MEDIAN_K, model_id: Optional[str] = None) -> List[DetectionRow]:
    """
    recall = flagged adversarial / adversarial, fpr = flagged clean / clean.

    Only successful adversarial examples count towards recall unless
    successful_only is False.
    """
    thresholds = _check_ascending(thresholds, 'threshold')
    clean_images = clean.images if isinstance(clean, Dataset) else np.asarray(clean)
    if len(clean_images) == 0:
        raise ValidationError('clean set is empty')
    chosen = [e for e in adversarial if e.success] if successful_only else list(adversarial)
    if not chosen:
        raise ValidationError('no adversarial examples to detect')
    attack_ids = sorted({AttackId(e.attack_id).value for e in chosen})

    clean_scores = squeeze_scores(model, clean_images, bits, k).max(axis=1)
    adv_scores = squeeze_scores(model, np.stack([e.adversarial for e in chosen]), bits, k).max(axis=1)
    rows = []
    for t in thresholds:
        rows.append(DetectionRow(
            threshold=t,
            recall=float(np.mean(adv_scores > t)),
            false_positive_rate=float(np.mean(clean_scores > t)),
            attack_id='+'.join(attack_ids),
            model_id=model_id or model.arch_id,
        ))
    return rows


def false_positive_rows(model: RegressionModel, clean: Union[Dataset, np.ndarray],
                        thresholds: Sequence[float], bits: int = DEFAULT_BITS,
                        k: int = DEFAULT_MEDIAN_K, model_id: Optional[str] = None) -> List[DetectionRow]:
    """Clean-only line (attack_id 'original'): flag rate on unperturbed inputs"""
    thresholds = _check_ascending(thresholds, 'threshold')
    clean_images = clean.images if isinstance(clean, Dataset) else np.asarray(clean)
    if len(clean_images) == 0:
        raise ValidationError('clean set is empty')
    scores = squeeze_scores(model, clean_images, bits, k).max(axis=1)
    return [DetectionRow(t, float(np.mean(scores > t)), float(np.mean(scores > t)), ORIGINAL,
                         model_id or model.arch_id) for t in thresholds]
