"""
Full measurement protocol behind the `report` command: white-box table,
black-box matrix, threshold sweeps, detection curves, defense rows and
overhead profiles, collected into one EvaluationReport.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from steerguard.attacks import (ALL_ATTACKS, TRANSFERABLE_ATTACKS, AdversarialExample,
                                AttackConfig, AttackId, AttackRunner, get_attack_runner)
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.defenses.anomaly import anomaly_flag, profile_inference
from steerguard.evaluation.metrics import (detection_curve, false_positive_rows, rate_of,
                                           rescore_sweep, transfer_matrix)
from steerguard.evaluation.report import EvaluationReport
from steerguard.models.training import baseline_rmse, eval_rmse
from steerguard.models.zoo import RegressionModel, describe_model

logger = logging.getLogger(__name__)

RECALL_DEFINITION = 'successful adversarial examples only'


@dataclass(frozen=True)
class ProtocolConfig:
    attacks: Tuple[AttackId, ...] = ALL_ATTACKS
    transfer_attacks: Tuple[AttackId, ...] = TRANSFERABLE_ATTACKS
    deltas: Tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    thresholds: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.15)
    squeeze_bits: int = 4
    squeeze_k: int = 2
    profile_images: int = 20
    time_ratio_threshold: float = 1.5
    compute_ratio_threshold: Optional[float] = None
    jobs: int = 1


@dataclass
class ProtocolState:
    """Prepared runners and generated examples, reused across tables"""
    runners: Dict[Tuple[str, str], AttackRunner] = field(default_factory=dict)
    examples: Dict[Tuple[str, str], List[AdversarialExample]] = field(default_factory=dict)


def _prepared_runner(state: ProtocolState, model_id: str, model: RegressionModel, attack_id: AttackId,
                     cfg: AttackConfig, craft_dataset: Dataset) -> AttackRunner:
    key = (model_id, attack_id.value)
    if key not in state.runners:
        runner = get_attack_runner(attack_id, cfg)
        if runner.needs_preparation:
            runner.prepare(model, craft_dataset)
        state.runners[key] = runner
    return state.runners[key]


def white_box(models: Dict[str, RegressionModel], dataset: Dataset, cfg: AttackConfig,
              pcfg: ProtocolConfig, craft_dataset: Dataset, state: ProtocolState) -> List[dict]:
    rows = []
    for model_id, model in models.items():
        for attack_id in pcfg.attacks:
            runner = _prepared_runner(state, model_id, model, attack_id, cfg, craft_dataset)
            examples = runner.attack_dataset(model, dataset, pcfg.jobs)
            state.examples[(model_id, attack_id.value)] = examples
            rows.append({'model_id': model_id, 'attack_id': attack_id.value,
                         'delta': cfg.delta, 'success_rate': rate_of(examples)})
    return rows


def sweeps(state: ProtocolState, pcfg: ProtocolConfig) -> List[dict]:
    rows = []
    for (model_id, attack_id), examples in sorted(state.examples.items()):
        for delta, rate in rescore_sweep(examples, pcfg.deltas):
            rows.append({'model_id': model_id, 'attack_id': attack_id, 'delta': delta, 'success_rate': rate})
    return rows


def detection(models: Dict[str, RegressionModel], dataset: Dataset, state: ProtocolState,
              pcfg: ProtocolConfig) -> List[dict]:
    rows = []
    for model_id, model in models.items():
        curves = false_positive_rows(model, dataset, pcfg.thresholds, pcfg.squeeze_bits,
                                     pcfg.squeeze_k, model_id)
        for attack_id in pcfg.attacks:
            examples = state.examples.get((model_id, attack_id.value), [])
            if not any(e.success for e in examples):
                logger.warning(f'{attack_id.value} on {model_id}: no successful examples, detection skipped')
                continue
            curves += detection_curve(model, dataset, examples, pcfg.thresholds, True,
                                      pcfg.squeeze_bits, pcfg.squeeze_k, model_id)
        rows += [vars(r) for r in curves]
    return rows


def black_box(models: Dict[str, RegressionModel], dataset: Dataset, cfg: AttackConfig,
              pcfg: ProtocolConfig, craft_dataset: Dataset, state: ProtocolState) -> List[dict]:
    if len(models) < 2 or not pcfg.transfer_attacks:
        return []
    for model_id, model in models.items():
        for attack_id in pcfg.transfer_attacks:
            _prepared_runner(state, model_id, model, attack_id, cfg, craft_dataset)
    cells = transfer_matrix(models, pcfg.transfer_attacks, dataset, cfg.delta, cfg,
                            craft_dataset=craft_dataset, runners=state.runners, jobs=pcfg.jobs)
    return [{'source': c.source, 'attack_id': c.attack_id, 'target': c.target,
             'success_rate': c.success_rate} for c in cells]


def profiles(models: Dict[str, RegressionModel], dataset: Dataset, cfg: AttackConfig,
             pcfg: ProtocolConfig, craft_dataset: Dataset, state: ProtocolState) -> List[dict]:
    rows = []
    images = dataset.images[:pcfg.profile_images]
    for model_id, model in models.items():
        baseline = profile_inference(model, images)
        rows.append({'model_id': model_id, **baseline.to_dict(), 'anomaly': False})
        for attack_id in pcfg.attacks:
            runner = _prepared_runner(state, model_id, model, attack_id, cfg, craft_dataset)
            observed = profile_inference(model, images, runner)
            flagged = anomaly_flag(baseline, observed, pcfg.time_ratio_threshold,
                                   pcfg.compute_ratio_threshold)
            rows.append({'model_id': model_id, **observed.to_dict(), 'anomaly': flagged})
    return rows


def defenses(defended: Dict[str, RegressionModel], dataset: Dataset, cfg: AttackConfig,
             pcfg: ProtocolConfig, craft_dataset: Dataset, state: ProtocolState) -> List[dict]:
    """White-box rates against each defended model, labelled by its provenance"""
    rows = []
    for model_id, model in defended.items():
        provenance = model.provenance
        clean_rmse = eval_rmse(model, dataset)
        for attack_id in pcfg.attacks:
            runner = _prepared_runner(state, f'defended:{model_id}', model, attack_id, cfg, craft_dataset)
            examples = runner.attack_dataset(model, dataset, pcfg.jobs)
            rows.append({
                'defense': provenance.get('defense', 'none'),
                'model_id': provenance.get('source', model_id),
                'parameter': provenance.get('parameter'),
                'attack_id': attack_id.value,
                'success_rate': rate_of(examples),
                'clean_rmse': clean_rmse,
            })
    return rows


def run_protocol(models: Dict[str, RegressionModel], dataset: Dataset, cfg: AttackConfig,
                 run_id: str, version: str, craft_dataset: Optional[Dataset] = None,
                 defended: Optional[Dict[str, RegressionModel]] = None,
                 pcfg: Optional[ProtocolConfig] = None) -> EvaluationReport:
    require_nonempty(dataset, 'evaluation set')
    pcfg = pcfg or ProtocolConfig()
    craft_dataset = craft_dataset or dataset
    state = ProtocolState()

    model_rows = []
    base = baseline_rmse(dataset)
    for model_id, model in models.items():
        model_rows.append({'model_id': model_id, **describe_model(model),
                           'rmse': eval_rmse(model, dataset), 'baseline_rmse': base})

    report = EvaluationReport(run_id=run_id, seed=cfg.seed, version=version, models=model_rows)
    report.white_box = white_box(models, dataset, cfg, pcfg, craft_dataset, state)
    report.sweeps = sweeps(state, pcfg)
    report.detection = detection(models, dataset, state, pcfg)
    report.black_box = black_box(models, dataset, cfg, pcfg, craft_dataset, state)
    if pcfg.profile_images > 0:
        report.profiles = profiles(models, dataset, cfg, pcfg, craft_dataset, state)
    if defended:
        report.defenses = defenses(defended, dataset, cfg, pcfg, craft_dataset, state)
    report.metadata = {
        'attack_config': vars(cfg),
        'detection_recall': RECALL_DEFINITION,
        'evaluation_samples': len(dataset),
        'crafting_samples': len(craft_dataset),
    }
    logger.info(f'Protocol {run_id} complete: {len(report.white_box)} white-box rows, '
                f'{len(report.black_box)} black-box cells')
    return report


def protocol_config_from_settings(settings: dict, attacks: Optional[Sequence[str]] = None,
                                  jobs: int = 1) -> ProtocolConfig:
    pcfg = ProtocolConfig(jobs=jobs)
    if attacks:
        parsed = tuple(AttackId.parse(a) for a in attacks)
        pcfg = replace(pcfg, attacks=parsed,
                       transfer_attacks=tuple(a for a in parsed if a in TRANSFERABLE_ATTACKS))
    return replace(
        pcfg,
        deltas=tuple(float(d) for d in settings.get('sweep_deltas', pcfg.deltas)),
        thresholds=tuple(float(t) for t in settings.get('squeeze_thresholds', pcfg.thresholds)),
        squeeze_bits=int(settings.get('squeeze_bits', pcfg.squeeze_bits)),
        squeeze_k=int(settings.get('squeeze_median_k', pcfg.squeeze_k)),
    )
