"""
Command implementations. Each takes the app and the resolved settings
(lower-case keys: config defaults < config file < flags) and writes its
outputs under settings['out'].
"""
import csv
import json
import logging
import os
from dataclasses import replace

import click
import numpy as np

from steerguard import __version__
from steerguard.attacks import (TRANSFERABLE_ATTACKS, AttackConfig, AttackId, OptUniRunner,
                                get_attack_runner, load_generator, load_perturbation,
                                save_generator, save_perturbation, train_advgan)
from steerguard.attacks.advgan import PER_IMAGE, UNIVERSAL
from steerguard.attacks.universal import craft_universal
from steerguard.config import dump_settings
from steerguard.container import inject
from steerguard.core.errors import ValidationError
from steerguard.data import generate_synthetic, load_manifest, split, write_manifest
from steerguard.defenses import (DistillConfig, adversarial_train, anomaly_flag, distill_train,
                                 distillation_sweep, profile_inference)
from steerguard.evaluation import (emit_report, make_run_id, name_models, rate_of, render_adversarial,
                                   render_comparison, render_steering_tracks, rescore_sweep,
                                   run_protocol, transfer_matrix)
from steerguard.evaluation.metrics import detection_curve, false_positive_rows
from steerguard.evaluation.protocol import protocol_config_from_settings
from steerguard.evaluation.report import COLUMNS, CSV, JSON, normalize, write_table
from steerguard.models import (TrainConfig, baseline_rmse, build_model, eval_rmse, load_model,
                               save_model, train_model)

logger = logging.getLogger('steerguard.cli')

MODEL_FILE = 'model.bin'
PERTURBATION_FILE = 'perturbation.bin'
GENERATOR_FILE = 'generator.bin'
RESOLVED_CONFIG_FILE = 'resolved_config.txt'


# --- helpers ---------------------------------------------------------------

def require(settings, key, flag=None):
    value = settings.get(key)
    if value is None or value == () or value == '':
        raise ValidationError(f'missing required option --{flag or key.replace("_", "-")}')
    return value


def prepare_out(settings):
    """Create the output directory and snapshot the resolved settings into it"""
    out = require(settings, 'out')
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, RESOLVED_CONFIG_FILE), 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(dump_settings(settings))
    return out


def write_json(path, data):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(json.dumps(normalize(data), sort_keys=True, indent=2) + '\n')


def attack_config(settings, **overrides):
    return AttackConfig.from_settings(settings, **overrides)


def train_config(settings):
    return TrainConfig.from_settings(settings)


def methods(settings, default=('opt',)):
    chosen = settings.get('method') or default
    if isinstance(chosen, str):
        chosen = (chosen,)
    return [AttackId.parse(m) for m in chosen]


def build_runner(settings, attack_id, model, dataset, cfg=None):
    """Runner for attack_id, taking artifacts from --perturbation/--generator when given"""
    cfg = cfg or attack_config(settings)
    if attack_id == AttackId.OPT_UNI and settings.get('perturbation'):
        return OptUniRunner(cfg, load_perturbation(settings['perturbation']))
    runner = get_attack_runner(attack_id, cfg)
    if attack_id in (AttackId.ADVGAN, AttackId.ADVGAN_UNI) and settings.get('generator'):
        generator = load_generator(settings['generator'])
        runner = type(runner)(cfg, generator)
    if runner.needs_preparation:
        craft_path = settings.get('craft_data')
        runner.prepare(model, load_manifest(craft_path) if craft_path else dataset)
    return runner


def load_models(paths):
    return name_models([load_model(p) for p in paths])


# --- commands --------------------------------------------------------------

def gen_data_command(app, settings):
    """Generate a seeded synthetic road dataset (manifest + PNGs)."""
    out = prepare_out(settings)
    dataset = generate_synthetic(int(settings.get('n') or 2000), int(settings['input_size']),
                                 int(settings['seed']), strict_size=bool(settings['strict_size']))
    fraction = settings.get('test_fraction')
    if fraction:
        train, test = split(dataset, float(fraction), int(settings['seed']))
        write_manifest(train, os.path.join(out, 'train'))
        write_manifest(test, os.path.join(out, 'test'))
        click.echo(f'wrote {len(train)} train / {len(test)} test samples to {out}', err=True)
    else:
        write_manifest(dataset, out)
        click.echo(f'wrote {len(dataset)} samples to {out}', err=True)


def train_command(app, settings):
    """Train a steering model on a manifest."""
    out = prepare_out(settings)
    dataset = load_manifest(require(settings, 'data'))
    model = build_model(settings.get('arch') or 'EpochS', dataset.image_size, int(settings['seed']),
                        strict_size=bool(settings['strict_size']))
    model, history = train_model(model, dataset, train_config(settings))
    evaluation = load_manifest(settings['test_data']) if settings.get('test_data') else dataset
    metrics = {
        'arch_id': model.arch_id,
        'history': history,
        'rmse': eval_rmse(model, evaluation),
        'baseline_rmse': baseline_rmse(evaluation),
        'evaluated_on': 'test' if settings.get('test_data') else 'train',
    }
    save_model(model, os.path.join(out, MODEL_FILE))
    write_json(os.path.join(out, 'metrics.json'), metrics)
    click.echo(f'{model.arch_id}: RMSE {metrics["rmse"]:.5f} '
               f'(zero predictor {metrics["baseline_rmse"]:.5f})', err=True)


@inject('artifact_store')
def write_examples(out, examples, artifact_store=None):
    with open(os.path.join(out, 'examples.csv'), 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['sample_id', 'attack_id', 'pred_original', 'pred_adversarial',
                         'deviation', 'success', 'iterations_used'])
        for e in examples:
            writer.writerow([e.sample_id, e.attack_id.value, f'{e.pred_original:.6g}',
                             f'{e.pred_adversarial:.6g}', f'{e.deviation:.6g}',
                             int(e.success), e.iterations_used])
    artifact_store.save(
        os.path.join(out, 'perturbations.bin'), 'perturbation',
        [('perturbations', np.stack([e.perturbation for e in examples]))],
        {'attack_id': examples[0].attack_id.value, 'delta': examples[0].delta,
         'sample_ids': [e.sample_id for e in examples]},
    )


def attack_command(app, settings):
    """Run one attack over a dataset and record every adversarial example."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    attack_id = methods(settings)[0]
    runner = build_runner(settings, attack_id, model, dataset)
    examples = runner.attack_dataset(model, dataset, int(settings['jobs']))
    write_examples(out, examples)
    if isinstance(runner, OptUniRunner) and not settings.get('perturbation'):
        save_perturbation(runner.universal, os.path.join(out, PERTURBATION_FILE))
    generator = getattr(runner, 'generator', None)
    if generator is not None and not settings.get('generator'):
        save_generator(generator, os.path.join(out, GENERATOR_FILE))
    rate = rate_of(examples)
    write_json(os.path.join(out, 'summary.json'), {
        'attack_id': attack_id.value, 'delta': runner.config.delta,
        'model': model.arch_id, 'samples': len(examples), 'success_rate': rate,
    })
    click.echo(f'{attack_id.value} on {model.arch_id}: success rate {rate:.4f}', err=True)


def craft_universal_command(app, settings):
    """Craft one universal perturbation on a model."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    universal = craft_universal(model, dataset, attack_config(settings))
    save_perturbation(universal, os.path.join(out, PERTURBATION_FILE))
    write_json(os.path.join(out, 'summary.json'), {
        'attack_id': AttackId.OPT_UNI.value, 'fooling_rate': universal.fooling_rate,
        'max_abs': float(np.abs(universal.perturbation).max()), 'model': model.arch_id,
        'samples': len(dataset),
    })
    click.echo(f'universal perturbation: fooling rate {universal.fooling_rate:.4f}', err=True)


def train_advgan_command(app, settings):
    """Train an AdvGAN generator against a model."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    mode = settings.get('mode') or PER_IMAGE
    if mode not in (PER_IMAGE, UNIVERSAL):
        raise ValidationError(f'--mode must be {PER_IMAGE} or {UNIVERSAL}, got {mode!r}')
    cfg = attack_config(settings)
    generator = train_advgan(model, dataset, cfg, mode)
    save_generator(generator, os.path.join(out, GENERATOR_FILE))
    attack_id = AttackId.ADVGAN_UNI if mode == UNIVERSAL else AttackId.ADVGAN
    runner = type(get_attack_runner(attack_id, cfg))(cfg, generator)
    rate = rate_of(runner.attack_dataset(model, dataset, int(settings['jobs'])))
    write_json(os.path.join(out, 'summary.json'), {
        'attack_id': attack_id.value, 'mode': mode, 'model': model.arch_id,
        'samples': len(dataset), 'success_rate': rate,
    })
    click.echo(f'{attack_id.value} generator: success rate {rate:.4f} on its training set', err=True)


def adv_train_command(app, settings):
    """Retrain a model on clean plus adversarial images."""
    out = prepare_out(settings)
    source = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    attack_id = methods(settings, default=('it_fgsm',))[0]
    alpha = float(settings['adv_train_alpha'])
    cfg = attack_config(settings)
    runner = build_runner(settings, attack_id, source, dataset, cfg)
    evaluation = load_manifest(settings['test_data']) if settings.get('test_data') else None
    hardened = adversarial_train(source, dataset, attack_id, alpha, train_config(settings), cfg,
                                 eval_dataset=evaluation, runner=runner, jobs=int(settings['jobs']))
    hardened.model.provenance = {'defense': 'adv_train', 'parameter': alpha,
                                 'source': source.arch_id, 'attack_id': attack_id.value}
    save_model(hardened.model, os.path.join(out, MODEL_FILE))
    write_json(os.path.join(out, 'summary.json'), {
        'alpha': alpha, 'attack_id': attack_id.value, 'clean_rmse': hardened.clean_rmse,
        'history': hardened.history, 'source': source.arch_id,
    })
    click.echo(f'adversarially trained {source.arch_id}: clean RMSE {hardened.clean_rmse:.5f}', err=True)


def distill_command(app, settings):
    """Distill a model into students, one per lambda."""
    out = prepare_out(settings)
    teacher = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    evaluation = load_manifest(settings['test_data']) if settings.get('test_data') else None
    tcfg = train_config(settings)
    cfg = DistillConfig(epochs=tcfg.epochs, batch_size=tcfg.batch_size, optimizer=tcfg.optimizer,
                        lr=tcfg.lr, seed=tcfg.seed)
    lam = settings.get('lambda')
    if lam is not None:
        distilled = distill_train(teacher, dataset, replace(cfg, lam=float(lam)), eval_dataset=evaluation)
        results = [(float(lam), distilled.model)]
    else:
        results = distillation_sweep(teacher, dataset, settings['distill_lambdas'], cfg, evaluation)

    rows = []
    for value, student in results:
        if student is teacher:
            continue
        student.provenance = {'defense': 'distill', 'parameter': value, 'source': teacher.arch_id}
        name = MODEL_FILE if lam is not None else f'model-lambda-{value:g}.bin'
        save_model(student, os.path.join(out, name))
        rows.append({'lambda': value, 'file': name,
                     'clean_rmse': eval_rmse(student, evaluation or dataset)})
    write_json(os.path.join(out, 'summary.json'), {'source': teacher.arch_id, 'students': rows})
    click.echo(f'distilled {len(rows)} student(s) from {teacher.arch_id}', err=True)


def thresholds(settings):
    values = settings.get('threshold') or settings['squeeze_thresholds']
    return sorted(float(t) for t in values)


def detect_squeeze_command(app, settings):
    """Feature-squeezing detection rates per threshold."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    bits, k = int(settings['squeeze_bits']), int(settings['squeeze_median_k'])
    levels = thresholds(settings)
    rows = false_positive_rows(model, dataset, levels, bits, k)
    for attack_id in methods(settings):
        runner = build_runner(settings, attack_id, model, dataset)
        examples = runner.attack_dataset(model, dataset, int(settings['jobs']))
        if not any(e.success for e in examples):
            logger.warning(f'{attack_id.value}: no successful adversarial examples, no detection rows')
            continue
        rows += detection_curve(model, dataset, examples, levels, True, bits, k)
    write_table([normalize(vars(r)) for r in rows], COLUMNS['detection'], os.path.join(out, 'detection.csv'))
    click.echo(f'wrote {len(rows)} detection rows', err=True)


def detect_anomaly_command(app, settings):
    """Compare inference resource profiles with and without attacks."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    count = int(settings.get('images') or 20)
    images = dataset.images[:count]
    baseline = profile_inference(model, images)
    time_ratio = settings.get('time_ratio')
    compute_ratio = settings.get('compute_ratio')
    if time_ratio is None and compute_ratio is None:
        time_ratio = 1.5
    rows = [{'model_id': model.arch_id, **baseline.to_dict(), 'anomaly': False}]
    for attack_id in methods(settings):
        runner = build_runner(settings, attack_id, model, dataset)
        observed = profile_inference(model, images, runner)
        flagged = anomaly_flag(baseline, observed, time_ratio, compute_ratio)
        rows.append({'model_id': model.arch_id, **observed.to_dict(), 'anomaly': flagged})
    write_table([normalize(r) for r in rows], COLUMNS['profiles'], os.path.join(out, 'profiles.csv'))
    flagged = [r['attack_id'] for r in rows if r['anomaly']]
    click.echo(f'anomalous: {", ".join(flagged) or "none"}', err=True)


def sweep_delta_command(app, settings):
    """Success rate of each attack across thresholds."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    rows = []
    for attack_id in methods(settings, default=tuple(a.value for a in AttackId)):
        runner = build_runner(settings, attack_id, model, dataset)
        examples = runner.attack_dataset(model, dataset, int(settings['jobs']))
        for delta, rate in rescore_sweep(examples, sorted(settings['sweep_deltas'])):
            rows.append({'model_id': model.arch_id, 'attack_id': attack_id.value,
                         'delta': delta, 'success_rate': rate})
    write_table([normalize(r) for r in rows], COLUMNS['sweeps'], os.path.join(out, 'sweep.csv'))


def transfer_command(app, settings):
    """Black-box transfer matrix between models."""
    out = prepare_out(settings)
    paths = require(settings, 'model')
    if isinstance(paths, str) or len(paths) < 2:
        raise ValidationError('transfer needs at least two --model files')
    models = load_models(paths)
    dataset = load_manifest(require(settings, 'data'))
    craft = load_manifest(settings['craft_data']) if settings.get('craft_data') else None
    attack_ids = methods(settings, default=tuple(a.value for a in TRANSFERABLE_ATTACKS))
    cfg = attack_config(settings)
    cells = transfer_matrix(models, attack_ids, dataset, cfg.delta, cfg, craft_dataset=craft,
                            jobs=int(settings['jobs']))
    rows = [{'source': c.source, 'attack_id': c.attack_id, 'target': c.target,
             'success_rate': c.success_rate} for c in cells]
    write_table([normalize(r) for r in rows], COLUMNS['black_box'], os.path.join(out, 'black_box.csv'))


def report_command(app, settings):
    """Run the full evaluation protocol and write the report."""
    out = prepare_out(settings)
    paths = require(settings, 'model')
    if isinstance(paths, str):
        paths = (paths,)
    models = load_models(paths)
    dataset = load_manifest(require(settings, 'data'))
    craft = load_manifest(settings['craft_data']) if settings.get('craft_data') else None
    defended = {path: load_model(path) for path in settings.get('defended') or ()}
    pcfg = protocol_config_from_settings(settings, settings.get('method'), int(settings['jobs']))
    if not settings.get('profile'):
        # timing rows differ between identical runs
        pcfg = replace(pcfg, profile_images=0)
    cfg = attack_config(settings)
    # the output location does not change the experiment
    run_id = make_run_id({k: v for k, v in settings.items() if k != 'out'})
    report = run_protocol(models, dataset, cfg, run_id, __version__,
                          craft_dataset=craft, defended=defended, pcfg=pcfg)
    fmt = settings.get('format') or 'both'
    if fmt in (JSON, 'both'):
        emit_report(report, JSON, os.path.join(out, 'report.json'))
    if fmt in (CSV, 'both'):
        emit_report(report, CSV, os.path.join(out, 'report_csv'))
    click.echo(f'report {report.run_id} written to {out}', err=True)


def render_command(app, settings):
    """Render adversarial examples and steering tracks for one sample."""
    out = prepare_out(settings)
    model = load_model(require(settings, 'model'))
    dataset = load_manifest(require(settings, 'data'))
    index = int(settings.get('index') or 0)
    if not 0 <= index < len(dataset):
        raise ValidationError(f'--index {index} outside the dataset (0..{len(dataset) - 1})')
    sample = dataset[index]
    amplify = float(settings.get('amplify') or 5.0)
    examples = []
    for attack_id in methods(settings, default=tuple(a.value for a in AttackId)):
        runner = build_runner(settings, attack_id, model, dataset)
        example = runner.attack(model, sample.image, sample.id)
        render_adversarial(example, amplify, os.path.join(out, f'adversarial_{attack_id.value}.png'))
        examples.append(example)
    render_comparison(examples, amplify, os.path.join(out, 'comparison.png'))
    render_steering_tracks(sample.image, examples[0].pred_original,
                           out_path=os.path.join(out, 'tracks.png'))
