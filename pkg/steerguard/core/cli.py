"""
CLI commands registration
"""
import os
import sys

import click

from steerguard import __version__
from steerguard import cli as commands
from steerguard.attacks.advgan import PER_IMAGE, UNIVERSAL
from steerguard.config import load_config_file, resolve_settings
from steerguard.core.error_handlers import EXIT_OK, EXIT_VALIDATION, register_error_handlers
from steerguard.models.zoo import ARCHITECTURES


class SteerGuardGroup(click.Group):
    """Top-level group: turns exceptions into exit codes instead of tracebacks"""

    def main(self, args=None, prog_name=None, standalone_mode=True, **extra):
        try:
            result = super().main(args=args, prog_name=prog_name, standalone_mode=False, **extra)
            # --help and --version come back as their exit code
            code = result if isinstance(result, int) else EXIT_OK
        except click.exceptions.Abort:
            click.echo('aborted', err=True)
            code = EXIT_VALIDATION
        except Exception as error:
            code = handle_error(error)
        if standalone_mode:
            sys.exit(code)
        return code


def handle_error(error):
    for error_type, handler in register_error_handlers():
        if isinstance(error, error_type):
            return handler(error)
    raise error


class CliState:
    """Global options shared by every subcommand"""

    def __init__(self, config_path=None, env=None):
        self.config_path = config_path
        self.env = env or os.environ.get('STEERGUARD_ENV', 'development')

    def run(self, command, flags):
        from steerguard import create_app

        file_values = load_config_file(self.config_path) if self.config_path else {}
        settings = resolve_settings(self.env, file_values, given(flags))
        app = create_app(self.env, overrides=settings)
        app.logger.debug(f'{command.__name__} with {len(settings)} settings')
        return command(app, settings)


def given(flags):
    """Flags the user actually passed (None and empty multiples are "not given")"""
    return {k: v for k, v in flags.items() if v is not None and v != ()}


def _run(command):
    """Callback forwarding all flags to a command implementation"""
    @click.pass_obj
    def callback(state, **flags):
        return state.run(command, flags)
    callback.__doc__ = command.__doc__
    return callback


def options(*decorators):
    def apply(func):
        for decorator in reversed(decorators):
            func = decorator(func)
        return func
    return apply


# --- shared options --------------------------------------------------------

EXISTING_FILE = click.Path(exists=True, dir_okay=False)
EXISTING_PATH = click.Path(exists=True)

out_option = click.option('--out', type=click.Path(file_okay=False), help='Output directory')
seed_option = click.option('--seed', type=int, help='Random seed')
jobs_option = click.option('--jobs', type=click.IntRange(min=1), help='Worker threads for per-image work')
model_option = click.option('--model', type=EXISTING_FILE, help='Model artifact (model.bin)')
models_option = click.option('--model', type=EXISTING_FILE, multiple=True,
                             help='Model artifact; repeat for several models')
data_option = click.option('--data', type=EXISTING_PATH, help='Dataset manifest (CSV or its directory)')
test_data_option = click.option('--test-data', 'test_data', type=EXISTING_PATH,
                                help='Held-out manifest for RMSE')
craft_data_option = click.option('--craft-data', 'craft_data', type=EXISTING_PATH,
                                 help='Manifest used to craft universal/generator artifacts')
method_option = click.option('--method', type=str, help='Attack id')
methods_option = click.option('--method', type=str, multiple=True, help='Attack id; repeatable')
delta_option = click.option('--delta', type=float, help='Adversarial threshold')
clip_option = click.option('--clip', 'perturb_clip', type=float, help='Perturbation bound')
perturbation_option = click.option('--perturbation', type=EXISTING_FILE,
                                   help='Universal perturbation artifact for opt_uni')
generator_option = click.option('--generator', type=EXISTING_FILE,
                                help='Generator artifact for advgan / advgan_uni')

common = options(out_option, seed_option)
artifacts = options(perturbation_option, generator_option, craft_data_option)
attack_params = options(
    delta_option,
    click.option('--epsilon', 'fgsm_epsilon', type=float, help='IT-FGSM step size'),
    click.option('--iters', 'fgsm_iters', type=int, help='IT-FGSM iterations'),
    click.option('--max-iters', 'opt_max_iters', type=int, help='Opt iteration cap'),
    click.option('--norm-weight', 'opt_norm_weight', type=float,
                 help='Weight of ||eps|| in the Opt objective'),
    clip_option,
    click.option('--target-sign', 'target_sign', type=click.Choice(['1', '-1']),
                 help='Direction of the forced deviation'),
)
train_params = options(
    click.option('--epochs', 'train_epochs', type=int, help='Training epochs'),
    click.option('--lr', 'train_lr', type=float, help='Training learning rate'),
    click.option('--batch-size', 'train_batch_size', type=int, help='Mini-batch size'),
    click.option('--optimizer', 'train_optimizer', type=click.Choice(['adam', 'sgd']), help='Optimizer'),
)


@click.group(cls=SteerGuardGroup)
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help='key=value settings file; flags override it')
@click.option('--env', type=click.Choice(['development', 'production', 'testing']),
              help='Configuration environment (default: STEERGUARD_ENV or development)')
@click.version_option(__version__, prog_name='steerguard')
@click.pass_context
def cli(ctx, config_path, env):
    """Adversarial attacks and defenses for steering-angle regressors."""
    ctx.obj = CliState(config_path, env)


cli.command('gen-data')(options(
    click.option('--n', type=click.IntRange(min=1), help='Number of samples'),
    click.option('--input-size', 'input_size', type=int, help='Image side in pixels'),
    click.option('--test-fraction', 'test_fraction', type=click.FloatRange(0, 1, max_open=True),
                 help='Also split into train/ and test/'),
    common,
)(_run(commands.gen_data_command)))

cli.command('train')(options(
    click.option('--arch', type=click.Choice(sorted(ARCHITECTURES)), help='Architecture'),
    data_option, test_data_option, train_params, common,
)(_run(commands.train_command)))

cli.command('attack')(options(
    model_option, data_option, method_option, attack_params,
    click.option('--lr', 'opt_lr', type=float, help='Opt learning rate'),
    artifacts, jobs_option, common,
)(_run(commands.attack_command)))

cli.command('craft-universal')(options(
    model_option, data_option, delta_option, clip_option,
    click.option('--lr', 'opt_lr', type=float, help='Opt learning rate'),
    click.option('--max-iters', 'opt_max_iters', type=int, help='Opt iteration cap'),
    common,
)(_run(commands.craft_universal_command)))

cli.command('train-advgan')(options(
    model_option, data_option,
    click.option('--mode', type=click.Choice([PER_IMAGE, UNIVERSAL]), help='Generator input'),
    delta_option, clip_option,
    click.option('--alpha', 'gan_alpha', type=float, help='Weight of the GAN loss'),
    click.option('--lr', 'gan_lr', type=float, help='Generator/discriminator learning rate'),
    click.option('--epochs', 'gan_epochs', type=int, help='GAN epochs'),
    click.option('--batch-size', 'gan_batch_size', type=int, help='GAN batch size'),
    jobs_option, common,
)(_run(commands.train_advgan_command)))


@cli.group()
def defend():
    """Retrain a model to resist attacks."""


defend.command('adv-train')(options(
    model_option, data_option, test_data_option, method_option,
    click.option('--alpha', 'adv_train_alpha', type=float, help='Weight of the clean loss'),
    train_params, attack_params, artifacts, jobs_option, common,
)(_run(commands.adv_train_command)))

defend.command('distill')(options(
    model_option, data_option, test_data_option,
    click.option('--lambda', 'lambda', type=float, help='Feature term weight; omit for the full sweep'),
    train_params, common,
)(_run(commands.distill_command)))


@cli.group()
def detect():
    """Flag adversarial inputs."""


squeeze_params = options(
    click.option('--threshold', type=float, multiple=True, help='Detection threshold; repeatable'),
    click.option('--bits', 'squeeze_bits', type=click.IntRange(1, 8), help='Bit depth'),
    click.option('--k', 'squeeze_median_k', type=click.IntRange(min=1), help='Median window'),
)

detect.command('squeeze')(options(
    model_option, data_option, methods_option, squeeze_params, attack_params,
    artifacts, jobs_option, common,
)(_run(commands.detect_squeeze_command)))

detect.command('anomaly')(options(
    model_option, data_option, methods_option,
    click.option('--images', type=click.IntRange(min=1), help='Images to profile'),
    click.option('--time-ratio', 'time_ratio', type=float, help='Flag when time grows by this factor'),
    click.option('--compute-ratio', 'compute_ratio', type=float,
                 help='Flag when scratch memory grows by this factor'),
    attack_params, artifacts, common,
)(_run(commands.detect_anomaly_command)))

cli.command('sweep-delta')(options(
    model_option, data_option, methods_option,
    click.option('--sweep-delta', 'sweep_deltas', type=float, multiple=True, help='Threshold to score at'),
    attack_params, artifacts, jobs_option, common,
)(_run(commands.sweep_delta_command)))

cli.command('transfer')(options(
    models_option, data_option, craft_data_option, methods_option, attack_params, jobs_option, common,
)(_run(commands.transfer_command)))

cli.command('report')(options(
    models_option, data_option, craft_data_option, methods_option,
    click.option('--defended', type=EXISTING_FILE, multiple=True, help='Defended model artifact; repeatable'),
    click.option('--threshold', 'squeeze_thresholds', type=float, multiple=True,
                 help='Detection threshold; repeatable'),
    click.option('--sweep-delta', 'sweep_deltas', type=float, multiple=True, help='Threshold to score at'),
    click.option('--profile', is_flag=True, default=False, help='Include timing profiles'),
    click.option('--format', type=click.Choice(['json', 'csv', 'both']), help='Report format'),
    attack_params, jobs_option, common,
)(_run(commands.report_command)))

cli.command('render')(options(
    model_option, data_option, methods_option,
    click.option('--index', type=click.IntRange(min=0), help='Sample to render'),
    click.option('--amplify', type=float, help='Perturbation amplification'),
    attack_params, artifacts, common,
)(_run(commands.render_command)))


def run_command(argv=None) -> int:
    """Run the CLI on argv and return the exit code"""
    return cli.main(args=list(argv) if argv is not None else None, prog_name='steerguard',
                    standalone_mode=False)


def main():
    sys.exit(run_command())
