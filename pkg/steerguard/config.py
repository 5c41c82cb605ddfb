import os

from steerguard.core.errors import ConfigError

# Try to load dotenv if available
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


def _env_float(name, default):
    return float(os.environ.get(f'STEERGUARD_{name}', default))


def _env_int(name, default):
    return int(os.environ.get(f'STEERGUARD_{name}', default))


def _env_floats(name, default):
    raw = os.environ.get(f'STEERGUARD_{name}')
    if not raw:
        return tuple(default)
    return tuple(float(v) for v in raw.split(','))


class Config:
    """Base configuration"""
    ENV = 'base'
    DEBUG = False

    # Reproducibility
    SEED = _env_int('SEED', 0)
    JOBS = _env_int('JOBS', 1)

    # Models
    INPUT_SIZE = _env_int('INPUT_SIZE', 64)  # 128 matches the full-size protocol
    STRICT_SIZE = True  # only 64 and 128
    TRAIN_EPOCHS = _env_int('TRAIN_EPOCHS', 30)
    TRAIN_BATCH_SIZE = _env_int('TRAIN_BATCH_SIZE', 32)
    TRAIN_LR = _env_float('TRAIN_LR', 0.001)
    TRAIN_OPTIMIZER = os.environ.get('STEERGUARD_TRAIN_OPTIMIZER', 'adam')

    # Attacks (experiment defaults)
    DELTA = _env_float('DELTA', 0.3)
    FGSM_EPSILON = _env_float('FGSM_EPSILON', 0.01)
    FGSM_ITERS = _env_int('FGSM_ITERS', 5)
    OPT_LR = _env_float('OPT_LR', 0.005)
    OPT_MAX_ITERS = _env_int('OPT_MAX_ITERS', 100)
    OPT_NORM_WEIGHT = _env_float('OPT_NORM_WEIGHT', 0.01)
    GAN_LR = _env_float('GAN_LR', 0.001)
    GAN_ALPHA = _env_float('GAN_ALPHA', 1.0)
    GAN_EPOCHS = _env_int('GAN_EPOCHS', 10)
    GAN_BATCH_SIZE = _env_int('GAN_BATCH_SIZE', 32)
    GAN_TARGET_MARGIN = _env_float('GAN_TARGET_MARGIN', 0.1)
    PERTURB_CLIP = _env_float('PERTURB_CLIP', 0.3)
    TARGET_SIGN = _env_int('TARGET_SIGN', 1)

    # Defenses
    ADV_TRAIN_ALPHA = _env_float('ADV_TRAIN_ALPHA', 0.5)
    DISTILL_LAMBDAS = _env_floats('DISTILL_LAMBDAS', (0.01, 0.05, 0.1, 0.5, 1, 5, 10))
    SQUEEZE_BITS = _env_int('SQUEEZE_BITS', 4)
    SQUEEZE_MEDIAN_K = _env_int('SQUEEZE_MEDIAN_K', 2)
    SQUEEZE_THRESHOLDS = _env_floats('SQUEEZE_THRESHOLDS', (0.01, 0.05, 0.1, 0.15))
    SWEEP_DELTAS = _env_floats('SWEEP_DELTAS', (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5))

    # Artifacts
    ARTIFACT_ROOT = os.environ.get('STEERGUARD_ARTIFACT_ROOT', '.')

    # Logging
    LOG_DIR = os.environ.get('STEERGUARD_LOG_DIR', 'logs')
    LOG_LEVEL = os.environ.get('STEERGUARD_LOG_LEVEL', 'INFO')
    LOG_TO_FILE = True


class DevelopmentConfig(Config):
    """Development configuration"""
    ENV = 'development'
    DEBUG = os.environ.get('STEERGUARD_DEBUG', 'True').lower() in ('true', '1', 'yes')


class ProductionConfig(Config):
    """Production configuration (long experiment runs)"""
    ENV = 'production'
    DEBUG = os.environ.get('STEERGUARD_DEBUG', 'False').lower() in ('true', '1', 'yes')


class TestingConfig(Config):
    """Testing configuration"""
    ENV = 'testing'
    DEBUG = False
    LOG_TO_FILE = False
    STRICT_SIZE = False
    TRAIN_EPOCHS = 2
    GAN_EPOCHS = 2


# Default to development
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def config_to_dict(config_class):
    """Uppercase attributes of a config class as a plain dict"""
    return {
        key: getattr(config_class, key)
        for key in dir(config_class)
        if key.isupper()
    }


def normalize_key(key):
    """'--input-size' / 'input_size' / 'INPUT_SIZE' -> 'input_size'"""
    return key.strip().lstrip('-').replace('-', '_').lower()


def load_config_file(path):
    """
    Parse a flat key=value config file.

    Blank lines and lines starting with '#' are ignored. Keys use flag names
    ('input-size' or 'input_size'). Values are kept as strings; the CLI converts
    them with the same types as the matching flag.
    """
    values = {}
    try:
        with open(path, encoding='utf-8') as handle:
            lines = handle.read().splitlines()
    except OSError as e:
        raise ConfigError(f'cannot read config file {path}: {e}')

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if '=' not in stripped:
            raise ConfigError(f'{path}:{lineno}: expected key=value, got {stripped!r}')
        key, value = stripped.split('=', 1)
        key = normalize_key(key)
        if not key:
            raise ConfigError(f'{path}:{lineno}: empty key')
        values[key] = value.strip()
    return values


def _coerce(key, value, default):
    """Convert a config-file string to the type of the class default"""
    if not isinstance(value, str) or isinstance(default, str) or default is None:
        return value
    try:
        if isinstance(default, bool):
            return value.strip().lower() in ('true', '1', 'yes')
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, (tuple, list)):
            return tuple(float(v) for v in value.split(',') if v.strip())
    except ValueError:
        raise ConfigError(f'setting {key}: cannot convert {value!r} to {type(default).__name__}')
    return value


def resolve_settings(config_name=None, file_values=None, flag_values=None):
    """
    Layer settings: config class < config file < explicit flags.

    Flags with value None are treated as "not given". File values for known
    settings are converted to the type of the class default.
    """
    if config_name is not None and config_name not in config:
        raise ConfigError(f'unknown environment {config_name!r}; known: {", ".join(sorted(config))}')
    config_class = config[config_name or 'default']
    defaults = {normalize_key(k): v for k, v in config_to_dict(config_class).items()}
    resolved = dict(defaults)
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if value is None:
                continue
            key = normalize_key(key)
            resolved[key] = _coerce(key, value, defaults.get(key))
    return resolved


def dump_settings(settings):
    """Serialize settings in the same key=value format the loader accepts"""
    lines = []
    for key in sorted(settings):
        value = settings[key]
        if isinstance(value, (tuple, list)):
            value = ','.join(str(v) for v in value)
        lines.append(f'{key}={value}')
    return '\n'.join(lines) + '\n'
