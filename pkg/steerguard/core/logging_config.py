"""
Logging configuration for steerguard
"""
import os
import logging
from logging.handlers import RotatingFileHandler

LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


def setup_logging(app):
    """Configure the 'steerguard' logger for the application"""
    logger = app.logger
    # Re-running the factory (tests, repeated CLI invocations) must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.propagate = False

    if app.config.get('LOG_TO_FILE', True):
        log_dir = app.config.get('LOG_DIR', 'logs')
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, 'steerguard.log'),
            maxBytes=10240000,  # 10MB
            backupCount=10
        )
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(logging.INFO)
        logger.addHandler(file_handler)

    # Data goes to files only; diagnostics always go to stderr
    if app.config.get('ENV') == 'testing':
        logger.setLevel(logging.WARNING)
        logger.addHandler(logging.NullHandler())
    elif not app.debug:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
        console_handler.setLevel(logging.WARNING)
        logger.addHandler(console_handler)
        logger.setLevel(app.config.get('LOG_LEVEL', 'INFO'))
    else:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        console_handler.setLevel(logging.DEBUG)
        logger.addHandler(console_handler)
        logger.setLevel(logging.DEBUG)

    if not os.environ.get('STEERGUARD_SILENT_STARTUP'):
        _log_startup_configuration(app)


def _log_startup_configuration(app):
    """Log the experiment-relevant configuration on startup"""
    app.logger.info(f"steerguard startup (environment: {app.config.get('ENV')})")
    app.logger.info(f"Debug mode: {app.debug}")
    keys = ['SEED', 'JOBS', 'INPUT_SIZE', 'DELTA', 'FGSM_EPSILON', 'FGSM_ITERS',
            'OPT_LR', 'OPT_MAX_ITERS', 'GAN_LR', 'GAN_ALPHA', 'PERTURB_CLIP']
    for key in keys:
        if key in app.config:
            app.logger.info(f"  {key}: {app.config[key]}")

    overridden = [var for var in os.environ if var.startswith('STEERGUARD_')]
    if overridden:
        app.logger.info(f"Environment overrides: {', '.join(sorted(overridden))}")
