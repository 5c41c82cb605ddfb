"""
steerguard: adversarial attacks and defenses for CNN steering-angle regressors
"""
import logging
import os

from steerguard.config import config, config_to_dict
from steerguard.container import get_container

__version__ = '0.1.0'


class App:
    """Resolved configuration plus the package logger"""

    def __init__(self, name, settings):
        self.name = name
        self.config = settings
        self.logger = logging.getLogger('steerguard')

    @property
    def debug(self):
        return bool(self.config.get('DEBUG', False))


def create_app(config_name=None, overrides=None):
    """Application factory pattern"""
    from steerguard.attacks import register_attack_runners
    from steerguard.core import setup_logging
    from steerguard.storage import ArtifactStore, LocalArtifactStore

    if config_name is None:
        config_name = os.environ.get('STEERGUARD_ENV', 'development')
    settings = config_to_dict(config.get(config_name, config['default']))
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key.upper()] = value

    app = App('steerguard', settings)
    setup_logging(app)

    # Register services
    container = get_container()
    container.register_instance('app', app)
    container.register(
        'artifact_store',
        lambda: LocalArtifactStore(app.config),
        singleton=True,
        service_type=ArtifactStore,
    )
    register_attack_runners(container)
    app.logger.debug(f'Registered services: {", ".join(container.names())}')
    return app
