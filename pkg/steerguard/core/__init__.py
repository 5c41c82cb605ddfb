"""
Core application components
"""
from steerguard.core.error_handlers import register_error_handlers
from steerguard.core.errors import (
    ArtifactError,
    AttackError,
    ConfigError,
    GradientError,
    SteerGuardError,
    ValidationError,
    VersionError,
)
from steerguard.core.logging_config import setup_logging

__all__ = [
    'ArtifactError',
    'AttackError',
    'ConfigError',
    'GradientError',
    'SteerGuardError',
    'ValidationError',
    'VersionError',
    'register_error_handlers',
    'setup_logging',
]
