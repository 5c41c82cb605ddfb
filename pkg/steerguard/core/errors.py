"""
Exception hierarchy for steerguard
"""


class SteerGuardError(Exception):
    """Base class for every error raised by steerguard"""


class ValidationError(SteerGuardError, ValueError):
    """Invalid input or violated precondition (CLI exit code 1)"""


class ConfigError(ValidationError):
    """Malformed configuration file or unknown setting"""


class GradientError(SteerGuardError):
    """Differentiation failure: non-scalar loss, detached graph, missing grads"""


class ArtifactError(SteerGuardError):
    """Corrupt or unreadable artifact file"""


class VersionError(ArtifactError):
    """Artifact written with an unsupported format_version"""


class AttackError(SteerGuardError):
    """Attack finished without producing usable adversarial examples"""
