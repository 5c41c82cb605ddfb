"""
Error handlers: map exceptions raised by commands to process exit codes
"""
import logging

import click

from steerguard.core.errors import SteerGuardError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

logger = logging.getLogger('steerguard')


def handle_usage_error(error: click.exceptions.UsageError) -> int:
    """Unknown subcommand, bad flag value, missing argument"""
    error.show()
    logger.warning(f'Usage error: {error.format_message()}')
    return EXIT_VALIDATION


def handle_validation_error(error: ValidationError) -> int:
    click.echo(f'error: {error}', err=True)
    logger.warning(f'Validation error: {error}')
    return EXIT_VALIDATION


def handle_runtime_error(error: BaseException) -> int:
    click.echo(f'runtime failure: {error}', err=True)
    logger.error(f'Runtime failure: {error}', exc_info=True)
    return EXIT_RUNTIME


def register_error_handlers():
    """Return the ordered (exception type, handler) table used by the CLI runner"""
    return [
        (click.exceptions.UsageError, handle_usage_error),
        (ValidationError, handle_validation_error),
        (SteerGuardError, handle_runtime_error),
        (OSError, handle_runtime_error),
        (Exception, handle_runtime_error),
    ]
