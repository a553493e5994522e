"""
Functions for setting up, parsing and dispatching the lc-pnp command line
"""

import logging
import sys

from collections import namedtuple

import click
import rollbar

from lcpnp.exceptions import UsageError
from lcpnp.models.config import SECTION_KEYS, Config
from lcpnp.util import load_document, parse_override, project_root


CONFIG = Config()

ROLLBAR_STATE = {'active': False}


Command = namedtuple('Command', ['subcommand', 'params', 'options'])


def check_overrides(ctx, param, values):  # pylint:disable=unused-argument
    """ Click callback rejecting overrides of unknown config keys """
    for value in values:
        try:
            key, _ = parse_override(value)
        except UsageError as ex:
            raise click.BadParameter(str(ex))

        section, _, name = key.partition('.')
        known = key == 'threads' or name in SECTION_KEYS.get(section, ())
        if not known:
            raise click.BadParameter("Unknown config key '%s'" % key)

    return values


@click.group(name='lc-pnp', no_args_is_help=False)
@click.option('--verbose', '-v', is_flag=True, help="Debug logging")
@click.option('--settings', type=click.Path(dir_okay=False),
              help="YAML, or JSON application config")
@click.option('--set', 'overrides', multiple=True, callback=check_overrides,
              metavar='KEY=VALUE', help="Override a config value")
def CLI(verbose, settings, overrides):  # pylint:disable=invalid-name
    """ Linear-covariance loss toolkit for weighted PnP """


def app_init_commands():
    """ Register every subcommand on ``CLI`` """
    # pylint:disable=unused-variable
    import lcpnp.commands


def app_init_logging(verbose=False):
    """ Configure the root handler once; ``verbose`` turns on DEBUG """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def app_init_rollbar():
    """ Initialize Rollbar for error/exception reporting """
    if not CONFIG.rollbar_enabled:
        logging.getLogger('lcpnp.init').debug('No Rollbar settings found')
        return

    rollbar.init(
        CONFIG.rollbar_api_key,
        CONFIG.rollbar_environment,
        root=project_root().strpath,
        allow_logging_basic_config=False,
    )
    ROLLBAR_STATE['active'] = True


def app_init(verbose=False, settings=None, overrides=()):
    """
    Pre-run setup: logging, configuration from the settings document and
    overrides, error reporting. The configuration is rebuilt every time so
    each run depends only on its own flags
    """
    app_init_logging(verbose)
    logger = logging.getLogger('lcpnp.init')

    CONFIG.reset_defaults()
    if settings is not None:
        logger.info("Loading config from %s", settings)
        CONFIG.from_dict(load_document(settings))

    for override in overrides:
        CONFIG.set_override(*parse_override(override))

    CONFIG.validate()
    app_init_rollbar()


def report_exception(exception):
    """ Report to Rollbar when configured, skipping ``no_rollbar`` errors """
    if getattr(exception, 'no_rollbar', False):
        return

    if ROLLBAR_STATE['active']:
        rollbar.report_exc_info()


def parse_args(argv):
    """
    Parse a command line into a ``Command``. Usage problems raise
    ``UsageError``; ``--help`` raises ``click.exceptions.Exit``
    """
    app_init_commands()
    argv = list(argv)
    try:
        ctx = CLI.make_context('lc-pnp', argv)
        remaining = ctx.protected_args + ctx.args
        if not remaining:
            raise click.UsageError("Missing command", ctx)

        name, command, args = CLI.resolve_command(ctx, remaining)
        sub_ctx = command.make_context(name, args, parent=ctx)

    except click.exceptions.Exit:
        raise
    except click.ClickException as ex:
        raise UsageError(ex.format_message())

    return Command(name, dict(sub_ctx.params), dict(ctx.params))


def run(cmd):
    """ Dispatch a parsed ``Command``. Returns the process exit code """
    logger = logging.getLogger('lcpnp.cli')
    try:
        app_init(**cmd.options)
        logger.debug("Running %s", cmd.subcommand)
        CLI.commands[cmd.subcommand].callback(**cmd.params)

    except UsageError as ex:
        click.echo("Error: %s" % ex, err=True)
        return 2

    except click.ClickException as ex:
        click.echo("Error: %s" % ex.format_message(), err=True)
        return 1

    except click.exceptions.Exit as ex:
        return ex.exit_code

    except Exception as ex:  # pylint:disable=broad-except
        if getattr(ex, 'human_str', False) or isinstance(ex, ValueError):
            click.echo("Error: %s" % ex, err=True)
        else:
            logger.exception("Unexpected error in %s", cmd.subcommand)
            report_exception(ex)
            click.echo("Error: unexpected %s: %s" % (
                ex.__class__.__name__, ex,
            ), err=True)
        return 1

    return 0


def main(argv=None):
    """ Parse, and run. Returns the process exit code """
    if argv is None:
        argv = sys.argv[1:]

    try:
        cmd = parse_args(argv)
    except UsageError as ex:
        click.echo("Error: %s" % ex, err=True)
        return 2
    except click.exceptions.Exit as ex:
        return ex.exit_code

    return run(cmd)
