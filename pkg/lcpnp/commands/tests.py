""" Commands for running unit/style/static tests """
import click

from lcpnp.cli import CLI
from lcpnp.util import project_root


def source_dirs():
    """ Package, and test directories checked by the style tools """
    root_path = project_root()
    return root_path.join('lcpnp'), root_path.join('tests')


def call_seq(*commands):
    """
    Call commands in sequence, returning the first non-zero result

    Examples:

    >>> call_seq(lambda: None, lambda: 0)
    0
    >>> call_seq(lambda: 0, lambda: 3, lambda: 1 / 0)
    3
    """
    for cmd in commands:
        result = cmd()
        if result:
            return result

    return 0


def exit_with(result):
    """ Raise a click exit for a non-zero result """
    if result:
        raise click.exceptions.Exit(int(result))


def run_pytest(*args):
    """ Run pytest with the project's ini file, and the given paths """
    import pytest

    ini_file = project_root().join('pytest.ini')
    return int(pytest.main(['-c', ini_file.strpath, '-vvrxs'] + list(args)))


def run_unittest():
    """ Run unit tests """
    _, tests_dir = source_dirs()
    return run_pytest(tests_dir.strpath)


def run_doctest():
    """ Run doc tests in the package modules """
    code_dir, _ = source_dirs()
    return run_pytest('--doctest-modules', code_dir.strpath)


def run_pep8():
    """ Style tests with PEP8, on the package and its tests """
    from pep8 import StyleGuide

    pep8style = StyleGuide(parse_argv=False, max_line_length=79)
    report = pep8style.check_files([path.strpath for path in source_dirs()])

    return 1 if report.total_errors else 0


def run_pylint():
    """ Static checks of the package with pylint, in this process """
    from pylint.lint import Run

    code_dir, _ = source_dirs()
    rc_file = project_root().join('pylint.conf')
    result = Run(['--rcfile', rc_file.strpath, code_dir.strpath], exit=False)

    return 1 if result.linter.msg_status else 0


def run_styletest():
    """ Run style tests """
    return call_seq(run_pep8, run_pylint)


@CLI.command()
def unittest():
    """ Run unit tests """
    exit_with(run_unittest())


@CLI.command()
def doctest():
    """ Run doc tests """
    exit_with(run_doctest())


@CLI.command()
def pep8():
    """ Style tests with PEP8 """
    exit_with(run_pep8())


@CLI.command()
def pylint():
    """ Style tests with pylint """
    exit_with(run_pylint())


@CLI.command()
def styletest():
    """ Run style tests """
    exit_with(run_styletest())


@CLI.command()
def ci():  # pylint:disable=invalid-name
    """ Run all tests """
    exit_with(call_seq(run_styletest, run_unittest, run_doctest))
