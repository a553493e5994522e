"""
Generic lcpnp utils
"""
import json

import py.path  # pylint:disable=import-error
import yaml

from lcpnp.exceptions import UsageError, ValidationError


def str2bool(value):
    """
    Convert a string to a boolean, accounting for english-like terms

    Examples:

    >>> str2bool('Yes'), str2bool('0'), str2bool('nope')
    (True, False, False)
    """
    if isinstance(value, bool):
        return value

    value = value.lower()

    try:
        return bool(int(value))
    except ValueError:
        pass

    return value in ('yes', 'true', 'y', 't')


def guess_multi_value(value):
    """
    Make the best kind of list from `value`. If it's already a list, or tuple,
    do nothing. If it's a value with commas, or new lines, split. Otherwise
    wrap in a list

    Examples:

    >>> guess_multi_value('0.5, 1.5')
    ['0.5', '1.5']
    """
    if isinstance(value, (tuple, list)):
        return list(value)

    if isinstance(value, str):
        for separator in ('\n', ','):
            if separator in value:
                return [part.strip() for part in value.split(separator)
                        if part.strip()]

    return [value]


def float_list(value):
    """ Input transform for lists of floats """
    return [float(part) for part in guess_multi_value(value)]


def optional_float(value):
    """ Input transform for a float that may be unset """
    if value is None or (isinstance(value, str) and
                         value.lower() in ('', 'none', 'null')):
        return None
    return float(value)


def parse_override(text):
    """
    Split a ``key=value`` override

    Examples:

    >>> parse_override('solver.max_iters=20')
    ('solver.max_iters', '20')
    """
    key, sep, value = text.partition('=')
    if not sep or not key.strip():
        raise UsageError("Override '%s' is not of the form key=value" % text)

    return key.strip(), value.strip()


def load_document(path):
    """
    Load a JSON, or YAML mapping document. JSON is a subset of YAML, so one
    loader reads both
    """
    path = py.path.local(path)
    try:
        with path.open() as handle:
            data = yaml.safe_load(handle)
    except OSError as ex:
        raise ValidationError("Can not read '%s': %s" % (path, ex))
    except yaml.YAMLError as ex:
        raise ValidationError("Can not parse '%s': %s" % (path, ex))

    if not isinstance(data, dict):
        raise ValidationError("'%s' must hold a mapping" % path)

    return data


def write_atomic(path, content):
    """
    Write text to ``path`` through a temporary sibling, renamed into place
    once complete
    """
    path = py.path.local(path)
    temp_path = path.new(basename='.%s.tmp' % path.basename)
    try:
        temp_path.write(content, ensure=True)
        temp_path.rename(path)

    finally:
        if temp_path.check():
            temp_path.remove()

    return path


def dumps_json(data):
    """ Stable JSON text for output documents """
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def project_root():
    """ Get the lcpnp project root """
    return py.path.local(__file__).dirpath().join('..')


def data_path(name):
    """ Path of a file bundled in ``lcpnp/data`` """
    return py.path.local(__file__).dirpath().join('data', name)
