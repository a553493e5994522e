"""
Application configuration models
"""

import os

from yaml_model import LoadOnAccess, SingletonModel

from lcpnp.exceptions import PreconditionError, ValidationError
from lcpnp.harness.train import ClipConfig, TrainConfig
from lcpnp.loss import LossTerm
from lcpnp.pnp import RansacParams, SolverConfig
from lcpnp.util import guess_multi_value, optional_float, str2bool


def default_threads():
    """
    Worker count from ``LC_PNP_THREADS``, or the hardware thread count when it
    is unset
    """
    try:
        return int(os.environ['LC_PNP_THREADS'])
    except KeyError:
        return os.cpu_count() or 1


def default_rollbar_api_key():
    """ Rollbar key from the environment; ``None`` disables reporting """
    return os.environ.get('ROLLBAR_API_KEY') or None


def default_rollbar_environment():
    """ Rollbar environment name """
    return os.environ.get('ROLLBAR_ENVIRONMENT', 'production')


def loss_term_list(value):
    """ Tuple of ``LossTerm`` from a comma separated string, or a list """
    return tuple(LossTerm(name) for name in guess_multi_value(value))


# Dotted override key -> input transform
SECTION_KEYS = {
    'solver': {
        'max_iters': int,
        'step_tol': float,
        'grad_tol': float,
        'damping_init': float,
        'huber_delta': optional_float,
        'raise_on_max_iters': str2bool,
    },
    'ransac': {
        'iters': int,
        'inlier_px': float,
        'min_set': int,
        'seed': int,
        'confidence': float,
    },
    'train': {
        'steps': int,
        'lr': float,
        'clip_factor': float,
        'clip_window': int,
        'beta': float,
        'w_min': float,
        'representation': str,
        'distribution': str,
        'terms': loss_term_list,
        'detach_residuals': str2bool,
        'detach_weights': str2bool,
    },
}

# Setting name -> fresh default value
DEFAULTS = {
    'threads': default_threads,
    'rollbar_api_key': default_rollbar_api_key,
    'rollbar_environment': default_rollbar_environment,
    'solver': dict,
    'ransac': dict,
    'train': dict,
}


class Config(SingletonModel):  # pylint:disable=too-few-public-methods
    """
    Global application configuration
    """
    threads = LoadOnAccess(default=lambda _: default_threads(),
                           input_transform=int)

    rollbar_api_key = LoadOnAccess(
        default=lambda _: default_rollbar_api_key(),
    )
    rollbar_environment = LoadOnAccess(
        default=lambda _: default_rollbar_environment(),
    )

    solver = LoadOnAccess(default=lambda _: {}, input_transform=dict)
    ransac = LoadOnAccess(default=lambda _: {}, input_transform=dict)
    train = LoadOnAccess(default=lambda _: {}, input_transform=dict)

    @property
    def rollbar_enabled(self):
        """ Whether error reporting has been configured """
        return bool(self.rollbar_api_key)

    def reset_defaults(self):
        """
        Put every setting back to its default, re-reading the environment
        """
        for name, default in DEFAULTS.items():
            try:
                setattr(self, name, default())
            except ValueError:
                raise ValidationError("LC_PNP_THREADS must be an integer")

    def set_override(self, key, raw_value):
        """
        Apply a dotted ``section.name`` override, or a top-level one such as
        ``threads``. The value is coerced with the key's input transform
        """
        section, _, name = key.partition('.')
        if not name:
            if section != 'threads':
                raise ValidationError("Unknown config key '%s'" % key)
            try:
                self.threads = raw_value
            except (TypeError, ValueError):
                raise ValidationError("threads must be an integer")
            return

        try:
            transform = SECTION_KEYS[section][name]
        except KeyError:
            raise ValidationError("Unknown config key '%s'" % key)

        try:
            value = transform(raw_value)
        except (TypeError, ValueError):
            raise ValidationError("Invalid value '%s' for '%s'" % (raw_value,
                                                                   key))

        values = dict(getattr(self, section))
        values[name] = value
        setattr(self, section, values)

    def from_dict(self, data, dirty=True):  # pylint:disable=unused-argument
        """ Apply every key of a nested config document """
        for section, value in data.items():
            if isinstance(value, dict):
                for name, raw_value in value.items():
                    self.set_override('%s.%s' % (section, name), raw_value)
            else:
                self.set_override(section, value)

    def solver_config(self):
        """ ``SolverConfig`` from the solver section """
        return SolverConfig(**self.solver)

    def ransac_params(self):
        """ ``RansacParams`` from the ransac section """
        return RansacParams(**self.ransac)

    def train_config(self):
        """ ``TrainConfig`` from the train section """
        values = dict(self.train)
        clip = ClipConfig(factor=values.pop('clip_factor', 10.0),
                          window=values.pop('clip_window', 100))
        return TrainConfig(clip=clip, **values)

    def validate(self):
        """ Raise ``ValidationError`` with every problem found """
        errors = []
        try:
            if self.threads < 1:
                errors.append("threads must be at least 1")
        except ValueError:
            errors.append("threads must be an integer")

        for name, build in (('solver', self.solver_config),
                            ('ransac', self.ransac_params),
                            ('train', self.train_config)):
            try:
                build()
            except ValidationError as ex:
                errors.extend("%s: %s" % (name, message)
                              for message in ex.messages)
            except (PreconditionError, ValueError) as ex:
                errors.append("%s: %s" % (name, ex))

        if errors:
            raise ValidationError(errors)

        return True
