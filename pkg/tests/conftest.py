import numpy as np
import pytest

from lcpnp.harness.scene import SceneConfig, gen_scene
from lcpnp.scene_io import read_scene
from lcpnp.util import data_path


def central_difference(func, point, eps):
    """
    Central differences of ``func`` around ``point``, one column per input
    coordinate. ``func`` may return a scalar, or an array
    """
    point = np.asarray(point, dtype=float)
    columns = []
    for index in range(point.size):
        step = np.zeros_like(point)
        step.flat[index] = eps
        columns.append((np.asarray(func(point + step)) -
                        np.asarray(func(point - step))) / (2 * eps))

    return np.stack(columns, axis=-1)


@pytest.fixture
def fd():
    """ The ``central_difference`` helper """
    return central_difference


@pytest.fixture
def rng():
    """ Seeded generator for test inputs """
    return np.random.default_rng(1234)


@pytest.fixture
def scene_config():
    """ Small noisy scene settings """
    return SceneConfig(n_points=12, noise_px=1.0, seed=7)


@pytest.fixture
def scene(scene_config):
    """ Small noisy scene """
    return gen_scene(scene_config)


@pytest.fixture
def clean_scene(scene_config):
    """ Small noise-free scene """
    return gen_scene(scene_config.replace(noise_px=0.0))


@pytest.fixture
def sample_scene_path():
    """ Path of the bundled noise-free scene document """
    return data_path('sample_scene.json')


@pytest.fixture
def sample_scene(sample_scene_path):
    """ The bundled noise-free scene document """
    return read_scene(sample_scene_path)
