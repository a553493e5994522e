import numpy as np
import pytest

from lcpnp.exceptions import ValidationError
from lcpnp.geometry import project_points
from lcpnp.harness.scene import (OUTLIER_RANGE_PX,
                                 SceneConfig,
                                 gen_scene,
                                 perturb_pose,
                                 )


class TestSceneConfig(object):
    """ Tests for ``SceneConfig`` """
    def test_invalid_collects_all(self):
        """ Every invalid field is reported at once """
        with pytest.raises(ValidationError) as ex:
            SceneConfig(n_points=3, noise_px=-1.0, outlier_frac=1.0)

        assert len(ex.value.messages) == 3

    @pytest.mark.parametrize('kwargs', [
        {'bbox_half_extents': (0.1, 0.0, 0.1)},
        {'depth_range': (1.0, 0.5)},
        {'depth_range': (0.0, 1.0)},
        {'seed': -1},
    ])
    def test_invalid(self, kwargs):
        """ Extents, depths, and seeds are checked """
        with pytest.raises(ValidationError):
            SceneConfig(**kwargs)

    def test_dict_round_trip(self):
        """ Document form rebuilds the same settings """
        cfg = SceneConfig(n_points=20, noise_px=0.5, seed=9)
        rebuilt = SceneConfig.from_dict(cfg.as_dict())
        assert rebuilt.as_dict() == cfg.as_dict()

    def test_from_dict_unknown(self):
        """ Unknown keys are rejected """
        with pytest.raises(ValidationError) as ex:
            SceneConfig.from_dict({'n_points': 10, 'colour': 'red'})

        assert "colour" in str(ex.value)

    def test_from_dict_bad_intrinsics(self):
        """ Intrinsics need every field """
        with pytest.raises(ValidationError):
            SceneConfig.from_dict({'intrinsics': {'fx': 1}})

    def test_replace(self):
        """ Copies with changed fields """
        cfg = SceneConfig(seed=1)
        other = cfg.replace(seed=2)
        assert (cfg.seed, other.seed) == (1, 2)
        assert other.n_points == cfg.n_points


class TestGenScene(object):
    """ Tests for ``gen_scene`` """
    def test_deterministic(self, scene_config):
        """ Same settings, same scene """
        first, second = gen_scene(scene_config), gen_scene(scene_config)
        assert np.array_equal(first.corrs.x, second.corrs.x)
        assert np.array_equal(first.corrs.z, second.corrs.z)
        assert np.array_equal(first.y_gt.rotation, second.y_gt.rotation)

    def test_seed_changes_scene(self, scene_config):
        """ Different seeds, different scenes """
        first = gen_scene(scene_config)
        second = gen_scene(scene_config.replace(seed=scene_config.seed + 1))
        assert not np.array_equal(first.corrs.x, second.corrs.x)

    @pytest.mark.parametrize('seed', range(5))
    def test_geometry(self, seed):
        """ Points inside the box; points, and corners in front """
        cfg = SceneConfig(n_points=30, seed=seed)
        scene = gen_scene(cfg)
        half = np.array(cfg.bbox_half_extents)

        assert np.all(np.abs(scene.model_points) <= half)
        assert np.all(scene.y_gt.transform(scene.model_points)[:, 2] > 0)
        assert np.all(scene.y_gt.transform(scene.bbox)[:, 2] > 0)
        assert np.all(scene.corrs.w == 1)

    def test_noise_free(self, clean_scene):
        """ Without noise the locations are the projections """
        perfect = project_points(clean_scene.corrs.points3d,
                                 clean_scene.y_gt,
                                 clean_scene.corrs.intrinsics).uv
        assert np.allclose(clean_scene.corrs.points2d, perfect, atol=1e-9)

    def test_outliers(self):
        """ Outliers are displaced by a bounded length """
        cfg = SceneConfig(n_points=40, noise_px=0.0, outlier_frac=0.25,
                          seed=4)
        scene = gen_scene(cfg)
        perfect = project_points(scene.corrs.points3d,
                                 scene.y_gt,
                                 scene.corrs.intrinsics).uv
        offsets = np.linalg.norm(scene.corrs.points2d - perfect, axis=1)

        assert scene.outlier_mask.sum() == 10
        assert np.all(offsets[scene.outlier_mask] >=
                      OUTLIER_RANGE_PX[0] - 1e-9)
        assert np.all(offsets[scene.outlier_mask] <=
                      OUTLIER_RANGE_PX[1] + 1e-9)
        assert np.allclose(offsets[~scene.outlier_mask], 0, atol=1e-9)


class TestPerturbPose(object):
    """ Tests for ``perturb_pose`` """
    def test_magnitudes(self, scene):
        """ Fixed angle, and relative translation offset """
        pose = perturb_pose(scene.y_gt, np.random.default_rng(0),
                            angle_deg=5.0, trans_frac=0.05)
        assert pose.rotation_error_deg(scene.y_gt) == pytest.approx(5.0)
        assert pose.translation_error(scene.y_gt) == pytest.approx(
            0.05 * np.linalg.norm(scene.y_gt.translation),
        )
