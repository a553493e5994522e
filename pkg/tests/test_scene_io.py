import json

import numpy as np
import pytest

from lcpnp.exceptions import ValidationError
from lcpnp.scene_io import (read_scene,
                            scene_from_dict,
                            scene_to_dict,
                            validate_scene_dict,
                            )


def minimal_scene():
    """ Smallest valid scene document """
    return {
        'intrinsics': {'fx': 500, 'fy': 500, 'cx': 320, 'cy': 240},
        'points': [
            {'x': [320.0 + index, 240.0], 'z': [0.01 * index, 0.0, 0.0]}
            for index in range(4)
        ],
    }


class TestValidateSceneDict(object):
    """ Tests for ``validate_scene_dict`` """
    def test_valid(self):
        """ Minimal documents have no problems """
        assert validate_scene_dict(minimal_scene()) == []

    @pytest.mark.parametrize('change,expected', [
        (lambda doc: doc.pop('intrinsics'),
         ["intrinsics must have fx, fy, cx, cy"]),
        (lambda doc: doc['intrinsics'].pop('cy'),
         ["intrinsics must have fx, fy, cx, cy"]),
        (lambda doc: doc['points'].pop(),
         ["points must be a list of at least 4 entries"]),
        (lambda doc: doc['points'][1].update(x=[1.0]),
         ["points[1].x must be 2 finite numbers"]),
        (lambda doc: doc['points'][2].update(z=[0.0, 'a', 1.0]),
         ["points[2].z must be 3 finite numbers"]),
        (lambda doc: doc['points'][0].update(w=[1.0, float('nan')]),
         ["points[0].w must be 2 finite numbers"]),
        (lambda doc: doc['points'].__setitem__(3, [1, 2]),
         ["points[3] must be a mapping"]),
        (lambda doc: doc.update(gt_pose={'rotation': [1.0] * 9}),
         ["gt_pose needs a 9 value rotation, and a 3 value translation"]),
        (lambda doc: doc.update(bbox=[[0.0, 0.0, 0.0]] * 7),
         ["bbox must be 8 corners of 3 numbers"]),
        (lambda doc: doc.update(colour='red'),
         ["Unknown key 'colour'"]),
    ])
    def test_errors(self, change, expected):
        """ Each schema problem has its own message """
        data = minimal_scene()
        change(data)
        assert validate_scene_dict(data) == expected

    def test_collects_all(self):
        """ Every problem is reported, not just the first """
        data = minimal_scene()
        data.pop('intrinsics')
        data['colour'] = 'red'
        assert len(validate_scene_dict(data)) == 2


class TestSceneFromDict(object):
    """ Tests for ``scene_from_dict`` """
    def test_default_weights(self):
        """ Missing weights default to 1 """
        document = scene_from_dict(minimal_scene())
        assert np.all(document.corrs.w == 1)
        assert document.y_gt is None
        assert document.bbox is None

    def test_not_mapping(self):
        """ Documents must be mappings """
        with pytest.raises(ValidationError):
            scene_from_dict([1, 2, 3])

    def test_invalid(self):
        """ Schema problems raise with every message """
        data = minimal_scene()
        data['colour'] = 'red'
        data['points'][0]['x'] = [1.0]
        with pytest.raises(ValidationError) as ex:
            scene_from_dict(data)

        assert len(ex.value.messages) == 2

    @pytest.mark.parametrize('change', [
        lambda doc: doc['intrinsics'].update(fx=0),
        lambda doc: doc.update(gt_pose={'rotation': [2.0] * 9,
                                        'translation': [0.0, 0.0, 1.0]}),
        lambda doc: doc['points'][0].update(w=[-1.0, 1.0]),
    ])
    def test_invalid_values(self, change):
        """ Well formed documents with impossible values """
        data = minimal_scene()
        change(data)
        with pytest.raises(ValidationError):
            scene_from_dict(data)

    def test_round_trip(self, scene):
        """ Correspondences, pose, and box survive the interchange form """
        data = scene_to_dict(scene.corrs, scene.y_gt, scene.bbox)
        document = scene_from_dict(json.loads(json.dumps(data)))

        assert np.array_equal(document.corrs.x, scene.corrs.x)
        assert np.array_equal(document.corrs.z, scene.corrs.z)
        assert np.array_equal(document.corrs.w, scene.corrs.w)
        assert document.corrs.intrinsics == scene.corrs.intrinsics
        assert np.array_equal(document.y_gt.rotation, scene.y_gt.rotation)
        assert np.array_equal(document.bbox, scene.bbox)

    def test_optional_keys(self, scene):
        """ Pose, and box are omitted when unset """
        assert set(scene_to_dict(scene.corrs)) == {'intrinsics', 'points'}


class TestReadScene(object):
    """ Tests for ``read_scene`` """
    def test_sample(self, sample_scene):
        """ Bundled scene has a pose, and a box """
        assert sample_scene.corrs.n >= 4
        assert sample_scene.y_gt is not None
        assert sample_scene.bbox.shape == (8, 3)

    def test_yaml(self, tmpdir):
        """ YAML documents load the same way """
        path = tmpdir.join('scene.yaml')
        path.write(json.dumps(minimal_scene()))
        assert read_scene(path).corrs.n == 4
