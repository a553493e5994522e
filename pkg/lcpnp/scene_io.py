"""
IO for the correspondence/scene interchange document
"""

from collections import namedtuple

import numpy as np

from lcpnp.exceptions import LcPnpError, ValidationError
from lcpnp.geometry import CameraIntrinsics, RigidPose
from lcpnp.pnp import MIN_POINTS, CorrespondenceSet
from lcpnp.util import load_document


SceneDocument = namedtuple('SceneDocument', ['corrs', 'y_gt', 'bbox'])


def _finite_list(value, length):
    """ Whether ``value`` is a list of ``length`` finite numbers """
    if not isinstance(value, (list, tuple)) or len(value) != length:
        return False
    try:
        return bool(np.all(np.isfinite(np.asarray(value, dtype=float))))
    except (TypeError, ValueError):
        return False


def validate_scene_dict(data):
    """
    Every schema problem in a scene document, as a list of messages. Empty
    when the document is valid
    """
    errors = []
    intrinsics = data.get('intrinsics')
    if not isinstance(intrinsics, dict) or \
            not all(key in intrinsics for key in ('fx', 'fy', 'cx', 'cy')):
        errors.append("intrinsics must have fx, fy, cx, cy")

    points = data.get('points')
    if not isinstance(points, list) or len(points) < MIN_POINTS:
        errors.append("points must be a list of at least %d entries" % (
            MIN_POINTS,
        ))
        points = []

    for index, point in enumerate(points):
        if not isinstance(point, dict):
            errors.append("points[%d] must be a mapping" % index)
            continue

        for key, length in (('x', 2), ('z', 3), ('w', 2)):
            if key not in point and key == 'w':
                continue
            if not _finite_list(point.get(key), length):
                errors.append("points[%d].%s must be %d finite numbers" % (
                    index, key, length,
                ))

    gt_pose = data.get('gt_pose')
    if gt_pose is not None:
        if not isinstance(gt_pose, dict) or \
                not _finite_list(gt_pose.get('rotation'), 9) or \
                not _finite_list(gt_pose.get('translation'), 3):
            errors.append("gt_pose needs a 9 value rotation, and a 3 value "
                          "translation")

    bbox = data.get('bbox')
    if bbox is not None:
        if not isinstance(bbox, list) or len(bbox) != 8 or \
                not all(_finite_list(corner, 3) for corner in bbox):
            errors.append("bbox must be 8 corners of 3 numbers")

    unknown = sorted(set(data) - {'intrinsics', 'points', 'gt_pose', 'bbox'})
    errors.extend("Unknown key '%s'" % key for key in unknown)
    return errors


def scene_from_dict(data):
    """ Build a ``SceneDocument``, validating the whole document first """
    if not isinstance(data, dict):
        raise ValidationError("Scene document must be a mapping")

    errors = validate_scene_dict(data)
    if errors:
        raise ValidationError(errors)

    try:
        intrinsics = CameraIntrinsics.from_dict(data['intrinsics'])
        points = data['points']
        corrs = CorrespondenceSet(
            [point['x'] for point in points],
            [point['z'] for point in points],
            [point.get('w', [1.0, 1.0]) for point in points],
            intrinsics,
        )
        y_gt = None
        if data.get('gt_pose') is not None:
            y_gt = RigidPose.from_dict(data['gt_pose'])

    except (LcPnpError, ValueError) as ex:
        raise ValidationError(str(ex))

    bbox = data.get('bbox')
    if bbox is not None:
        bbox = np.array(bbox, dtype=float)

    return SceneDocument(corrs, y_gt, bbox)


def scene_to_dict(corrs, y_gt=None, bbox=None):
    """ Interchange form of correspondences, with optional pose and box """
    data = {
        'intrinsics': corrs.intrinsics.as_dict(),
        'points': [
            {'x': x_i.tolist(), 'z': z_i.tolist(), 'w': w_i.tolist()}
            for x_i, z_i, w_i in zip(corrs.points2d,
                                     corrs.points3d,
                                     corrs.weights)
        ],
    }
    if y_gt is not None:
        data['gt_pose'] = y_gt.as_dict()
    if bbox is not None:
        data['bbox'] = np.asarray(bbox, dtype=float).tolist()

    return data


def read_scene(path):
    """ Load, and validate a scene document """
    return scene_from_dict(load_document(path))
