"""
Seeded synthetic scenes: points in a box, a pose in the camera frustum, noisy
projections and displaced outliers
"""

from collections import namedtuple

import numpy as np

from scipy.spatial.transform import Rotation

from lcpnp.exceptions import FrustumFailureError, ValidationError
from lcpnp.geometry import (DEPTH_EPS,
                            CameraIntrinsics,
                            RigidPose,
                            bbox_corners,
                            exp_so3,
                            project_points,
                            )
from lcpnp.pnp import MIN_POINTS, CorrespondenceSet


MAX_ATTEMPTS = 1000
OUTLIER_RANGE_PX = (20.0, 100.0)

DEFAULT_INTRINSICS = CameraIntrinsics(572.4114, 573.57043, 325.2611, 242.04899)


SceneSample = namedtuple('SceneSample', [
    'corrs', 'y_gt', 'bbox', 'model_points', 'outlier_mask',
])


class SceneConfig(object):
    """ Parameters of a synthetic scene """

    FIELDS = ('n_points', 'bbox_half_extents', 'intrinsics', 'noise_px',
              'outlier_frac', 'depth_range', 'seed')

    def __init__(self,
                 n_points=64,
                 bbox_half_extents=(0.05, 0.04, 0.03),
                 intrinsics=DEFAULT_INTRINSICS,
                 noise_px=1.0,
                 outlier_frac=0.0,
                 depth_range=(0.6, 1.2),
                 seed=0,
                 ):
        self.n_points = n_points
        self.bbox_half_extents = tuple(float(val)
                                       for val in bbox_half_extents)
        self.intrinsics = intrinsics
        self.noise_px = float(noise_px)
        self.outlier_frac = float(outlier_frac)
        self.depth_range = tuple(float(val) for val in depth_range)
        self.seed = int(seed)

        self.validate()

    def validate(self):
        """ Raise ``ValidationError`` listing every invalid field """
        errors = []
        if self.n_points < MIN_POINTS:
            errors.append("n_points must be at least %d" % MIN_POINTS)
        if len(self.bbox_half_extents) != 3 or \
                any(val <= 0 for val in self.bbox_half_extents):
            errors.append("bbox_half_extents must be 3 positive values")
        if self.noise_px < 0:
            errors.append("noise_px must be non-negative")
        if not 0 <= self.outlier_frac < 1:
            errors.append("outlier_frac must be in [0, 1)")
        if len(self.depth_range) != 2 or \
                not 0 < self.depth_range[0] <= self.depth_range[1]:
            errors.append("depth_range must be an increasing positive pair")
        if not 0 <= self.seed < 2 ** 64:
            errors.append("seed must be an unsigned 64-bit integer")

        if errors:
            raise ValidationError(errors)

        return True

    def replace(self, **kwargs):
        """ Copy with some fields changed """
        values = {name: getattr(self, name) for name in self.FIELDS}
        values.update(kwargs)
        return SceneConfig(**values)

    def as_dict(self):
        """ Document form """
        values = {name: getattr(self, name) for name in self.FIELDS}
        values['intrinsics'] = self.intrinsics.as_dict()
        values['bbox_half_extents'] = list(self.bbox_half_extents)
        values['depth_range'] = list(self.depth_range)
        return values

    @classmethod
    def from_dict(cls, data):
        """ Build from a document, rejecting unknown keys """
        if not isinstance(data, dict):
            raise ValidationError("Scene config must be a mapping")

        unknown = sorted(set(data) - set(cls.FIELDS))
        if unknown:
            raise ValidationError(["Unknown scene config key '%s'" % key
                                   for key in unknown])

        values = dict(data)
        if 'intrinsics' in values:
            try:
                values['intrinsics'] = CameraIntrinsics.from_dict(
                    values['intrinsics']
                )
            except (KeyError, TypeError, ValueError):
                raise ValidationError("intrinsics needs fx, fy, cx, cy")

        try:
            return cls(**values)
        except (TypeError, ValueError) as ex:
            raise ValidationError(str(ex))


def _sample_pose(cfg, rng, points):
    """ Rejection-sample a pose with the box centre inside the frustum """
    intrinsics = cfg.intrinsics
    width, height = 2 * intrinsics.cx, 2 * intrinsics.cy
    for _ in range(MAX_ATTEMPTS):
        rotation = Rotation.random(random_state=rng).as_matrix()
        depth = rng.uniform(*cfg.depth_range)
        pixel = rng.uniform([0.0, 0.0], [width, height])
        centre = np.array([(pixel[0] - intrinsics.cx) / intrinsics.fx * depth,
                           (pixel[1] - intrinsics.cy) / intrinsics.fy * depth,
                           depth])
        pose = RigidPose(rotation, centre, check=False)
        if np.all(pose.transform(points)[:, 2] > DEPTH_EPS):
            return pose

    raise FrustumFailureError(MAX_ATTEMPTS)


def gen_scene(cfg):
    """ Deterministic in ``cfg.seed``; weights start at 1 """
    rng = np.random.default_rng(cfg.seed)
    half = np.array(cfg.bbox_half_extents)
    bbox = bbox_corners(-half, half)

    points = rng.uniform(-half, half, size=(cfg.n_points, 3))
    y_gt = _sample_pose(cfg, rng, np.vstack([points, bbox]))

    perfect = project_points(points, y_gt, cfg.intrinsics).uv
    observed = perfect + rng.normal(0.0, cfg.noise_px, size=perfect.shape)

    outlier_mask = np.zeros(cfg.n_points, dtype=bool)
    n_outliers = int(round(cfg.outlier_frac * cfg.n_points))
    if n_outliers:
        chosen = rng.choice(cfg.n_points, size=n_outliers, replace=False)
        lengths = rng.uniform(*OUTLIER_RANGE_PX, size=n_outliers)
        angles = rng.uniform(0.0, 2 * np.pi, size=n_outliers)
        observed[chosen] += lengths[:, None] * np.stack([np.cos(angles),
                                                         np.sin(angles)],
                                                        axis=1)
        outlier_mask[chosen] = True

    corrs = CorrespondenceSet.from_arrays(observed, points, cfg.intrinsics)
    return SceneSample(corrs, y_gt, bbox, points, outlier_mask)


def perturb_pose(pose, rng, angle_deg=5.0, trans_frac=0.05):
    """
    Rotate about a random axis by ``angle_deg`` and move the translation by
    ``trans_frac`` of its length in a random direction
    """
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)

    rotation = exp_so3(np.radians(angle_deg) * axis) @ pose.rotation
    offset = trans_frac * np.linalg.norm(pose.translation) * direction
    return RigidPose(rotation, pose.translation + offset, check=False)
