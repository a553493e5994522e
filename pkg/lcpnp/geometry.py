"""
Camera model, rigid transforms, SO(3) calculus and pose representations.

Poses are perturbed in a left-multiplicative chart: a ``LocalPose6`` with
increment ``(omega, tau)`` on a reference ``(R, t)`` is the pose
``(exp([omega]x) R, t + tau)``. Every Jacobian in the package is taken with
respect to that stacked 6-vector, rotation part first.
"""

from collections import namedtuple
from enum import Enum

import numpy as np

from scipy.spatial.transform import Rotation

from lcpnp.exceptions import (MissingBBoxError,
                              NearPiRotationError,
                              NonPositiveDepthError,
                              PreconditionError,
                              )


DEPTH_EPS = 1e-6
LOG_PI_MARGIN = 1e-6
ORTHONORMAL_TOL = 1e-9
SMALL_ANGLE = 1e-6


ProjectionResult = namedtuple('ProjectionResult', ['uv', 'J_pose', 'J_point'])
RepresentationResult = namedtuple('RepresentationResult', ['values', 'jac'])


def skew(vec):
    """
    Skew-symmetric cross product matrix

    Examples:

    >>> skew([1, 2, 3]).tolist()
    [[0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]]
    """
    x, y, z = np.asarray(vec, dtype=float)
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def skew_stack(vecs):
    """ Skew matrices for an (N, 3) array of vectors, shape (N, 3, 3) """
    vecs = np.asarray(vecs, dtype=float)
    out = np.zeros(vecs.shape[:-1] + (3, 3))
    out[..., 0, 1] = -vecs[..., 2]
    out[..., 0, 2] = vecs[..., 1]
    out[..., 1, 0] = vecs[..., 2]
    out[..., 1, 2] = -vecs[..., 0]
    out[..., 2, 0] = -vecs[..., 1]
    out[..., 2, 1] = vecs[..., 0]
    return out


def exp_so3(omega):
    """ Rotation matrix of an axis-angle vector """
    omega = np.asarray(omega, dtype=float).reshape(3)
    return Rotation.from_rotvec(omega).as_matrix()


def rotation_angle(rotation):
    """ Angle of a rotation matrix, in radians """
    return float(Rotation.from_matrix(rotation).magnitude())


def log_so3(rotation):
    """
    Axis-angle vector of a rotation matrix. Raises ``NearPiRotationError``
    when the angle is within ``LOG_PI_MARGIN`` of pi, where the log stops
    being unique
    """
    rotation = np.asarray(rotation, dtype=float)
    angle = rotation_angle(rotation)
    if angle >= np.pi - LOG_PI_MARGIN:
        raise NearPiRotationError(angle)

    return Rotation.from_matrix(rotation).as_rotvec()


def left_jacobian_so3(phi):
    """
    Left Jacobian of SO(3): ``exp(phi + d) ~= exp(J d) exp(phi)``
    """
    phi = np.asarray(phi, dtype=float).reshape(3)
    theta = np.linalg.norm(phi)
    phi_x = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * phi_x + phi_x @ phi_x / 6.0

    return (
        np.eye(3) +
        (1.0 - np.cos(theta)) / theta ** 2 * phi_x +
        (theta - np.sin(theta)) / theta ** 3 * phi_x @ phi_x
    )


def left_jacobian_so3_inv(phi):
    """ Inverse of ``left_jacobian_so3`` in closed form """
    phi = np.asarray(phi, dtype=float).reshape(3)
    theta = np.linalg.norm(phi)
    phi_x = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * phi_x + phi_x @ phi_x / 12.0

    coeff = (
        1.0 / theta ** 2 -
        (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    )
    return np.eye(3) - 0.5 * phi_x + coeff * phi_x @ phi_x


class CameraIntrinsics(object):
    """ Pinhole intrinsics, in pixels """

    def __init__(self, fx, fy, cx, cy):
        if not fx > 0 or not fy > 0:
            raise PreconditionError(
                "Focal lengths must be positive, got (%s, %s)" % (fx, fy)
            )

        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)

    @property
    def matrix(self):
        """ The 3x3 calibration matrix """
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def as_dict(self):
        """ Interchange form """
        return {'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy}

    @classmethod
    def from_dict(cls, data):
        """ Build from the interchange form """
        return cls(data['fx'], data['fy'], data['cx'], data['cy'])

    def __eq__(self, other):
        return (
            isinstance(other, CameraIntrinsics) and
            self.as_dict() == other.as_dict()
        )

    def __repr__(self):
        return 'CameraIntrinsics(fx=%r, fy=%r, cx=%r, cy=%r)' % (
            self.fx, self.fy, self.cx, self.cy,
        )


class RigidPose(object):
    """ Object-to-camera rotation, and translation """

    def __init__(self, rotation, translation, check=True):
        rotation = np.array(rotation, dtype=float).reshape(3, 3)
        translation = np.array(translation, dtype=float).reshape(3)

        if check:
            error = np.linalg.norm(rotation.T @ rotation - np.eye(3))
            if error >= ORTHONORMAL_TOL or np.linalg.det(rotation) <= 0:
                raise PreconditionError(
                    "Rotation is not orthonormal with determinant +1 "
                    "(error %.3g)" % error
                )

        self.rotation = rotation
        self.translation = translation

    @classmethod
    def identity(cls):
        """ The identity pose """
        return cls(np.eye(3), np.zeros(3), check=False)

    def compose_local(self, omega, tau):
        """ The pose of the local increment ``(omega, tau)`` on this pose """
        return RigidPose(exp_so3(omega) @ self.rotation,
                         self.translation + np.asarray(tau, dtype=float),
                         check=False)

    def local_delta(self, other):
        """
        The increment ``(omega, tau)`` taking this pose to ``other``, as a
        6-vector
        """
        omega = log_so3(other.rotation @ self.rotation.T)
        return np.concatenate([omega, other.translation - self.translation])

    def transform(self, points):
        """ Apply the pose to an (N, 3) array of points """
        return np.asarray(points, dtype=float) @ self.rotation.T + \
            self.translation

    def rotation_error_deg(self, other):
        """ Geodesic angle between the two rotations, in degrees """
        return np.degrees(rotation_angle(self.rotation.T @ other.rotation))

    def translation_error(self, other):
        """ Distance between the two translations """
        return float(np.linalg.norm(self.translation - other.translation))

    def as_dict(self):
        """ Interchange form; rotation is row-major """
        return {
            'rotation': self.rotation.ravel().tolist(),
            'translation': self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        """ Build from the interchange form """
        return cls(np.reshape(data['rotation'], (3, 3)), data['translation'])

    def __repr__(self):
        return 'RigidPose(rotation=%r, translation=%r)' % (
            self.rotation.tolist(), self.translation.tolist(),
        )


class LocalPose6(object):
    """ A 6D increment anchored at a reference pose """

    def __init__(self, omega, tau, reference):
        self.omega = np.array(omega, dtype=float).reshape(3)
        self.tau = np.array(tau, dtype=float).reshape(3)
        self.reference = reference

    @classmethod
    def from_vector(cls, vector, reference):
        """ Split a stacked ``(omega, tau)`` vector """
        vector = np.asarray(vector, dtype=float).reshape(6)
        return cls(vector[:3], vector[3:], reference)

    @classmethod
    def zero(cls, reference):
        """ The zero increment, which is the reference pose itself """
        return cls(np.zeros(3), np.zeros(3), reference)

    @property
    def vector(self):
        """ Stacked ``(omega, tau)`` """
        return np.concatenate([self.omega, self.tau])

    def pose(self):
        """ Materialize the pose """
        return self.reference.compose_local(self.omega, self.tau)


def project_points(points, pose, intrinsics):
    """
    Project an (N, 3) array of object points. Returns the (N, 2) pixel
    locations, the (N, 2, 6) Jacobians w.r.t. the local increment at
    ``pose``, and the (N, 2, 3) Jacobians w.r.t. the object points
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    rotated = points @ pose.rotation.T
    cam = rotated + pose.translation
    depth = cam[:, 2]

    bad = np.flatnonzero(depth <= DEPTH_EPS)
    if bad.size:
        raise NonPositiveDepthError(float(depth[bad[0]]), int(bad[0]))

    inv_z = 1.0 / depth
    fx, fy = intrinsics.fx, intrinsics.fy
    uv = np.stack([fx * cam[:, 0] * inv_z + intrinsics.cx,
                   fy * cam[:, 1] * inv_z + intrinsics.cy], axis=1)

    d_proj = np.zeros((len(points), 2, 3))
    d_proj[:, 0, 0] = fx * inv_z
    d_proj[:, 0, 2] = -fx * cam[:, 0] * inv_z ** 2
    d_proj[:, 1, 1] = fy * inv_z
    d_proj[:, 1, 2] = -fy * cam[:, 1] * inv_z ** 2

    d_cam = np.zeros((len(points), 3, 6))
    d_cam[:, :, :3] = -skew_stack(rotated)
    d_cam[:, :, 3:] = np.eye(3)

    return ProjectionResult(uv,
                            d_proj @ d_cam,
                            d_proj @ pose.rotation)


def project(point, pose, intrinsics):
    """
    Project a single object point; see ``project_points``

    Examples:

    >>> K = CameraIntrinsics(100, 100, 50, 50)
    >>> project([1, 0, 2], RigidPose.identity(), K).uv.tolist()
    [100.0, 50.0]
    """
    result = project_points(np.reshape(point, (1, 3)), pose, intrinsics)
    return ProjectionResult(result.uv[0], result.J_pose[0], result.J_point[0])


def bbox_corners(mins, maxs):
    """
    The 8 box corners, in binary order of the (x, y, z) min/max flags with x
    the most significant

    Examples:

    >>> bbox_corners([0, 0, 0], [1, 2, 3])[[0, 1, 4, 7]].tolist()
    [[0.0, 0.0, 0.0], [0.0, 0.0, 3.0], [1.0, 0.0, 0.0], [1.0, 2.0, 3.0]]
    """
    mins = np.asarray(mins, dtype=float).reshape(3)
    maxs = np.asarray(maxs, dtype=float).reshape(3)
    flags = (np.arange(8)[:, None] >> np.array([2, 1, 0])) & 1
    return np.where(flags == 1, maxs, mins)


class RepresentationKind(Enum):
    """ Supported pose representations """
    corners3d = 'corners3d'
    corners2d = 'corners2d'
    quaternion = 'quaternion'
    axis_angle = 'axis_angle'
    two_column = 'two_column'


REPRESENTATION_SIZES = {
    RepresentationKind.corners3d: 24,
    RepresentationKind.corners2d: 16,
    RepresentationKind.quaternion: 7,
    RepresentationKind.axis_angle: 6,
    RepresentationKind.two_column: 9,
}

CORNER_KINDS = (RepresentationKind.corners3d, RepresentationKind.corners2d)


class PoseRepresentation(object):
    """
    A target pose representation. Corner kinds need the bounding box; the
    projected-corner kind also needs the camera intrinsics
    """

    def __init__(self, kind, bbox=None, intrinsics=None):
        self.kind = RepresentationKind(kind)

        if bbox is not None:
            bbox = np.array(bbox, dtype=float).reshape(8, 3)
            for axis in range(3):
                if len(np.unique(bbox[:, axis])) != 2:
                    raise PreconditionError(
                        "Bounding box corners do not form a rectangular box"
                    )

        if self.kind in CORNER_KINDS and bbox is None:
            raise MissingBBoxError(self.kind.value)

        if self.kind is RepresentationKind.corners2d and intrinsics is None:
            raise PreconditionError(
                "Projected corners need camera intrinsics"
            )

        self.bbox = bbox
        self.intrinsics = intrinsics

    @property
    def size(self):
        """ Number of components, K """
        return REPRESENTATION_SIZES[self.kind]

    @property
    def group_size(self):
        """
        Components per corner for corner kinds. ``None`` for the others,
        which are reduced as one whole-vector group
        """
        if self.kind is RepresentationKind.corners3d:
            return 3
        if self.kind is RepresentationKind.corners2d:
            return 2
        return None


def _quaternion(rotation):
    """ Scalar-first unit quaternion with a non-negative scalar part """
    x, y, z, w = Rotation.from_matrix(rotation).as_quat()
    quat = np.array([w, x, y, z])
    return -quat if w < 0 else quat


def represent(local, rep):
    """
    Evaluate the representation at a local increment, with its Jacobian
    w.r.t. the increment at the same point
    """
    pose = local.pose()
    rotation, translation = pose.rotation, pose.translation
    jl = left_jacobian_so3(local.omega)

    if rep.kind in CORNER_KINDS and rep.bbox is None:
        raise MissingBBoxError(rep.kind.value)

    if rep.kind is RepresentationKind.corners3d:
        rotated = rep.bbox @ rotation.T
        jac = np.zeros((8, 3, 6))
        jac[:, :, :3] = -skew_stack(rotated) @ jl
        jac[:, :, 3:] = np.eye(3)
        return RepresentationResult((rotated + translation).ravel(),
                                    jac.reshape(24, 6))

    if rep.kind is RepresentationKind.corners2d:
        projection = project_points(rep.bbox, pose, rep.intrinsics)
        jac = projection.J_pose.copy()
        jac[:, :, :3] = jac[:, :, :3] @ jl
        return RepresentationResult(projection.uv.ravel(), jac.reshape(16, 6))

    if rep.kind is RepresentationKind.quaternion:
        quat = _quaternion(rotation)
        scalar, vec = quat[0], quat[1:]
        d_quat = 0.5 * np.vstack([-vec[None, :],
                                  scalar * np.eye(3) - skew(vec)])
        jac = np.zeros((7, 6))
        jac[:4, :3] = d_quat @ jl
        jac[4:, 3:] = np.eye(3)
        return RepresentationResult(np.concatenate([quat, translation]), jac)

    if rep.kind is RepresentationKind.axis_angle:
        axis_angle = log_so3(rotation)
        jac = np.zeros((6, 6))
        jac[:3, :3] = left_jacobian_so3_inv(axis_angle) @ jl
        jac[3:, 3:] = np.eye(3)
        return RepresentationResult(
            np.concatenate([axis_angle, translation]), jac,
        )

    columns = rotation[:, :2].T
    jac = np.zeros((9, 6))
    jac[0:3, :3] = -skew(columns[0]) @ jl
    jac[3:6, :3] = -skew(columns[1]) @ jl
    jac[6:, 3:] = np.eye(3)
    return RepresentationResult(
        np.concatenate([columns[0], columns[1], translation]), jac,
    )
