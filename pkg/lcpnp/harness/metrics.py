"""
Pose error metrics
"""

from collections import namedtuple

import numpy as np

from scipy import spatial

from lcpnp.exceptions import AllResidualsZeroError, PreconditionError


RECALL_FRACTION = 0.1


AddResult = namedtuple('AddResult', ['add', 'recall_ok'])
PoseErrors = namedtuple('PoseErrors', ['rot_err_deg', 'trans_err'])


def object_diameter(points):
    """ Largest distance between two model points """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 2:
        return 0.0
    return float(spatial.distance.pdist(points).max())


def pose_errors(pred, gt):
    """ Rotation angle (degrees), and translation distance """
    return PoseErrors(float(pred.rotation_error_deg(gt)),
                      pred.translation_error(gt))


def add_metrics(pred, gt, model_points, diameter, symmetric=False):
    """
    Mean distance between the model points under both poses. With
    ``symmetric`` each ground-truth point is matched to its nearest predicted
    point instead (ADD-S). Recall holds below 10% of the diameter
    """
    model_points = np.asarray(model_points, dtype=float).reshape(-1, 3)
    if not len(model_points):
        raise PreconditionError("Model points must not be empty")
    if not diameter > 0:
        raise PreconditionError("Object diameter must be positive")

    pts_est = pred.transform(model_points)
    pts_gt = gt.transform(model_points)
    if symmetric:
        nn_index = spatial.cKDTree(pts_est)
        distances, _ = nn_index.query(pts_gt, k=1)
    else:
        distances = np.linalg.norm(pts_est - pts_gt, axis=1)

    value = float(distances.mean())
    return AddResult(value, value < RECALL_FRACTION * diameter)


def gradient_correctness(corrs, grad_x, x_p, step=None):
    """
    Fraction of points whose own reprojection error shrinks after a step of
    ``-step * grad`` on its 2D location. With no ``step`` the move is taken
    to the first-order limit, where a point is correct when its gradient has
    a positive component along its residual. Points already on their perfect
    projection are left out

    Examples:

    >>> from lcpnp.geometry import CameraIntrinsics
    >>> from lcpnp.pnp import CorrespondenceSet
    >>> corrs = CorrespondenceSet.from_arrays(
    ...     [[1, 0], [0, 2], [3, 3], [5, 5]], np.ones((4, 3)),
    ...     CameraIntrinsics(1, 1, 0, 0))
    >>> grad = [1, 0, 0, 1, 1, 1, 1, 1]
    >>> gradient_correctness(corrs, grad, np.zeros(8), 0.1)
    1.0
    >>> gradient_correctness(corrs, grad, np.zeros(8))
    1.0
    """
    if step is not None and not step > 0:
        raise PreconditionError("Correctness step must be positive")

    x_p = np.asarray(x_p, dtype=float).reshape(-1, 2)
    grad_x = np.asarray(grad_x, dtype=float).reshape(-1, 2)
    residuals = corrs.points2d - x_p
    before = np.linalg.norm(residuals, axis=1)

    active = before > 0
    if not np.any(active):
        raise AllResidualsZeroError()

    if step is None:
        correct = np.sum(grad_x * residuals, axis=1) > 0
    else:
        after = np.linalg.norm(residuals - step * grad_x, axis=1)
        correct = after < before

    return float(np.mean(correct[active]))
