"""
First-order model of the weighted PnP solver around a pose.

At the ground truth with perfect correspondences the residuals vanish, so the
Gauss-Newton normal matrix is the exact NLL Hessian and the solver output
moves with the 2D locations as ``y = y_gt + A (x - x_p)``. ``A`` has one
column per 2D coordinate; column ``j`` is ``s_j H^-1 h_j`` where ``h_j`` is
the projection Jacobian row and ``s_j`` the (optionally Huber-capped)
squared weight.
"""

from collections import namedtuple

import numpy as np
import scipy.linalg

from lcpnp.exceptions import DegenerateHessianError, PreconditionError
from lcpnp.geometry import LocalPose6, project_points
from lcpnp.pnp import MIN_POINTS


MAX_CONDITION = 1e12


LinearizationResult = namedtuple('LinearizationResult', [
    'x_p', 'r_gt', 'H', 'A', 'y_gt_ref', 'jac', 'sq_weights',
])


class HuberConfig(object):
    """
    Cap on squared quantities. With a fixed ``delta``, values ``u`` above
    ``delta^2`` become ``2 delta sqrt(u) - delta^2``. Without one, delta is
    ``max(floor, scale * median |v|)`` of the unsquared values
    """

    def __init__(self, delta=None, scale=2.0, floor=1.0):
        if delta is not None and not delta > 0:
            raise PreconditionError("Huber delta must be positive")
        if not scale > 0 or floor < 0:
            raise PreconditionError("Huber scale must be positive, and "
                                    "floor non-negative")

        self.delta = delta
        self.scale = float(scale)
        self.floor = float(floor)

    def resolve(self, values):
        """ Delta to use for the unsquared ``values`` """
        if self.delta is not None:
            return float(self.delta)

        values = np.abs(np.asarray(values, dtype=float))
        if values.size == 0:
            return self.floor

        return max(self.floor, self.scale * float(np.median(values)))

    @classmethod
    def from_dict(cls, data):
        """ Build from a config mapping; ``None`` stays ``None`` """
        if data is None:
            return None
        return cls(**data)


def huber_cap(values_sq, delta):
    """
    Huber-capped squared values

    Examples:

    >>> huber_cap(np.array([4.0, 100.0]), 3.0).tolist()
    [4.0, 51.0]
    """
    values_sq = np.asarray(values_sq, dtype=float)
    return np.where(values_sq <= delta ** 2,
                    values_sq,
                    2.0 * delta * np.sqrt(values_sq) - delta ** 2)


def huber_cap_grad(values_sq, delta):
    """ Derivative of ``huber_cap`` w.r.t. the squared values """
    values_sq = np.asarray(values_sq, dtype=float)
    return np.where(values_sq <= delta ** 2,
                    1.0,
                    delta / np.sqrt(np.maximum(values_sq, delta ** 2)))


def effective_sq_weights(w, huber=None, delta=None):
    """
    Squared weights as used by the linearization, with their delta (``None``
    when uncapped)
    """
    sq_weights = np.asarray(w, dtype=float) ** 2
    if huber is None:
        return sq_weights, None

    if delta is None:
        delta = huber.resolve(w)
    return huber_cap(sq_weights, delta), delta


def linearize_at(corrs, pose, huber=None, weight_delta=None):
    """
    Linearize the weighted solver at ``pose`` using the actual residuals
    there. The normal matrix is the Gauss-Newton one, which is exact only
    where the residuals vanish
    """
    if corrs.n < MIN_POINTS:
        raise PreconditionError(
            "Linearization needs at least %d correspondences, got %d" % (
                MIN_POINTS, corrs.n,
            )
        )

    projection = project_points(corrs.points3d, pose, corrs.intrinsics)
    x_p = projection.uv.ravel()
    jac = projection.J_pose.reshape(-1, 6)
    sq_weights, _ = effective_sq_weights(corrs.w, huber, weight_delta)

    hessian = jac.T @ (sq_weights[:, None] * jac)
    hessian = 0.5 * (hessian + hessian.T)

    condition = np.linalg.cond(hessian)
    if not np.isfinite(condition) or condition >= MAX_CONDITION:
        raise DegenerateHessianError(condition)

    coefficients = scipy.linalg.solve(hessian,
                                      jac.T * sq_weights,
                                      assume_a='pos')

    return LinearizationResult(x_p=x_p,
                               r_gt=corrs.x - x_p,
                               H=hessian,
                               A=coefficients,
                               y_gt_ref=pose,
                               jac=jac,
                               sq_weights=sq_weights)


def linearize_at_gt(corrs, y_gt, huber=None, weight_delta=None):
    """
    Linearize the weighted solver at the ground-truth pose. ``r_gt`` is the
    residual of the observed locations against the perfect projections
    """
    return linearize_at(corrs, y_gt, huber, weight_delta)


def predict_pose_linear(lin):
    """ The first-order solver output ``y_gt + A r_gt`` """
    return LocalPose6.from_vector(lin.A @ lin.r_gt, lin.y_gt_ref)
