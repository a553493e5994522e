"""
Weighted nonlinear least-squares PnP, with a RANSAC front end
"""

import logging

from collections import namedtuple

import numpy as np
import scipy.linalg

from scipy.spatial.transform import Rotation

from lcpnp.exceptions import (LcPnpError,
                              MaxItersExceededError,
                              NoConsensusError,
                              NonPositiveDepthError,
                              PreconditionError,
                              SingularHessianError,
                              )
from lcpnp.geometry import DEPTH_EPS, RigidPose, project_points


MIN_POINTS = 4
MAX_CONDITION = 1e12
MAX_DAMPING = 1e16
REFINE_PASSES = 2


SolveResult = namedtuple('SolveResult',
                         ['pose', 'iters', 'final_nll', 'converged'])
RansacResult = namedtuple('RansacResult', ['pose', 'inlier_mask', 'trials'])


class CorrespondenceSet(object):
    """
    ``N`` weighted 2D-3D correspondences, stored flat: ``x`` is 2N pixel
    coordinates, ``z`` is 3N object coordinates and ``w`` is 2N per-axis
    weights
    """

    def __init__(self, x, z, w, intrinsics):
        x = np.array(x, dtype=float).ravel()
        z = np.array(z, dtype=float).ravel()
        w = np.array(w, dtype=float).ravel()

        errors = []
        if len(x) % 2:
            errors.append("x must hold 2N values, got %d" % len(x))
        count = len(x) // 2
        if len(z) != 3 * count:
            errors.append("z must hold %d values, got %d" % (3 * count,
                                                             len(z)))
        if len(w) != 2 * count:
            errors.append("w must hold %d values, got %d" % (2 * count,
                                                             len(w)))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z)) and
                np.all(np.isfinite(w))):
            errors.append("values must be finite")
        if np.any(w < 0):
            errors.append("weights must be non-negative")
        if errors:
            raise PreconditionError('; '.join(errors))

        self.x = x
        self.z = z
        self.w = w
        self.intrinsics = intrinsics

    @classmethod
    def from_arrays(cls, points2d, points3d, intrinsics, weights=None):
        """ Build from (N, 2), and (N, 3) arrays; unit weights by default """
        points2d = np.asarray(points2d, dtype=float)
        if weights is None:
            weights = np.ones_like(points2d)
        return cls(points2d, points3d, weights, intrinsics)

    @property
    def n(self):  # pylint:disable=invalid-name
        """ Number of correspondences """
        return len(self.x) // 2

    @property
    def points2d(self):
        """ (N, 2) view of ``x`` """
        return self.x.reshape(-1, 2)

    @property
    def points3d(self):
        """ (N, 3) view of ``z`` """
        return self.z.reshape(-1, 3)

    @property
    def weights(self):
        """ (N, 2) view of ``w`` """
        return self.w.reshape(-1, 2)

    def subset(self, selector):
        """ Correspondences picked by a boolean mask, or index array """
        return CorrespondenceSet(self.points2d[selector],
                                 self.points3d[selector],
                                 self.weights[selector],
                                 self.intrinsics)

    def with_x(self, x):
        """ Copy with new 2D locations """
        return CorrespondenceSet(x, self.z, self.w, self.intrinsics)

    def with_w(self, w):
        """ Copy with new weights """
        return CorrespondenceSet(self.x, self.z, w, self.intrinsics)

    def residuals(self, pose):
        """ Flat residuals ``x - pi(z, pose)`` """
        return self.x - project_points(self.points3d,
                                       pose,
                                       self.intrinsics).uv.ravel()


class SolverConfig(object):
    """ Levenberg-Marquardt settings for ``solve_weighted`` """

    def __init__(self,
                 max_iters=100,
                 step_tol=1e-12,
                 grad_tol=1e-8,
                 damping_init=1e-3,
                 huber_delta=None,
                 raise_on_max_iters=False,
                 ):
        errors = []
        if max_iters < 1:
            errors.append("max_iters must be at least 1")
        for name, value in (('step_tol', step_tol),
                            ('grad_tol', grad_tol),
                            ('damping_init', damping_init)):
            if not value > 0:
                errors.append("%s must be positive" % name)
        if huber_delta is not None and not huber_delta > 0:
            errors.append("huber_delta must be positive")
        if errors:
            raise PreconditionError('; '.join(errors))

        self.max_iters = int(max_iters)
        self.step_tol = float(step_tol)
        self.grad_tol = float(grad_tol)
        self.damping_init = float(damping_init)
        self.huber_delta = huber_delta
        self.raise_on_max_iters = raise_on_max_iters

    def as_dict(self):
        """ Settings as a plain dict """
        return dict(self.__dict__)


class RansacParams(object):
    """ Settings for ``solve_ransac`` """

    def __init__(self,
                 iters=200,
                 inlier_px=2.0,
                 min_set=MIN_POINTS,
                 seed=0,
                 confidence=0.999,
                 ):
        if min_set < MIN_POINTS:
            raise PreconditionError("min_set must be at least %d" % MIN_POINTS)
        if iters < 1 or not inlier_px > 0 or not 0 < confidence < 1:
            raise PreconditionError("Invalid RANSAC parameters")

        self.iters = int(iters)
        self.inlier_px = float(inlier_px)
        self.min_set = int(min_set)
        self.seed = int(seed)
        self.confidence = float(confidence)


def nll(corrs, pose):
    """
    Weighted least-squares NLL, ``0.5 * sum ||w_i o r_i||^2``

    Raises ``NonPositiveDepthError`` when a point projects from behind the
    camera
    """
    residuals = corrs.residuals(pose)
    return 0.5 * float(np.sum((corrs.w * residuals) ** 2))


def huber_irls_weights(scaled_residuals, delta):
    """
    IRLS factors of the Huber influence function for weighted residual
    components ``w o r``

    Examples:

    >>> huber_irls_weights(np.array([0.5, -4.0]), 2.0).tolist()
    [1.0, 0.5]
    """
    magnitude = np.abs(scaled_residuals)
    return np.where(magnitude <= delta, 1.0,
                    delta / np.maximum(magnitude, 1e-300))


def _objective(scaled_residuals, delta):
    """ Plain, or Huber-robustified weighted least squares cost """
    if delta is None:
        return 0.5 * float(np.sum(scaled_residuals ** 2))

    magnitude = np.abs(scaled_residuals)
    return float(np.sum(np.where(magnitude <= delta,
                                 0.5 * magnitude ** 2,
                                 delta * magnitude - 0.5 * delta ** 2)))


def _linear_system(corrs, pose):
    """ Residuals, and the 2N x 6 Jacobian of the projections """
    projection = project_points(corrs.points3d, pose, corrs.intrinsics)
    return corrs.x - projection.uv.ravel(), projection.J_pose.reshape(-1, 6)


def solve_weighted(corrs, init, cfg=None):
    """
    Minimize the weighted NLL by Levenberg-Marquardt on the local chart,
    re-anchoring at every accepted step. When ``cfg.huber_delta`` is set the
    weighted residual components are reweighted with the Huber influence
    function (IRLS), and ``final_nll`` is the robust cost
    """
    logger = logging.getLogger('lcpnp.pnp')
    cfg = cfg or SolverConfig()

    if corrs.n < MIN_POINTS:
        raise PreconditionError(
            "PnP needs at least %d correspondences, got %d" % (MIN_POINTS,
                                                               corrs.n)
        )

    sq_weights = corrs.w ** 2
    delta = cfg.huber_delta
    pose = init
    damping = cfg.damping_init

    residuals, jac = _linear_system(corrs, pose)
    cost = _objective(corrs.w * residuals, delta)

    converged = False
    iters = 0
    while iters < cfg.max_iters:
        if delta is None:
            eff = sq_weights
        else:
            eff = sq_weights * huber_irls_weights(corrs.w * residuals, delta)

        gradient = jac.T @ (eff * residuals)
        # Both sides grow with the squared weights
        scale = max(float(np.mean(eff)), 1e-300)
        if np.linalg.norm(gradient) < cfg.grad_tol * (scale + cost):
            converged = True
            break

        hessian = jac.T @ (eff[:, None] * jac)
        condition = np.linalg.cond(hessian)
        if not np.isfinite(condition) or condition >= MAX_CONDITION:
            raise SingularHessianError(condition)

        iters += 1
        damped = hessian + damping * np.diag(np.diag(hessian))
        try:
            step = scipy.linalg.solve(damped, gradient, assume_a='pos')
        except (np.linalg.LinAlgError, ValueError) as ex:
            raise SingularHessianError(message=str(ex))

        candidate = pose.compose_local(step[:3], step[3:])
        try:
            cand_residuals, cand_jac = _linear_system(corrs, candidate)
        except NonPositiveDepthError:
            cand_cost = np.inf
        else:
            cand_cost = _objective(corrs.w * cand_residuals, delta)

        if cand_cost <= cost:
            pose, residuals, jac, cost = (candidate, cand_residuals,
                                          cand_jac, cand_cost)
            damping = max(damping / 10.0, 1e-12)
            logger.debug("LM iter %d accepted, cost %.12g", iters, cost)
            if np.linalg.norm(step) < cfg.step_tol:
                converged = True
                break

        else:
            damping *= 10.0
            logger.debug("LM iter %d rejected, damping %g", iters, damping)
            if damping > MAX_DAMPING:
                # No representable step improves the cost
                converged = True
                break

    result = SolveResult(pose, iters, cost, converged)
    if not converged:
        logger.warning("PnP did not converge in %d iterations", iters)
        if cfg.raise_on_max_iters:
            raise MaxItersExceededError(result)

    return result


def coarse_pose(corrs):
    """
    Scaled-orthographic initialization. The image rays are first turned so
    the ray through the 2D centroid is the optical axis; in that virtual
    camera the affine map from centred object points to centred image points
    is fitted, its nearest scaled rotation taken, and the object centroid
    placed on the axis at the depth where projected and observed spreads
    match
    """
    intrinsics = corrs.intrinsics
    image = (corrs.points2d - [intrinsics.cx, intrinsics.cy]) / \
        [intrinsics.fx, intrinsics.fy]
    points = corrs.points3d

    rays = np.hstack([image, np.ones((len(image), 1))])
    centre_ray = rays.mean(axis=0)
    to_axis, _ = Rotation.align_vectors([[0.0, 0.0, 1.0]], [centre_ray])
    virtual = to_axis.apply(rays)
    image = virtual[:, :2] / virtual[:, 2:]

    image_mean = image.mean(axis=0)
    points_mean = points.mean(axis=0)

    affine_t, *_ = np.linalg.lstsq(points - points_mean,
                                   image - image_mean,
                                   rcond=None)
    left, spread, right_t = np.linalg.svd(affine_t.T, full_matrices=False)
    scale = spread.mean()
    if not scale > 0:
        raise PreconditionError("Degenerate correspondences for initializing")

    rows = left @ right_t
    rotation = np.vstack([rows, np.cross(rows[0], rows[1])])
    depth = 1.0 / scale
    translation = np.array([image_mean[0] * depth,
                            image_mean[1] * depth,
                            depth]) - rotation @ points_mean

    back = to_axis.inv().as_matrix()
    return RigidPose(back @ rotation, back @ translation, check=False)


def reprojection_errors(corrs, pose):
    """
    Per-point pixel distance between ``x_i`` and the projection of ``z_i``.
    Points behind the camera get an infinite error
    """
    cam = corrs.points3d @ pose.rotation.T + pose.translation
    depth = cam[:, 2]
    valid = depth > DEPTH_EPS
    safe = np.where(valid, depth, 1.0)
    intrinsics = corrs.intrinsics
    proj = np.stack([intrinsics.fx * cam[:, 0] / safe + intrinsics.cx,
                     intrinsics.fy * cam[:, 1] / safe + intrinsics.cy], axis=1)
    errors = np.linalg.norm(corrs.points2d - proj, axis=1)
    return np.where(valid, errors, np.inf)


def _trial_bound(inlier_ratio, min_set, confidence):
    """ RANSAC trials needed to hit an all-inlier sample with confidence """
    hit = inlier_ratio ** min_set
    if hit >= 1.0:
        return 1
    if hit <= 0.0:
        return np.inf

    return int(np.ceil(np.log(1.0 - confidence) / np.log(1.0 - hit)))


def solve_ransac(corrs, params=None, cfg=None):
    """
    Unweighted RANSAC over minimal sets. Each sample is solved by
    ``solve_weighted`` from ``coarse_pose``; the model with the largest
    consensus is refined on its inliers with unit weights
    """
    logger = logging.getLogger('lcpnp.pnp')
    params = params or RansacParams()
    cfg = cfg or SolverConfig()
    sample_cfg = SolverConfig(max_iters=50,
                              step_tol=cfg.step_tol,
                              grad_tol=cfg.grad_tol,
                              damping_init=cfg.damping_init)

    count = corrs.n
    if count < params.min_set:
        raise NoConsensusError(
            "RANSAC needs at least %d correspondences, got %d" % (
                params.min_set, count,
            )
        )

    unit = corrs.with_w(np.ones_like(corrs.w))
    rng = np.random.default_rng(params.seed)

    best = None
    best_key = (0, np.inf)
    trials = params.iters
    trial = 0
    while trial < trials:
        trial += 1
        sample = rng.choice(count, size=params.min_set, replace=False)
        minimal = unit.subset(np.sort(sample))
        try:
            pose = solve_weighted(minimal, coarse_pose(minimal),
                                  sample_cfg).pose
        except LcPnpError:
            continue

        errors = reprojection_errors(unit, pose)
        mask = errors <= params.inlier_px
        key = (int(mask.sum()), float(np.sum(errors[mask])))
        if key[0] > best_key[0] or (key[0] == best_key[0] and
                                    key[1] < best_key[1]):
            best, best_key = (pose, mask), key
            trials = min(params.iters,
                         _trial_bound(key[0] / count,
                                      params.min_set,
                                      params.confidence))

    if best is None or best_key[0] < params.min_set:
        raise NoConsensusError()

    # The returned mask is always the set the returned pose was solved on
    pose, mask = best
    for _ in range(REFINE_PASSES):
        pose = solve_weighted(unit.subset(mask), pose, cfg).pose
        new_mask = reprojection_errors(unit, pose) <= params.inlier_px
        if np.array_equal(new_mask, mask) or new_mask.sum() < params.min_set:
            break
        mask = new_mask
    else:
        pose = solve_weighted(unit.subset(mask), pose, cfg).pose

    logger.debug("RANSAC consensus %d/%d after %d trials",
                 mask.sum(), count, trial)
    return RansacResult(pose, mask, trial)
