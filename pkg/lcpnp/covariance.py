"""
Residual, pose and prior covariances, and their diagonals in a pose
representation
"""

from collections import namedtuple

import numpy as np
import scipy.linalg

from lcpnp.exceptions import (DegenerateHessianError,
                              NegativeCovarianceError,
                              PreconditionError,
                              )
from lcpnp.geometry import LocalPose6, represent
from lcpnp.linearize import MAX_CONDITION, huber_cap


PSD_TOL = 1e-10


CovarianceResult = namedtuple('CovarianceResult',
                              ['C6', 'diagK', 'prior_diagK'])


def residual_cov(r_gt, huber=None, delta=None):
    """
    Diagonal of the residual covariance: squared residuals, Huber-capped
    when configured

    Examples:

    >>> residual_cov(np.array([1.0, -2.0])).tolist()
    [1.0, 4.0]
    """
    r_gt = np.asarray(r_gt, dtype=float)
    values_sq = r_gt ** 2
    if huber is None:
        return values_sq

    if delta is None:
        delta = huber.resolve(r_gt)
    return huber_cap(values_sq, delta)


def psd_repair(cov):
    """
    Symmetrize, and clamp roundoff-sized negative eigenvalues to zero. Larger
    violations raise ``NegativeCovarianceError``
    """
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    smallest = eigvals[0]
    if smallest >= 0:
        return cov

    tolerance = PSD_TOL * max(1.0, float(np.max(np.abs(eigvals))))
    if smallest < -tolerance:
        raise NegativeCovarianceError(float(smallest))

    eigvals = np.maximum(eigvals, 0.0)
    return (eigvecs * eigvals) @ eigvecs.T


def pose_cov(coefficients, m_diag):
    """ ``A diag(M) A^T``, symmetric PSD """
    m_diag = np.asarray(m_diag, dtype=float)
    if np.any(m_diag < 0):
        raise PreconditionError("Residual variances must be non-negative")

    scaled = coefficients * np.sqrt(m_diag)
    cov = scaled @ scaled.T
    return 0.5 * (cov + cov.T)


def pose_cov_from_linearization(lin, huber=None):
    """ Pose covariance of the solver at the linearization point """
    return pose_cov(lin.A, residual_cov(lin.r_gt, huber))


def transform_cov_diag(cov6, jac):
    """
    Diagonal of ``J C J^T`` for a K x 6 ``J``, one row at a time, never
    forming the K x K product

    Examples:

    >>> transform_cov_diag(np.eye(6), 2 * np.eye(6)).tolist()
    [4.0, 4.0, 4.0, 4.0, 4.0, 4.0]
    """
    cov6 = 0.5 * (cov6 + cov6.T)
    return np.sum((jac @ cov6) * jac, axis=1)


def prior_cov(hessian):
    """ ``H^-1`` through a Cholesky factorization """
    hessian = 0.5 * (hessian + hessian.T)
    condition = np.linalg.cond(hessian)
    if not np.isfinite(condition) or condition >= MAX_CONDITION:
        raise DegenerateHessianError(condition)

    try:
        factor = scipy.linalg.cho_factor(hessian)
    except np.linalg.LinAlgError as ex:
        raise DegenerateHessianError(message="Hessian is not positive "
                                             "definite: %s" % ex)

    inverse = scipy.linalg.cho_solve(factor, np.eye(len(hessian)))
    return 0.5 * (inverse + inverse.T)


def covariance_result(lin, rep, huber=None):
    """ Pose covariance, and both representation diagonals """
    jac = represent(LocalPose6.zero(lin.y_gt_ref), rep).jac
    cov6 = psd_repair(pose_cov_from_linearization(lin, huber))
    return CovarianceResult(C6=cov6,
                            diagK=np.maximum(transform_cov_diag(cov6, jac),
                                             0.0),
                            prior_diagK=transform_cov_diag(prior_cov(lin.H),
                                                           jac))
