"""
The linear-covariance loss: covariance, prior and linear error terms bound
by a Laplace (or Gaussian) NLL, with gradients w.r.t. the weights and 2D
locations.

Detach rules: the residuals reach only the covariance term; the prior term
sees the weights through ``H``; the linear term sees the weights through
``A`` while its residuals are held fixed. The 3D points carry no gradient.
``LossConfig`` can also detach the residuals, or the weights, from the
covariance term, and drop any of the three terms. A dropped prior is held
at 1.

Gradients are forward-mode tangents, one per input coordinate, pushed
through ``H^-1``, the pose covariance, the prior diagonal and the linear
error in a single batched pass.
"""

from collections import namedtuple
from enum import Enum

import numpy as np

from lcpnp.covariance import prior_cov, transform_cov_diag
from lcpnp.exceptions import (NonFiniteGradientError,
                              NonPositivePriorError,
                              PreconditionError,
                              )
from lcpnp.geometry import LocalPose6, PoseRepresentation, represent
from lcpnp.linearize import (HuberConfig,
                             huber_cap,
                             huber_cap_grad,
                             linearize_at_gt,
                             )


DEFAULT_SQRT_EPS = 1e-12


LossTerms = namedtuple('LossTerms', ['e_cov', 'e_prior', 'e_linear'])
LossBreakdown = namedtuple('LossBreakdown', [
    'e_cov', 'e_prior', 'e_linear', 'l_lc', 'grad_w', 'grad_x',
])


class LossTerm(Enum):
    """ The three terms bound by the LC loss """
    cov = 'cov'
    prior = 'prior'
    linear = 'linear'


ALL_TERMS = (LossTerm.cov, LossTerm.prior, LossTerm.linear)


class Distribution(Enum):
    """ How the three terms are reduced, and bound together """
    laplace = 'laplace'
    gaussian = 'gaussian'


class LossConfig(object):
    """
    Representation, distribution and stabilizer of the LC loss. ``terms``
    picks the terms that are bound together; ``detach_residuals`` and
    ``detach_weights`` cut those inputs out of the covariance term
    """

    def __init__(self,
                 representation,
                 distribution=Distribution.laplace,
                 sqrt_eps=DEFAULT_SQRT_EPS,
                 huber=None,
                 terms=ALL_TERMS,
                 detach_residuals=False,
                 detach_weights=False,
                 ):
        if not isinstance(representation, PoseRepresentation):
            raise PreconditionError("representation must be a "
                                    "PoseRepresentation")
        if not sqrt_eps > 0:
            raise PreconditionError("sqrt_eps must be positive")
        if huber is not None and not isinstance(huber, HuberConfig):
            raise PreconditionError("huber must be a HuberConfig")

        terms = tuple(LossTerm(term) for term in terms)
        if not terms:
            raise PreconditionError("At least one loss term is required")

        self.representation = representation
        self.distribution = Distribution(distribution)
        self.sqrt_eps = float(sqrt_eps)
        self.huber = huber
        self.terms = frozenset(terms)
        self.detach_residuals = bool(detach_residuals)
        self.detach_weights = bool(detach_weights)

    def uses(self, term):
        """ Whether ``term`` is part of the loss """
        return term in self.terms


def _groups(values, group_size):
    """ Reshape to (groups, group_size); ``None`` is one whole group """
    values = np.asarray(values, dtype=float)
    if group_size is None:
        return values.reshape(1, -1)

    if len(values) % group_size:
        raise PreconditionError(
            "%d values do not split into groups of %d" % (len(values),
                                                          group_size)
        )
    return values.reshape(-1, group_size)


def corner_norm_mean(values, group_size, sqrt_eps=DEFAULT_SQRT_EPS):
    """
    Mean over groups of ``sqrt(group sum + sqrt_eps)``

    Examples:

    >>> round(corner_norm_mean(np.ones(24), 3, 0.0), 7)
    1.7320508
    """
    sums = _groups(values, group_size).sum(axis=1)
    return float(np.mean(np.sqrt(sums + sqrt_eps)))


def group_reduce(values, group_size, distribution, sqrt_eps=DEFAULT_SQRT_EPS):
    """
    Reduce non-negative diagonal, or squared-error values to one term.
    Laplace takes the mean group root, Gaussian the mean group sum
    """
    if Distribution(distribution) is Distribution.laplace:
        return corner_norm_mean(values, group_size, sqrt_eps)

    return float(np.mean(_groups(values, group_size).sum(axis=1)))


def group_reduce_grad(values, group_size, distribution,
                      sqrt_eps=DEFAULT_SQRT_EPS):
    """ Derivative of ``group_reduce`` w.r.t. each value """
    grouped = _groups(values, group_size)
    count = grouped.shape[0]
    if Distribution(distribution) is Distribution.laplace:
        roots = np.sqrt(grouped.sum(axis=1) + sqrt_eps)
        per_group = 1.0 / (2.0 * count * roots)
    else:
        per_group = np.full(count, 1.0 / count)

    return np.repeat(per_group, grouped.shape[1])


def lc_combine(e_cov, e_prior, e_linear,
               distribution=Distribution.laplace):
    """
    ``log(E_prior) + 0.5 (E_cov + E_linear) / E_prior``. Both distributions
    share this form; they differ in how the terms were reduced

    Examples:

    >>> lc_combine(1.0, 1.0, 1.0)
    1.0
    """
    Distribution(distribution)
    if not e_prior > 0:
        raise NonPositivePriorError(e_prior)

    return float(np.log(e_prior) + 0.5 * (e_cov + e_linear) / e_prior)


def lc_combine_grad(e_cov, e_prior, e_linear):
    """ Partials of ``lc_combine`` w.r.t. (E_cov, E_prior, E_linear) """
    if not e_prior > 0:
        raise NonPositivePriorError(e_prior)

    half = 0.5 / e_prior
    return half, 1.0 / e_prior - 0.5 * (e_cov + e_linear) / e_prior ** 2, half


def representation_jacobian(y_gt, rep):
    """ K x 6 Jacobian of the representation at the ground truth """
    return represent(LocalPose6.zero(y_gt), rep).jac


def _residual_variances(r_gt, huber, delta):
    """ Huber-capped squared residuals, their derivative, and the delta """
    values_sq = r_gt ** 2
    if huber is None:
        return values_sq, np.ones_like(values_sq), None

    if delta is None:
        delta = huber.resolve(r_gt)
    return huber_cap(values_sq, delta), huber_cap_grad(values_sq, delta), delta


def _diagonals(lin, m_diag, rep_jac, detached_r):
    """
    Representation diagonals of the pose and prior covariances, and the
    squared linear errors
    """
    prior = prior_cov(lin.H)
    scaled = lin.A * np.sqrt(m_diag)
    cov6 = scaled @ scaled.T
    error6 = lin.A @ detached_r
    return (np.maximum(transform_cov_diag(cov6, rep_jac), 0.0),
            transform_cov_diag(prior, rep_jac),
            (rep_jac @ error6) ** 2)


def _reduce_all(cfg, diag_cov, diag_prior, sq_linear):
    """ Reduce the three diagonals to the loss terms """
    group_size = cfg.representation.group_size
    return LossTerms(
        *[group_reduce(values, group_size, cfg.distribution, cfg.sqrt_eps)
          for values in (diag_cov, diag_prior, sq_linear)]
    )


def active_terms(terms, cfg):
    """
    The terms as they enter the NLL: dropped covariance, or linear terms are
    zero, and a dropped prior is 1

    Examples:

    >>> from lcpnp.geometry import RepresentationKind
    >>> rep = PoseRepresentation(RepresentationKind.axis_angle)
    >>> cfg = LossConfig(rep, terms=('cov', 'linear'))
    >>> active_terms(LossTerms(2.0, 3.0, 4.0), cfg)
    LossTerms(e_cov=2.0, e_prior=1.0, e_linear=4.0)
    """
    return LossTerms(terms.e_cov if cfg.uses(LossTerm.cov) else 0.0,
                     terms.e_prior if cfg.uses(LossTerm.prior) else 1.0,
                     terms.e_linear if cfg.uses(LossTerm.linear) else 0.0)


def loss_terms(lin, cfg):
    """ The three LC terms at a linearization """
    rep_jac = representation_jacobian(lin.y_gt_ref, cfg.representation)
    m_diag, _, _ = _residual_variances(lin.r_gt, cfg.huber, None)
    return _reduce_all(cfg, *_diagonals(lin, m_diag, rep_jac, lin.r_gt))


def frozen_lc_value(corrs, y_gt, cfg, detached_x, deltas=(None, None),
                    detached_w=None):
    """
    The LC loss with the linear term's residuals taken from ``detached_x``
    rather than ``corrs.x``. ``deltas`` pins the (weight, residual) Huber
    deltas. When ``cfg`` detaches them, the covariance term also takes its
    residuals from ``detached_x``, and its weights from ``detached_w``
    """
    weight_delta, residual_delta = deltas
    lin = linearize_at_gt(corrs, y_gt, cfg.huber, weight_delta)
    rep_jac = representation_jacobian(y_gt, cfg.representation)
    detached_r = np.asarray(detached_x, dtype=float) - lin.x_p

    cov_residuals = detached_r if cfg.detach_residuals else lin.r_gt
    m_diag, _, _ = _residual_variances(cov_residuals, cfg.huber,
                                       residual_delta)
    _, diag_prior, sq_linear = _diagonals(lin, m_diag, rep_jac, detached_r)

    cov_lin = lin
    if cfg.detach_weights and detached_w is not None:
        cov_lin = linearize_at_gt(corrs.with_w(detached_w), y_gt, cfg.huber,
                                  weight_delta)
    diag_cov, _, _ = _diagonals(cov_lin, m_diag, rep_jac, detached_r)

    terms = active_terms(_reduce_all(cfg, diag_cov, diag_prior, sq_linear),
                         cfg)
    return lc_combine(terms.e_cov, terms.e_prior, terms.e_linear,
                      cfg.distribution)


def lc_loss(corrs, y_gt, cfg):
    """ LC loss terms, value and gradients at the ground-truth pose """
    if cfg.huber is not None:
        weight_delta = cfg.huber.resolve(corrs.w)
        sq_w_grad = huber_cap_grad(corrs.w ** 2, weight_delta)
    else:
        weight_delta = None
        sq_w_grad = np.ones_like(corrs.w)

    lin = linearize_at_gt(corrs, y_gt, cfg.huber, weight_delta)
    rep_jac = representation_jacobian(y_gt, cfg.representation)
    residuals = lin.r_gt
    m_diag, m_grad, _ = _residual_variances(residuals, cfg.huber, None)

    diag_cov, diag_prior, sq_linear = _diagonals(lin, m_diag, rep_jac,
                                                 residuals)
    terms = _reduce_all(cfg, diag_cov, diag_prior, sq_linear)
    active = active_terms(terms, cfg)
    l_lc = lc_combine(active.e_cov, active.e_prior, active.e_linear,
                      cfg.distribution)

    group_size = cfg.representation.group_size
    g_cov, g_prior, g_linear = (
        group_reduce_grad(values, group_size, cfg.distribution, cfg.sqrt_eps)
        for values in (diag_cov, diag_prior, sq_linear)
    )
    dl_cov, dl_prior, dl_linear = (
        partial if cfg.uses(term) else 0.0
        for partial, term in zip(lc_combine_grad(*active), ALL_TERMS)
    )

    # Tangents along each squared weight s_j: with q_j = H^-1 h_j,
    # dH^-1 = -q_j q_j^T and dA/ds_j only moves column j
    jac, sq_weights = lin.jac, lin.sq_weights
    inv_h = prior_cov(lin.H)
    q_cols = inv_h @ jac.T
    inner = jac.T @ ((sq_weights ** 2 * m_diag)[:, None] * jac)
    u_cols = inv_h @ inner @ q_cols

    rep_q = rep_jac @ q_cols
    rep_u = rep_jac @ u_cols
    error6 = lin.A @ residuals
    rep_error = rep_jac @ error6

    d_cov_ds = -2.0 * rep_q * rep_u + \
        2.0 * (sq_weights * m_diag)[None, :] * rep_q ** 2
    d_prior_ds = -rep_q ** 2
    d_linear_ds = 2.0 * rep_error[:, None] * rep_q * \
        (residuals - jac @ error6)[None, :]
    d_cov_dm = (sq_weights ** 2)[None, :] * rep_q ** 2
    if cfg.detach_weights:
        d_cov_ds = np.zeros_like(d_cov_ds)
    if cfg.detach_residuals:
        d_cov_dm = np.zeros_like(d_cov_dm)

    dl_ds = dl_cov * (g_cov @ d_cov_ds) + \
        dl_prior * (g_prior @ d_prior_ds) + \
        dl_linear * (g_linear @ d_linear_ds)
    dl_dm = dl_cov * (g_cov @ d_cov_dm)

    grad_w = dl_ds * sq_w_grad * 2.0 * corrs.w
    grad_x = dl_dm * m_grad * 2.0 * residuals

    if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_x))):
        raise NonFiniteGradientError()

    return LossBreakdown(e_cov=terms.e_cov,
                         e_prior=terms.e_prior,
                         e_linear=terms.e_linear,
                         l_lc=l_lc,
                         grad_w=grad_w,
                         grad_x=grad_x)
