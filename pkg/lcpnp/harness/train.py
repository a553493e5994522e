"""
Toy descent on free 2D locations and weights, comparing how losses steer
individual correspondences
"""

import io
import logging

from collections import deque, namedtuple
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np

from lcpnp.exceptions import (AllResidualsZeroError,
                              LcPnpError,
                              NonFiniteGradientError,
                              PreconditionError,
                              SolverFailureError,
                              ValidationError,
                              )
from lcpnp.geometry import (LocalPose6,
                            PoseRepresentation,
                            RepresentationKind,
                            project_points,
                            represent,
                            )
from lcpnp.harness.metrics import (add_metrics,
                                   gradient_correctness,
                                   object_diameter,
                                   pose_errors,
                                   )
from lcpnp.harness.scene import gen_scene
from lcpnp.linearize import linearize_at
from lcpnp.loss import (ALL_TERMS,
                        Distribution,
                        LossConfig,
                        LossTerm,
                        lc_loss,
                        )
from lcpnp.pnp import solve_weighted


CSV_COLUMNS = ('step', 'loss', 'correctness', 'rot_err_deg', 'trans_err',
               'add')


TrainRecord = namedtuple('TrainRecord', [
    'step', 'loss', 'correctness', 'rot_err_deg', 'trans_err', 'add',
    'failed',
])
SweepRow = namedtuple('SweepRow', [
    'scene_seed', 'loss_kind', 'mean_correctness', 'initial_rot_err_deg',
    'final_rot_err_deg', 'failures',
])
LossEvaluation = namedtuple('LossEvaluation', ['value', 'grad_x', 'grad_w'])


class LossKind(Enum):
    """ Losses available to ``toy_train`` """
    lc = 'lc'
    bpnp = 'bpnp'
    surrogate = 'surrogate'
    mixed = 'mixed'


class ClipConfig(object):
    """ Cap on gradient norms relative to their running median """

    def __init__(self, factor=10.0, window=100):
        if not factor > 0 or window < 1:
            raise PreconditionError("Clip factor must be positive, and "
                                    "window at least 1")

        self.factor = float(factor)
        self.window = int(window)


class GradientClipper(object):
    """
    Tracks recent gradient norms and scales down any gradient longer than
    ``factor`` times their median
    """

    def __init__(self, clip=None):
        self.clip = clip or ClipConfig()
        self._norms = deque(maxlen=self.clip.window)

    def __call__(self, grad):
        """ The possibly scaled gradient, and whether it was clipped """
        norm = float(np.linalg.norm(grad))
        clipped = False
        if self._norms:
            cap = self.clip.factor * float(np.median(self._norms))
            if norm > cap > 0:
                grad = grad * (cap / norm)
                clipped = True

        self._norms.append(norm)
        return grad, clipped


class AdamState(object):
    """ Adam moments for one flat parameter vector """

    def __init__(self, size, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.count = 0
        self._first = np.zeros(size)
        self._second = np.zeros(size)

    def step(self, grad):
        """ The parameter update for ``grad`` """
        self.count += 1
        self._first = self.beta1 * self._first + (1 - self.beta1) * grad
        self._second = self.beta2 * self._second + \
            (1 - self.beta2) * grad ** 2
        first = self._first / (1 - self.beta1 ** self.count)
        second = self._second / (1 - self.beta2 ** self.count)
        return -self.lr * first / (np.sqrt(second) + self.eps)


class TrainConfig(object):
    """ Toy training settings """
    FIELDS = ('steps', 'lr', 'clip', 'beta', 'w_min', 'representation',
              'distribution', 'terms', 'detach_residuals', 'detach_weights')

    def __init__(self,
                 steps=500,
                 lr=0.02,
                 clip=None,
                 beta=0.02,
                 w_min=1e-3,
                 representation=RepresentationKind.corners3d,
                 distribution=Distribution.laplace,
                 terms=ALL_TERMS,
                 detach_residuals=False,
                 detach_weights=False,
                 ):
        errors = []
        if steps < 0:
            errors.append("steps must be non-negative")
        if not lr > 0:
            errors.append("lr must be positive")
        if beta < 0:
            errors.append("beta must be non-negative")
        if not w_min > 0:
            errors.append("w_min must be positive")
        if not terms:
            errors.append("terms must name at least one loss term")
        if errors:
            raise ValidationError(errors)

        self.steps = int(steps)
        self.lr = float(lr)
        self.clip = clip or ClipConfig()
        self.beta = float(beta)
        self.w_min = float(w_min)
        self.representation = RepresentationKind(representation)
        self.distribution = Distribution(distribution)
        self.terms = tuple(LossTerm(term) for term in terms)
        self.detach_residuals = bool(detach_residuals)
        self.detach_weights = bool(detach_weights)

    def loss_config(self, bbox, intrinsics):
        """ ``LossConfig`` for the LC part of the toy losses """
        return LossConfig(PoseRepresentation(self.representation,
                                             bbox,
                                             intrinsics),
                          self.distribution,
                          terms=self.terms,
                          detach_residuals=self.detach_residuals,
                          detach_weights=self.detach_weights)

    def replace(self, **kwargs):
        """ A validated copy with ``kwargs`` changed """
        values = {name: getattr(self, name) for name in self.FIELDS}
        values.update(kwargs)
        return TrainConfig(**values)


class TrainTrace(object):
    """ Per-step records, and the final correspondence state """

    def __init__(self, loss_kind, records, final_x, final_w):
        self.loss_kind = loss_kind
        self.records = records
        self.final_x = final_x
        self.final_w = final_w

    def mean_correctness(self, last=100):
        """ Mean correctness over the last ``last`` records """
        values = [record.correctness for record in self.records[-last:]]
        if not values or np.all(np.isnan(values)):
            return np.nan
        return float(np.nanmean(values))

    @property
    def failures(self):
        """ Steps whose loss could not be evaluated """
        return sum(1 for record in self.records if record.failed)

    def to_csv(self):
        """ CSV with 17 significant digits per float """
        handle = io.StringIO()
        handle.write(','.join(CSV_COLUMNS) + '\n')
        for record in self.records:
            handle.write('%d,%s\n' % (record.step, ','.join(
                '%.17g' % getattr(record, column)
                for column in CSV_COLUMNS[1:]
            )))
        return handle.getvalue()

    def summary(self):
        """ JSON-ready summary of the run """
        first, last = self.records[0], self.records[-1]
        return {
            'loss_kind': self.loss_kind.value,
            'steps': len(self.records) - 1,
            'failures': self.failures,
            'mean_correctness_last_100': self.mean_correctness(100),
            'initial': {'rot_err_deg': first.rot_err_deg,
                        'trans_err': first.trans_err,
                        'add': first.add},
            'final': {'rot_err_deg': last.rot_err_deg,
                      'trans_err': last.trans_err,
                      'add': last.add},
        }


def _surrogate(corrs, x_p):
    """ Sum of absolute residual components """
    residuals = corrs.x - x_p
    return LossEvaluation(float(np.sum(np.abs(residuals))),
                          np.sign(residuals),
                          np.zeros_like(corrs.w))


def _lc(corrs, y_gt, loss_cfg):
    """ The LC loss """
    breakdown = lc_loss(corrs, y_gt, loss_cfg)
    return LossEvaluation(breakdown.l_lc, breakdown.grad_x, breakdown.grad_w)


def _bpnp(corrs, y_gt, rep):
    """
    Representation error of the solved pose, differentiated through the
    optimality condition at the solution
    """
    try:
        solved = solve_weighted(corrs, y_gt).pose
    except LcPnpError as ex:
        raise SolverFailureError(ex)

    target = represent(LocalPose6.zero(y_gt), rep).values
    current = represent(LocalPose6.zero(solved), rep)
    diff = current.values - target
    value = float(np.linalg.norm(diff))
    if value == 0:
        return LossEvaluation(0.0, np.zeros_like(corrs.x),
                              np.zeros_like(corrs.w))

    grad6 = current.jac.T @ (diff / value)
    lin = linearize_at(corrs, solved)
    directions = np.linalg.solve(lin.H, lin.jac.T).T @ grad6
    return LossEvaluation(value,
                          lin.A.T @ grad6,
                          2.0 * corrs.w * lin.r_gt * directions)


def evaluate_loss(loss_kind, corrs, scene, loss_cfg, x_p, beta):
    """ Value and gradients of one of the toy losses """
    if loss_kind is LossKind.surrogate:
        return _surrogate(corrs, x_p)
    if loss_kind is LossKind.lc:
        return _lc(corrs, scene.y_gt, loss_cfg)
    if loss_kind is LossKind.bpnp:
        return _bpnp(corrs, scene.y_gt, loss_cfg.representation)

    surrogate = _surrogate(corrs, x_p)
    lc_part = _lc(corrs, scene.y_gt, loss_cfg)
    return LossEvaluation(surrogate.value + beta * lc_part.value,
                          surrogate.grad_x + beta * lc_part.grad_x,
                          surrogate.grad_w + beta * lc_part.grad_w)


def _record(step, scene, corrs, x_p, diameter, evaluation, failed):
    """ Trace record for the current state """
    logger = logging.getLogger('lcpnp.harness.train')
    correctness = np.nan
    if not failed:
        try:
            correctness = gradient_correctness(corrs, evaluation.grad_x, x_p)
        except AllResidualsZeroError:
            pass

    try:
        pose = solve_weighted(corrs, scene.y_gt).pose
    except LcPnpError as ex:
        logger.warning("Step %d: pose solve failed: %s", step, ex)
        rot_err = trans_err = add = np.nan
    else:
        rot_err, trans_err = pose_errors(pose, scene.y_gt)
        add = add_metrics(pose, scene.y_gt, scene.model_points,
                          diameter).add

    return TrainRecord(step,
                       np.nan if failed else evaluation.value,
                       correctness,
                       rot_err,
                       trans_err,
                       add,
                       failed)


def toy_train(scene, loss_kind, steps=None, lr=None, clip=None, cfg=None):
    """
    Descend a loss on the scene's 2D locations and weights with Adam. The
    gradient is clipped against its running median; when the loss can not be
    evaluated the previous clipped gradient is reused and the step is marked
    failed. Records the initial state and every step after it
    """
    logger = logging.getLogger('lcpnp.harness.train')
    cfg = cfg or TrainConfig()
    loss_kind = LossKind(loss_kind)
    steps = cfg.steps if steps is None else steps
    if steps < 0:
        raise PreconditionError("steps must be non-negative")

    intrinsics = scene.corrs.intrinsics
    loss_cfg = cfg.loss_config(scene.bbox, intrinsics)
    x_p = project_points(scene.corrs.points3d,
                         scene.y_gt,
                         intrinsics).uv.ravel()
    diameter = object_diameter(scene.model_points)

    corrs = scene.corrs
    size = len(corrs.x)
    clipper = GradientClipper(clip or cfg.clip)
    adam = AdamState(2 * size, cfg.lr if lr is None else lr)
    previous = np.zeros(2 * size)

    records = []
    for step in range(steps + 1):
        try:
            evaluation = evaluate_loss(loss_kind, corrs, scene, loss_cfg,
                                       x_p, cfg.beta)
            grad = np.concatenate([evaluation.grad_x, evaluation.grad_w])
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError()
            failed = False
        except (LcPnpError, np.linalg.LinAlgError) as ex:
            logger.warning("Step %d: %s loss failed: %s",
                           step, loss_kind.value, ex)
            evaluation = LossEvaluation(np.nan, previous[:size],
                                        previous[size:])
            failed = True

        records.append(_record(step, scene, corrs, x_p, diameter,
                               evaluation, failed))
        if step == steps:
            break

        if failed:
            grad = previous
        else:
            grad, clipped = clipper(grad)
            if clipped:
                logger.debug("Step %d: gradient clipped", step)

        previous = grad
        update = adam.step(grad)
        corrs = corrs.with_x(corrs.x + update[:size]).with_w(
            np.maximum(corrs.w + update[size:], cfg.w_min)
        )

    return TrainTrace(loss_kind, records, corrs.x.copy(), corrs.w.copy())


def _sweep_task(scene_cfg, index, loss_kind, cfg):
    """ One scene, one loss """
    scene_seed = scene_cfg.seed ^ index
    scene = gen_scene(scene_cfg.replace(seed=scene_seed))
    trace = toy_train(scene, loss_kind, cfg=cfg)
    return SweepRow(scene_seed,
                    LossKind(loss_kind).value,
                    trace.mean_correctness(100),
                    trace.records[0].rot_err_deg,
                    trace.records[-1].rot_err_deg,
                    trace.failures)


def correctness_sweep(scene_cfg, n_scenes, loss_kinds=(LossKind.lc,
                                                       LossKind.bpnp),
                      cfg=None, workers=None):
    """
    ``toy_train`` every loss on ``n_scenes`` scenes seeded
    ``scene_cfg.seed ^ index``. Rows come back in (scene, loss) order
    """
    logger = logging.getLogger('lcpnp.harness.train')
    if n_scenes < 1:
        raise PreconditionError("n_scenes must be at least 1")

    tasks = [(index, LossKind(kind))
             for index in range(n_scenes)
             for kind in loss_kinds]
    logger.info("Correctness sweep: %d tasks", len(tasks))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(
            lambda task: _sweep_task(scene_cfg, task[0], task[1], cfg),
            tasks,
        ))

    return rows
