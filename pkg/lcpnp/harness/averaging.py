"""
Two estimates averaged into one prediction, under an L1 loss: the smallest
case where a loss on the aggregate pushes one input away from its target
"""

from collections import namedtuple

import numpy as np


AveragingResult = namedtuple('AveragingResult', ['grads', 'correct'])


def averaging_demo(a_hats, target):
    """
    Subgradients of ``|mean(a_hats) - target|`` per estimate, and whether a
    small step against each one shrinks that estimate's own error. A zero
    gradient moves nothing, which counts as correct

    Examples:

    >>> averaging_demo((0.4, 0.8), 0.5)
    AveragingResult(grads=(0.5, 0.5), correct=(False, True))
    """
    a_hats = np.asarray(a_hats, dtype=float)
    grads = np.sign(a_hats.mean() - target) / len(a_hats) * \
        np.ones_like(a_hats)

    correct = []
    for estimate, grad in zip(a_hats, grads):
        correct.append(bool(grad == 0 or
                            np.sign(grad) == np.sign(estimate - target)))

    return AveragingResult(tuple(float(grad) for grad in grads),
                           tuple(correct))
