"""
Coordinate-wise binary encoding of object coordinates, and the soft decode
that keeps exactly one bit probability unrounded
"""

from collections import namedtuple

import numpy as np

from lcpnp.exceptions import OutOfRangeError, PreconditionError


MAX_BITS = 16


AlignedPoints = namedtuple('AlignedPoints', ['points', 'rotation', 'center'])
EncodedPoints = namedtuple('EncodedPoints', ['codecs', 'bits'])


class ComponentCodec(object):
    """ Fixed-point binary codec for one coordinate axis """

    def __init__(self, c_min, c_max, n_bits):
        if not c_max > c_min:
            raise PreconditionError("c_max must be greater than c_min")
        if not 1 <= n_bits <= MAX_BITS:
            raise PreconditionError("n_bits must be in [1, %d]" % MAX_BITS)

        self.c_min = float(c_min)
        self.c_max = float(c_max)
        self.n_bits = int(n_bits)

    @classmethod
    def from_values(cls, values, n_bits):
        """ Codec spanning the range of ``values`` """
        values = np.asarray(values, dtype=float)
        return cls(values.min(), values.max(), n_bits)

    @property
    def levels(self):
        """ Largest encodable integer, ``2^n - 1`` """
        return 2 ** self.n_bits - 1

    @property
    def significance(self):
        """ Bit weights, MSB first """
        return 2.0 ** np.arange(self.n_bits - 1, -1, -1)

    def normalize(self, value):
        """ Scene units to ``[0, 2^n - 1]`` """
        if not self.c_min <= value <= self.c_max:
            raise OutOfRangeError(value, self.c_min, self.c_max)

        return (value - self.c_min) / (self.c_max - self.c_min) * self.levels

    def __repr__(self):
        return 'ComponentCodec(c_min=%r, c_max=%r, n_bits=%r)' % (
            self.c_min, self.c_max, self.n_bits,
        )


def allocate_bits(sizes, n_max):
    """
    Bits per axis: the largest extent gets ``n_max``, the others
    ``round(n_max + log2(size / largest))`` floored at 1. Halves round up

    Examples:

    >>> allocate_bits([80, 40, 10], 7)
    (7, 6, 4)
    """
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes <= 0):
        raise PreconditionError("Extents must be positive")
    if not 1 <= n_max <= MAX_BITS:
        raise PreconditionError("n_max must be in [1, %d]" % MAX_BITS)

    exact = n_max + np.log2(sizes / sizes.max())
    return tuple(int(max(1, np.floor(value + 0.5))) for value in exact)


def encode_component(value, codec):
    """
    Bits of the rounded normalized value, MSB first

    Examples:

    >>> encode_component(1.0, ComponentCodec(0.0, 1.0, 7)).tolist()
    [1, 1, 1, 1, 1, 1, 1]
    """
    integer = int(np.floor(codec.normalize(value) + 0.5))
    shifts = np.arange(codec.n_bits - 1, -1, -1)
    return (integer >> shifts) & 1


def decode_component(value, codec):
    """ Normalized value back to scene units """
    return codec.c_min + value / codec.levels * (codec.c_max - codec.c_min)


def _soft_bits(bit_probs, gt_bits):
    """
    The bit values used by the soft decode, and the index of the one left
    unrounded
    """
    probs = np.asarray(bit_probs, dtype=float).ravel()
    if probs.size == 0:
        raise PreconditionError("At least one bit is required")
    if np.any(probs < 0) or np.any(probs > 1):
        raise PreconditionError("Bit probabilities must be in [0, 1]")

    rounded = (probs >= 0.5).astype(float)
    if gt_bits is None:
        bits = rounded
        free = len(probs) - 1

    else:
        gt_bits = np.asarray(gt_bits).ravel()
        if gt_bits.shape != probs.shape:
            raise PreconditionError("Ground-truth bits must match the "
                                    "probabilities in length")
        if not np.all((gt_bits == 0) | (gt_bits == 1)):
            raise PreconditionError("Ground-truth bits must be 0, or 1")

        bits = gt_bits.astype(float)
        wrong = np.flatnonzero(rounded != bits)
        free = int(wrong[0]) if wrong.size else len(probs) - 1

    bits = bits.copy()
    bits[free] = probs[free]
    return bits, free


def decode_soft(bit_probs, gt_bits=None):
    """
    Soft decode to a normalized coordinate. With ground truth, the most
    significant mispredicted bit keeps its probability and every other bit
    takes its true value; when nothing is mispredicted, the LSB keeps its
    probability. Without ground truth all bits but the LSB are rounded

    Examples:

    >>> round(decode_soft([0.3, 0.9, 0.9], [1, 0, 0]), 12)
    1.2
    """
    bits, _ = _soft_bits(bit_probs, gt_bits)
    return float(bits @ (2.0 ** np.arange(len(bits) - 1, -1, -1)))


def decode_soft_grad(bit_probs, gt_bits=None):
    """ Derivative of ``decode_soft`` w.r.t. each probability """
    bits, free = _soft_bits(bit_probs, gt_bits)
    grad = np.zeros(len(bits))
    grad[free] = 2.0 ** (len(bits) - 1 - free)
    return grad


def principal_axis_align(points):
    """
    Rotate a point cloud so its principal axes lie along the coordinate axes,
    largest spread on x, and re-centre it on its bounding box. Returns the
    aligned points with the rotation and centre such that
    ``original = aligned @ rotation + center``
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 2:
        raise PreconditionError("At least two points are required")

    mean = points.mean(axis=0)
    centred = points - mean
    eigvals, eigvecs = np.linalg.eigh(np.cov(centred.T))
    rotation = eigvecs[:, np.argsort(eigvals)[::-1]].T
    if np.linalg.det(rotation) < 0:
        rotation[2] = -rotation[2]

    aligned = centred @ rotation.T
    middle = 0.5 * (aligned.min(axis=0) + aligned.max(axis=0))
    return AlignedPoints(aligned - middle, rotation, mean + middle @ rotation)


def encode_points(points, n_max):
    """
    Encode every point with one codec per axis spanning the cloud, bits
    allocated by extent. ``bits`` is (N, total bits) with x bits first
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    extents = points.max(axis=0) - points.min(axis=0)
    codecs = [ComponentCodec.from_values(points[:, axis], n_bits)
              for axis, n_bits in enumerate(allocate_bits(extents, n_max))]

    bits = np.array([
        np.concatenate([encode_component(point[axis], codec)
                        for axis, codec in enumerate(codecs)])
        for point in points
    ], dtype=int)
    return EncodedPoints(codecs, bits)
