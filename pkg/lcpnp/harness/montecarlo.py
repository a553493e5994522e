"""
Empirical pose covariance of the weighted solver under resampled pixel noise
"""

import logging

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from lcpnp.exceptions import LcPnpError, PreconditionError
from lcpnp.geometry import project_points
from lcpnp.pnp import solve_weighted


CHUNK_SIZE = 500


MonteCarloCovariance = namedtuple('MonteCarloCovariance',
                                  ['cov', 'samples', 'skipped'])


def _chunks(samples):
    """ (index, count) of each fixed-size chunk """
    return [(index, min(CHUNK_SIZE, samples - start))
            for index, start in enumerate(range(0, samples, CHUNK_SIZE))]


def _run_chunk(scene, x_p, sigma_px, seed, index, count, solver_cfg):
    """ Solve ``count`` resampled scenes; returns increments and skip count """
    rng = np.random.default_rng(seed ^ index)
    increments = []
    skipped = 0
    for _ in range(count):
        noisy = x_p + rng.normal(0.0, sigma_px, size=x_p.shape)
        try:
            result = solve_weighted(scene.corrs.with_x(noisy),
                                    scene.y_gt,
                                    solver_cfg)
        except LcPnpError:
            skipped += 1
            continue

        increments.append(scene.y_gt.local_delta(result.pose))

    return np.reshape(increments, (-1, 6)), skipped


def monte_carlo_pose_cov(scene, sigma_px, samples, seed,
                         workers=None, solver_cfg=None):
    """
    Resample ``x = x_p + N(0, sigma^2)``, solve from the ground truth and
    take the covariance of the local increments. Samples are drawn in fixed
    chunks seeded ``seed ^ chunk`` so the result does not depend on
    ``workers``
    """
    logger = logging.getLogger('lcpnp.harness.montecarlo')
    if samples < 2:
        raise PreconditionError(
            "Monte-Carlo covariance needs at least 2 samples, got %d" % (
                samples,
            )
        )
    if sigma_px < 0:
        raise PreconditionError("sigma_px must be non-negative")

    x_p = project_points(scene.corrs.points3d,
                         scene.y_gt,
                         scene.corrs.intrinsics).uv.ravel()

    logger.info("Monte-Carlo covariance: %d samples, sigma %g px",
                samples, sigma_px)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_run_chunk, scene, x_p, sigma_px, seed,
                            index, count, solver_cfg)
            for index, count in _chunks(samples)
        ]
        results = [future.result() for future in futures]

    increments = np.vstack([chunk for chunk, _ in results])
    skipped = sum(count for _, count in results)
    if skipped:
        logger.warning("Skipped %d of %d samples after solver failures",
                       skipped, samples)

    if len(increments) < 2:
        raise PreconditionError("Fewer than 2 samples were solved")

    return MonteCarloCovariance(np.cov(increments.T),
                                len(increments),
                                skipped)
