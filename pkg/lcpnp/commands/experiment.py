""" Commands that run the solver, loss and harness experiments """
import logging

import click
import numpy as np

from lcpnp.cli import CLI, CONFIG
from lcpnp.covariance import pose_cov_from_linearization
from lcpnp.encoding import encode_points, principal_axis_align
from lcpnp.exceptions import UsageError, ValidationError
from lcpnp.geometry import PoseRepresentation, RepresentationKind
from lcpnp.harness.averaging import averaging_demo
from lcpnp.harness.montecarlo import monte_carlo_pose_cov
from lcpnp.harness.scene import SceneConfig, SceneSample, gen_scene
from lcpnp.harness.train import LossKind, correctness_sweep, toy_train
from lcpnp.linearize import HuberConfig, linearize_at_gt
from lcpnp.loss import (ALL_TERMS,
                        Distribution,
                        LossConfig,
                        LossTerm,
                        lc_loss,
                        )
from lcpnp.pnp import coarse_pose, solve_ransac, solve_weighted
from lcpnp.scene_io import read_scene
from lcpnp.util import (dumps_json,
                        float_list,
                        guess_multi_value,
                        load_document,
                        write_atomic,
                        )


REPRESENTATION_CHOICE = click.Choice([kind.value
                                      for kind in RepresentationKind])
DISTRIBUTION_CHOICE = click.Choice([dist.value for dist in Distribution])


def parse_terms(text):
    """ Loss terms from a comma separated list of names """
    try:
        return tuple(LossTerm(name) for name in guess_multi_value(text))
    except ValueError:
        raise UsageError("Unknown loss term in '%s'; choose from %s" % (
            text, ', '.join(term.value for term in LossTerm),
        ))


def emit(text, output):
    """ Write ``text`` atomically to ``output``, or echo it """
    if output is None:
        click.echo(text, nl=False)
    else:
        write_atomic(output, text)
        logging.getLogger('lcpnp.cli').info("Wrote %s", output)


def scene_config(config_path, seed):
    """ Scene config from an optional document, with an optional seed """
    if config_path is None:
        cfg = SceneConfig()
    else:
        cfg = SceneConfig.from_dict(load_document(config_path))

    if seed is not None:
        cfg = cfg.replace(seed=seed)

    return cfg


def require_gt(document, path):
    """ Raise unless the scene document has a ground-truth pose """
    if document.y_gt is None:
        raise ValidationError("'%s' has no gt_pose" % path)


@CLI.command()
@click.option('--input', 'input_path', required=True,
              type=click.Path(dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False))
@click.option('--ransac', is_flag=True,
              help="Initialize with RANSAC instead of the coarse pose")
def solve(input_path, output, ransac):
    """ Solve weighted PnP for a scene document """
    document = read_scene(input_path)
    solver_cfg = CONFIG.solver_config()

    result_doc = {}
    if ransac:
        consensus = solve_ransac(document.corrs,
                                 CONFIG.ransac_params(),
                                 solver_cfg)
        init = consensus.pose
        result_doc['inliers'] = consensus.inlier_mask.tolist()
        corrs = document.corrs.subset(consensus.inlier_mask)
    else:
        init = coarse_pose(document.corrs)
        corrs = document.corrs

    result = solve_weighted(corrs, init, solver_cfg)
    result_doc.update({
        'pose': result.pose.as_dict(),
        'iters': result.iters,
        'final_nll': result.final_nll,
        'converged': result.converged,
    })
    if document.y_gt is not None:
        result_doc['rot_err_deg'] = float(
            result.pose.rotation_error_deg(document.y_gt)
        )
        result_doc['trans_err'] = result.pose.translation_error(document.y_gt)

    emit(dumps_json(result_doc), output)


@CLI.command()
@click.option('--input', 'input_path', required=True,
              type=click.Path(dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False))
@click.option('--representation', type=REPRESENTATION_CHOICE,
              default=RepresentationKind.corners3d.value)
@click.option('--distribution', type=DISTRIBUTION_CHOICE,
              default=Distribution.laplace.value)
@click.option('--sqrt-eps', type=float, default=1e-12)
@click.option('--huber-delta', type=float,
              help="Fixed Huber delta; enables the cap")
@click.option('--terms', default=','.join(term.value for term in ALL_TERMS),
              help="Comma separated loss terms to keep")
@click.option('--detach-residuals', is_flag=True,
              help="Cut the residuals out of the covariance term")
@click.option('--detach-weights', is_flag=True,
              help="Cut the weights out of the covariance term")
def loss(input_path, output, representation, distribution, sqrt_eps,
         huber_delta, terms, detach_residuals, detach_weights):
    """ LC loss terms and gradients at the ground-truth pose """
    terms = parse_terms(terms)
    document = read_scene(input_path)
    require_gt(document, input_path)

    rep = PoseRepresentation(representation,
                             document.bbox,
                             document.corrs.intrinsics)
    huber = None if huber_delta is None else HuberConfig(delta=huber_delta)
    breakdown = lc_loss(document.corrs,
                        document.y_gt,
                        LossConfig(rep, distribution, sqrt_eps, huber,
                                   terms=terms,
                                   detach_residuals=detach_residuals,
                                   detach_weights=detach_weights))

    emit(dumps_json({
        'e_cov': breakdown.e_cov,
        'e_prior': breakdown.e_prior,
        'e_linear': breakdown.e_linear,
        'l_lc': breakdown.l_lc,
        'grad_w': breakdown.grad_w.tolist(),
        'grad_x': breakdown.grad_x.tolist(),
    }), output)


@CLI.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help="Scene config document")
@click.option('--seed', type=int)
@click.option('--loss-kind', type=click.Choice([kind.value
                                                for kind in LossKind]),
              default=LossKind.lc.value)
@click.option('--steps', type=click.IntRange(min=0))
@click.option('--output', '-o', type=click.Path(dir_okay=False))
@click.option('--summary', 'summary_path', type=click.Path(dir_okay=False),
              help="Write the run summary JSON here")
def simulate(config_path, seed, loss_kind, steps, output, summary_path):
    """ Toy training on a synthetic scene; emits the trace CSV """
    scene = gen_scene(scene_config(config_path, seed))
    trace = toy_train(scene, loss_kind, steps=steps,
                      cfg=CONFIG.train_config())

    emit(trace.to_csv(), output)
    if summary_path is not None:
        write_atomic(summary_path, dumps_json(trace.summary()))


@CLI.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help="Scene config document")
@click.option('--seed', type=int)
@click.option('--scenes', type=click.IntRange(min=1), default=20)
@click.option('--steps', type=click.IntRange(min=0))
@click.option('--output', '-o', type=click.Path(dir_okay=False))
def correctness(config_path, seed, scenes, steps, output):
    """ Gradient correctness of the LC and BPnP-style losses over scenes """
    train_cfg = CONFIG.train_config()
    if steps is not None:
        train_cfg = train_cfg.replace(steps=steps)

    rows = correctness_sweep(scene_config(config_path, seed),
                             scenes,
                             (LossKind.lc, LossKind.bpnp),
                             train_cfg,
                             CONFIG.threads)

    lines = ['scene_seed,loss_kind,mean_correctness,initial_rot_err_deg,'
             'final_rot_err_deg,failures']
    for row in rows:
        lines.append('%d,%s,%.17g,%.17g,%.17g,%d' % row)

    emit('\n'.join(lines) + '\n', output)


@CLI.command('mc-cov')
@click.option('--input', 'input_path', type=click.Path(dir_okay=False),
              help="Scene document with gt_pose; a synthetic scene otherwise")
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help="Scene config document")
@click.option('--seed', type=int, default=0)
@click.option('--sigma', type=float, default=0.5)
@click.option('--samples', type=int, default=20000)
@click.option('--output', '-o', type=click.Path(dir_okay=False))
def mc_cov(input_path, config_path, seed, sigma, samples, output):
    """ Monte-Carlo pose covariance against the analytic one """
    if input_path is not None:
        document = read_scene(input_path)
        require_gt(document, input_path)
        scene = SceneSample(document.corrs, document.y_gt, document.bbox,
                            document.corrs.points3d, None)
    else:
        scene = gen_scene(scene_config(config_path, seed))

    empirical = monte_carlo_pose_cov(scene, sigma, samples, seed,
                                     workers=CONFIG.threads,
                                     solver_cfg=CONFIG.solver_config())

    lin = linearize_at_gt(scene.corrs, scene.y_gt)
    analytic = pose_cov_from_linearization(
        lin._replace(r_gt=np.full_like(lin.r_gt, sigma))
    )
    rel_error = float(np.linalg.norm(empirical.cov - analytic) /
                      max(np.linalg.norm(analytic), 1e-300))

    emit(dumps_json({
        'empirical': empirical.cov.tolist(),
        'analytic': analytic.tolist(),
        'rel_frobenius': rel_error,
        'samples': empirical.samples,
        'skipped': empirical.skipped,
    }), output)


@CLI.command()
@click.option('--input', 'input_path', required=True,
              type=click.Path(dir_okay=False))
@click.option('--n-max', type=int, default=7)
@click.option('--align', is_flag=True,
              help="Align principal axes before encoding")
@click.option('--output', '-o', type=click.Path(dir_okay=False))
def encode(input_path, n_max, align, output):
    """ Binary-encode the 3D points of a scene document """
    points = read_scene(input_path).corrs.points3d
    result = {}
    if align:
        aligned = principal_axis_align(points)
        points = aligned.points
        result['rotation'] = aligned.rotation.tolist()
        result['center'] = aligned.center.tolist()

    encoded = encode_points(points, n_max)
    result['codecs'] = [{'c_min': codec.c_min,
                         'c_max': codec.c_max,
                         'n_bits': codec.n_bits}
                        for codec in encoded.codecs]
    result['bits'] = [''.join(str(bit) for bit in row)
                      for row in encoded.bits]

    emit(dumps_json(result), output)


@CLI.command('demo-averaging')
@click.option('--estimates', default='0.4,0.8',
              help="Comma separated estimates")
@click.option('--target', type=float, default=0.5)
@click.option('--output', '-o', type=click.Path(dir_okay=False))
def demo_averaging(estimates, target, output):
    """ Gradients of an L1 loss on the mean of two estimates """
    try:
        values = float_list(estimates)
    except ValueError:
        raise UsageError("Invalid value for '--estimates': "
                         "estimates must be numbers")

    result = averaging_demo(values, target)
    emit(dumps_json({'grads': list(result.grads),
                     'correct': list(result.correct)}), output)
