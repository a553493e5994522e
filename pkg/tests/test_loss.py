import numpy as np
import pytest

from lcpnp.exceptions import NonPositivePriorError, PreconditionError
from lcpnp.geometry import (LocalPose6,
                            PoseRepresentation,
                            RepresentationKind,
                            represent,
                            )
from lcpnp.harness.metrics import gradient_correctness
from lcpnp.harness.scene import SceneConfig, gen_scene
from lcpnp.linearize import HuberConfig, linearize_at_gt, predict_pose_linear
from lcpnp.loss import (Distribution,
                        LossConfig,
                        LossTerm,
                        corner_norm_mean,
                        frozen_lc_value,
                        group_reduce,
                        group_reduce_grad,
                        lc_combine,
                        lc_combine_grad,
                        lc_loss,
                        loss_terms,
                        )


TINY_EPS = 1e-30


@pytest.fixture
def loss_scene(rng):
    """ Small noisy scene with uneven weights """
    scene = gen_scene(SceneConfig(n_points=8, noise_px=1.0, seed=3))
    weights = rng.uniform(0.5, 1.5, size=scene.corrs.w.shape)
    return scene._replace(corrs=scene.corrs.with_w(weights))


def make_config(scene, kind, distribution=Distribution.laplace, **kwargs):
    """ ``LossConfig`` for a representation kind on ``scene`` """
    rep = PoseRepresentation(kind, scene.bbox, scene.corrs.intrinsics)
    return LossConfig(rep, distribution, **kwargs)


def assert_gradient(analytic, numeric):
    """ Agreement relative to the largest gradient component """
    scale = np.abs(numeric).max()
    assert scale > 0
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-5 * scale)


class TestReductions(object):
    """ Tests for the group reductions """
    def test_zeros(self):
        """ Zero diagonals reduce to zero without the stabilizer """
        assert corner_norm_mean(np.zeros(24), 3, 0.0) == 0.0

    def test_ones(self):
        """ Each corner of ones sums to 3 """
        assert corner_norm_mean(np.ones(24), 3, 0.0) == \
            pytest.approx(np.sqrt(3.0), abs=1e-12)

    def test_matches_loop(self, rng):
        """ Vectorized reduction agrees with an explicit loop """
        values = rng.uniform(0, 2, size=24)
        total = 0.0
        for corner in range(8):
            total += np.sqrt(sum(values[3 * corner:3 * corner + 3]) + 1e-12)

        assert corner_norm_mean(values, 3, 1e-12) == \
            pytest.approx(total / 8, abs=1e-12)

    def test_whole_vector_group(self):
        """ ``None`` groups every value together """
        assert corner_norm_mean([1.0, 3.0], None, 0.0) == 2.0

    def test_gaussian_sums(self):
        """ The Gaussian reduction is the mean group sum """
        assert group_reduce(np.arange(6.0), 2, Distribution.gaussian) == 5.0

    def test_uneven_groups(self):
        """ Values must split into whole groups """
        with pytest.raises(PreconditionError):
            corner_norm_mean(np.ones(7), 3)

    @pytest.mark.parametrize('distribution', list(Distribution))
    @pytest.mark.parametrize('group_size', [2, 3, None])
    def test_grad(self, fd, rng, distribution, group_size):
        """ Derivative matches differences """
        values = rng.uniform(0.5, 2, size=12)
        numeric = fd(
            lambda vals: group_reduce(vals, group_size, distribution),
            values, 1e-6,
        )
        assert np.allclose(group_reduce_grad(values, group_size,
                                             distribution),
                           numeric, rtol=1e-6, atol=1e-9)


class TestLcCombine(object):
    """ Tests for ``lc_combine`` """
    @pytest.mark.parametrize('e_cov,e_prior,e_linear,expected', [
        (0.0, 1.0, 0.0, 0.0),
        (1.0, 1.0, 1.0, 1.0),
        (np.e, np.e, np.e, 2.0),
    ])
    def test_values(self, e_cov, e_prior, e_linear, expected):
        """ Log prior, plus half the error sum over the prior """
        for distribution in Distribution:
            assert lc_combine(e_cov, e_prior, e_linear, distribution) == \
                pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize('e_prior', [0.0, -1.0])
    def test_non_positive_prior(self, e_prior):
        """ The prior term must be positive """
        with pytest.raises(NonPositivePriorError):
            lc_combine(1.0, e_prior, 1.0)

    def test_prior_stationary(self):
        """ Minimized over the prior at half the error sum """
        _, d_prior, _ = lc_combine_grad(0.7, 0.5 * (0.7 + 1.9), 1.9)
        assert d_prior == pytest.approx(0.0, abs=1e-12)

    def test_grad(self, fd):
        """ Partials match differences """
        point = np.array([0.3, 0.8, 0.5])
        numeric = fd(lambda vals: lc_combine(*vals), point, 1e-6)
        assert np.allclose(lc_combine_grad(*point), numeric, rtol=1e-6)


class TestLossTerms(object):
    """ Tests for ``loss_terms`` """
    def test_zero_residuals(self, loss_scene):
        """ Covariance, and linear terms vanish with the residuals """
        corrs = loss_scene.corrs
        lin = linearize_at_gt(corrs, loss_scene.y_gt)
        clean = linearize_at_gt(corrs.with_x(lin.x_p), loss_scene.y_gt)
        terms = loss_terms(clean, make_config(loss_scene,
                                              RepresentationKind.corners3d,
                                              sqrt_eps=TINY_EPS))
        assert terms.e_cov < 1e-9
        assert terms.e_linear < 1e-9
        assert terms.e_prior > 0

    def test_weight_scale(self, loss_scene):
        """ Scaling every weight by k scales only the prior, by 1/k """
        cfg = make_config(loss_scene, RepresentationKind.corners3d,
                          sqrt_eps=TINY_EPS)
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        base = loss_terms(linearize_at_gt(corrs, y_gt), cfg)
        scaled = loss_terms(linearize_at_gt(corrs.with_w(3.0 * corrs.w),
                                            y_gt), cfg)

        assert scaled.e_prior == pytest.approx(base.e_prior / 3.0, rel=1e-9)
        assert scaled.e_cov == pytest.approx(base.e_cov, rel=1e-9)
        assert scaled.e_linear == pytest.approx(base.e_linear, rel=1e-9)

    def test_linear_through_represent(self, loss_scene):
        """ Linear term agrees with the represented linear prediction """
        cfg = make_config(loss_scene, RepresentationKind.corners3d,
                          sqrt_eps=TINY_EPS)
        lin = linearize_at_gt(loss_scene.corrs, loss_scene.y_gt)
        rep = cfg.representation

        predicted = predict_pose_linear(lin).pose()
        error = represent(LocalPose6.zero(predicted), rep).values - \
            represent(LocalPose6.zero(loss_scene.y_gt), rep).values
        expected = corner_norm_mean(error ** 2, 3, TINY_EPS)

        assert loss_terms(lin, cfg).e_linear == \
            pytest.approx(expected, rel=1e-2)


class TestLcLoss(object):
    """ Tests for ``lc_loss`` """
    @pytest.mark.parametrize('distribution', list(Distribution))
    @pytest.mark.parametrize('kind', list(RepresentationKind))
    def test_grad_w(self, fd, loss_scene, kind, distribution):
        """ Weight gradient matches differences of the frozen loss """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, kind, distribution)
        breakdown = lc_loss(corrs, y_gt, cfg)

        numeric = fd(
            lambda w: frozen_lc_value(corrs.with_w(w), y_gt, cfg, corrs.x),
            corrs.w, 1e-4,
        )
        assert_gradient(breakdown.grad_w, numeric)

    @pytest.mark.parametrize('distribution', list(Distribution))
    @pytest.mark.parametrize('kind', list(RepresentationKind))
    def test_grad_x(self, fd, loss_scene, kind, distribution):
        """
        Location gradient matches differences of the frozen loss, where the
        linear term's residuals stay fixed
        """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, kind, distribution)
        breakdown = lc_loss(corrs, y_gt, cfg)

        numeric = fd(
            lambda x: frozen_lc_value(corrs.with_x(x), y_gt, cfg, corrs.x),
            corrs.x, 1e-3,
        )
        assert_gradient(breakdown.grad_x, numeric)

    @pytest.mark.parametrize('huber', [
        HuberConfig(delta=1.0),
        HuberConfig(scale=1.0, floor=0.1),
    ])
    def test_huber_grads(self, fd, loss_scene, huber):
        """ Gradients with capped weights, and residual variances """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, RepresentationKind.corners3d,
                          huber=huber)
        breakdown = lc_loss(corrs, y_gt, cfg)
        deltas = (huber.resolve(corrs.w),
                  huber.resolve(linearize_at_gt(corrs, y_gt).r_gt))

        numeric_w = fd(
            lambda w: frozen_lc_value(corrs.with_w(w), y_gt, cfg, corrs.x,
                                      deltas),
            corrs.w, 1e-4,
        )
        numeric_x = fd(
            lambda x: frozen_lc_value(corrs.with_x(x), y_gt, cfg, corrs.x,
                                      deltas),
            corrs.x, 1e-3,
        )
        assert_gradient(breakdown.grad_w, numeric_w)
        assert_gradient(breakdown.grad_x, numeric_x)

    def test_value(self, loss_scene):
        """ Scalars agree with the term, and combine helpers """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, RepresentationKind.corners2d)
        breakdown = lc_loss(corrs, y_gt, cfg)
        terms = loss_terms(linearize_at_gt(corrs, y_gt), cfg)

        assert breakdown.e_cov == pytest.approx(terms.e_cov, rel=1e-12)
        assert breakdown.e_prior == pytest.approx(terms.e_prior, rel=1e-12)
        assert breakdown.e_linear == \
            pytest.approx(terms.e_linear, rel=1e-12)
        assert breakdown.l_lc == pytest.approx(
            frozen_lc_value(corrs, y_gt, cfg, corrs.x), rel=1e-12,
        )

    def test_zero_residual_grad_x(self, loss_scene):
        """ The location gradient vanishes with the residuals """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        x_p = linearize_at_gt(corrs, y_gt).x_p
        breakdown = lc_loss(corrs.with_x(x_p), y_gt,
                            make_config(loss_scene,
                                        RepresentationKind.corners3d))
        assert np.all(breakdown.grad_x == 0)
        assert np.all(np.isfinite(breakdown.grad_w))

    @pytest.mark.parametrize('kind', list(RepresentationKind))
    def test_grad_x_sign(self, loss_scene, kind):
        """ Every location component is pushed toward its projection """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        breakdown = lc_loss(corrs, y_gt, make_config(loss_scene, kind))
        residuals = linearize_at_gt(corrs, y_gt).r_gt

        assert np.all(breakdown.grad_x * residuals >= 0)

        longest = np.linalg.norm(breakdown.grad_x.reshape(-1, 2),
                                 axis=1).max()
        x_p = corrs.x - residuals
        assert gradient_correctness(corrs, breakdown.grad_x, x_p,
                                    1e-3 / longest) == 1.0

    @pytest.mark.parametrize('kwargs', [
        {'sqrt_eps': 0.0},
        {'huber': {'delta': 1.0}},
    ])
    def test_config_invalid(self, loss_scene, kwargs):
        """ Stabilizer must be positive; Huber must be a config object """
        with pytest.raises(PreconditionError):
            make_config(loss_scene, RepresentationKind.corners3d, **kwargs)

    def test_config_needs_representation(self):
        """ Representation kinds alone are not enough """
        with pytest.raises(PreconditionError):
            LossConfig(RepresentationKind.quaternion)

    @pytest.mark.parametrize('term', ['colour', None])
    def test_config_terms_invalid(self, loss_scene, term):
        """ Terms must be known, and at least one is kept """
        terms = () if term is None else (term,)
        with pytest.raises(ValueError):
            make_config(loss_scene, RepresentationKind.corners3d,
                        terms=terms)


ABLATIONS = [
    {'detach_residuals': True},
    {'detach_weights': True},
    {'terms': (LossTerm.prior, LossTerm.linear)},
    {'terms': (LossTerm.cov, LossTerm.prior)},
    {'terms': ('cov', 'linear')},
]


class TestLcLossAblations(object):
    """ Tests for the detach, and term switches of ``lc_loss`` """
    def frozen(self, corrs, y_gt, cfg, base):
        """ Frozen loss, with detached inputs taken from ``base`` """
        return frozen_lc_value(corrs, y_gt, cfg, base.x, detached_w=base.w)

    @pytest.mark.parametrize('kwargs', ABLATIONS)
    def test_grad_w(self, fd, loss_scene, kwargs):
        """ Weight gradient matches differences of the frozen loss """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, RepresentationKind.corners3d, **kwargs)
        breakdown = lc_loss(corrs, y_gt, cfg)

        numeric = fd(
            lambda w: self.frozen(corrs.with_w(w), y_gt, cfg, corrs),
            corrs.w, 1e-4,
        )
        assert_gradient(breakdown.grad_w, numeric)

    @pytest.mark.parametrize('kwargs', [
        {'detach_weights': True},
        {'terms': (LossTerm.cov, LossTerm.prior)},
        {'terms': (LossTerm.cov, LossTerm.linear)},
    ])
    def test_grad_x(self, fd, loss_scene, kwargs):
        """ Location gradient matches differences of the frozen loss """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, RepresentationKind.corners3d, **kwargs)
        breakdown = lc_loss(corrs, y_gt, cfg)

        numeric = fd(
            lambda x: self.frozen(corrs.with_x(x), y_gt, cfg, corrs),
            corrs.x, 1e-3,
        )
        assert_gradient(breakdown.grad_x, numeric)

    @pytest.mark.parametrize('kwargs', [
        {'detach_residuals': True},
        {'terms': (LossTerm.prior, LossTerm.linear)},
    ])
    def test_no_grad_x(self, fd, loss_scene, kwargs):
        """ Without residuals in the covariance term, locations are free """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        cfg = make_config(loss_scene, RepresentationKind.corners3d, **kwargs)
        breakdown = lc_loss(corrs, y_gt, cfg)

        numeric = fd(
            lambda x: self.frozen(corrs.with_x(x), y_gt, cfg, corrs),
            corrs.x, 1e-3,
        )
        assert np.all(breakdown.grad_x == 0)
        assert np.allclose(numeric, 0.0, atol=1e-9)

    @pytest.mark.parametrize('kwargs', ABLATIONS)
    def test_value(self, loss_scene, kwargs):
        """ Terms are reported whole; the value binds only the kept ones """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        full = lc_loss(corrs, y_gt,
                       make_config(loss_scene, RepresentationKind.corners3d))
        cfg = make_config(loss_scene, RepresentationKind.corners3d, **kwargs)
        breakdown = lc_loss(corrs, y_gt, cfg)

        assert breakdown.e_cov == pytest.approx(full.e_cov, rel=1e-12)
        assert breakdown.e_prior == pytest.approx(full.e_prior, rel=1e-12)
        assert breakdown.l_lc == pytest.approx(
            self.frozen(corrs, y_gt, cfg, corrs), rel=1e-12,
        )

    def test_detached_matches_full(self, loss_scene):
        """ Detaching changes gradients, never the value """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        full = lc_loss(corrs, y_gt,
                       make_config(loss_scene, RepresentationKind.corners3d))
        detached = lc_loss(corrs, y_gt,
                           make_config(loss_scene,
                                       RepresentationKind.corners3d,
                                       detach_residuals=True,
                                       detach_weights=True))

        assert detached.l_lc == pytest.approx(full.l_lc, rel=1e-12)
        assert not np.allclose(detached.grad_w, full.grad_w)

    def test_no_prior(self, loss_scene):
        """ A dropped prior leaves half the sum of the other terms """
        corrs, y_gt = loss_scene.corrs, loss_scene.y_gt
        breakdown = lc_loss(corrs, y_gt,
                            make_config(loss_scene,
                                        RepresentationKind.corners3d,
                                        terms=('cov', 'linear')))

        assert breakdown.l_lc == pytest.approx(
            0.5 * (breakdown.e_cov + breakdown.e_linear), rel=1e-12,
        )
