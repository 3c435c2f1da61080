"""Hand/brute-force oracle values for every objective."""

import math

import numpy as np
import pytest
import torch

from sketchsynth.losses import (
    LossReport,
    TripletMargins,
    UniformTarget,
    ae_total,
    content_declass_loss,
    content_triplet,
    refiner_d_loss,
    refiner_g_loss,
    style_class_loss,
    style_triplet,
    tom_d_loss,
    tom_g_loss,
)
from sketchsynth.ops import gram_matrix


def const_scores(value):
    def fn(grams):
        return torch.full((len(grams),), float(value))
    return fn


def some_grams(n=3, c=2, seed=0):
    rng = np.random.default_rng(seed)
    return [gram_matrix(torch.tensor(rng.standard_normal((c, 3, 3)))) for _ in range(n)]


class TestTomDLoss:
    def test_perfect_discriminator(self):
        # D(real)=1 and D(fake)=0 -> loss 0 (clamped logs stay within 1e-6)
        real = some_grams(seed=2)
        fake = some_grams(seed=3)

        def fn(grams):
            return torch.ones(len(grams)) if grams is real else torch.zeros(len(grams))

        rep = tom_d_loss(real, fake, fn)
        assert abs(float(rep.total)) < 1e-6
        assert abs(float(rep.terms["d_real"])) < 1e-6
        assert abs(float(rep.terms["d_fake"])) < 1e-6

    def test_coin_flip_scores(self):
        rep = tom_d_loss(some_grams(), some_grams(seed=1), const_scores(0.5))
        assert math.isclose(float(rep.total), 2 * math.log(2), rel_tol=0, abs_tol=1e-6)

    def test_out_of_range_scores_stabilized(self):
        for v in (-3.0, 0.0, 1.0, 17.0):
            rep = tom_d_loss(some_grams(), some_grams(seed=1), const_scores(v))
            assert math.isfinite(float(rep.total))

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            tom_d_loss([], some_grams(), const_scores(0.5))


class TestTomGLoss:
    def test_perfect_match(self):
        f = torch.randn(2, 3, 3)
        rep = tom_g_loss(torch.tensor([0.5, 0.5]), f, f.clone())
        assert float(rep.terms["match"]) == 0.0

    def test_constant_residual(self):
        f = torch.zeros(2, 3, 3)
        rep = tom_g_loss(torch.tensor([0.5]), f + 2.0, f)
        assert math.isclose(float(rep.terms["match"]), 4.0, abs_tol=1e-6)

    def test_fooled_discriminator(self):
        f = torch.randn(1, 2, 2)
        rep = tom_g_loss(torch.ones(4), f, f.clone())
        assert abs(float(rep.terms["adv"])) < 1e-6

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            tom_g_loss(torch.ones(1), torch.zeros(2, 3, 3), torch.zeros(2, 3, 4))


class TestStyleTriplet:
    M = TripletMargins(alpha=0.3, beta=0.5)

    def test_anchor_equals_positive(self):
        t = torch.tensor([1.0, 0.0])
        neg = torch.tensor([0.0, 1.0])
        # cos(t,org)=1, cos(t,neg)=0 -> max(0-1+0.3, 0) = 0
        assert float(style_triplet(t, t.clone(), neg, self.M)) == 0.0

    def test_anchor_equals_negative(self):
        t = torch.tensor([1.0, 0.0])
        org = torch.tensor([0.0, 1.0])
        # cos(t,neg)=1, cos(t,org)=0 -> max(1-0+0.3, 0) = 1.3
        assert math.isclose(float(style_triplet(t, org, t.clone(), self.M)), 1.3, abs_tol=1e-6)

    def test_degenerate_pos_equals_neg(self):
        t = torch.tensor([1.0, 2.0])
        other = torch.tensor([2.0, -1.0])
        m = TripletMargins(alpha=0.0)
        assert float(style_triplet(t, other, other.clone(), m)) == 0.0

    def test_paper_sign_flips_orientation(self):
        t = torch.tensor([1.0, 0.0])
        neg = torch.tensor([0.0, 1.0])
        val = style_triplet(t, t.clone(), neg, self.M, paper_sign=True)
        assert math.isclose(float(val), 1.3, abs_tol=1e-6)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            style_triplet(torch.zeros(3), torch.ones(3), torch.ones(3), self.M)

    def test_bounded(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, b, c = (torch.tensor(rng.standard_normal(8)) for _ in range(3))
            v = float(style_triplet(a, b, c, self.M))
            assert 0.0 <= v <= 2.0 + self.M.alpha


class TestContentTriplet:
    M = TripletMargins(beta=0.5)

    def test_anchor_equals_positive(self):
        t = torch.randn(2, 3, 3)
        neg = t + 2.0
        m = TripletMargins(beta=0.0)
        assert float(content_triplet(t, t.clone(), neg, m)) == 0.0

    def test_hand_distances(self):
        # d_pos = 1, d_neg = 0.2, beta = 0.5 -> 1.3
        t = torch.zeros(1, 2, 2)
        pos = torch.ones(1, 2, 2)                      # mean sq dist 1
        neg = torch.full((1, 2, 2), math.sqrt(0.2))    # mean sq dist 0.2
        assert math.isclose(float(content_triplet(t, pos, neg, self.M)), 1.3, abs_tol=1e-6)

    def test_pos_equals_neg_gives_margin(self):
        t = torch.randn(1, 2, 2)
        p = torch.randn(1, 2, 2)
        assert math.isclose(float(content_triplet(t, p, p.clone(), self.M)), 0.5, abs_tol=1e-6)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes"):
            content_triplet(torch.zeros(1, 2, 2), torch.zeros(1, 2, 3), torch.zeros(1, 2, 2), self.M)


class TestStyleClassLoss:
    def test_uniform_prediction(self):
        for k in (2, 5, 10):
            v = float(style_class_loss(torch.zeros(k), 0))
            assert math.isclose(v, math.log(k), abs_tol=1e-6)

    def test_saturated_correct(self):
        logits = torch.zeros(4)
        logits[2] = 1e6
        assert float(style_class_loss(logits, 2)) < 1e-6

    def test_hand_softmax(self):
        v = float(style_class_loss(torch.tensor([1.0, 0.0]), 0))
        assert math.isclose(v, -math.log(math.e / (math.e + 1)), abs_tol=1e-6)

    def test_out_of_range_label_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            style_class_loss(torch.zeros(3), 3)


class TestContentDeclassLoss:
    def test_uniform_logits(self):
        t = UniformTarget(k=4)
        assert float(content_declass_loss(torch.ones(4) * 3.7, t)) == 0.0

    def test_hand_computed(self):
        t = UniformTarget(k=2)
        v = float(content_declass_loss(torch.tensor([math.log(3.0), 0.0]), t))
        # softmax = [0.75, 0.25]; (0.25)^2 + (0.25)^2 = 0.125
        assert math.isclose(v, 0.125, abs_tol=1e-6)

    def test_gradient_zero_at_uniform(self):
        t = UniformTarget(k=3)
        logits = torch.zeros(3, requires_grad=True)
        content_declass_loss(logits, t).backward()
        assert torch.allclose(logits.grad, torch.zeros(3))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="class count"):
            content_declass_loss(torch.zeros(3), UniformTarget(k=4))

    def test_uniform_target_fields(self):
        t = UniformTarget(k=5)
        assert torch.allclose(t.v.sum(), torch.tensor(1.0))
        assert torch.allclose(t.v, torch.full((5,), 0.2))
        with pytest.raises(ValueError):
            UniformTarget(k=1)


class TestAeTotal:
    PARTS = {
        "content_triplet": torch.tensor(0.1),
        "style_triplet": torch.tensor(0.2),
        "style_class": torch.tensor(0.3),
        "content_declass": torch.tensor(0.4),
    }

    def test_all_zero(self):
        img = torch.randn(3, 4, 4)
        zeros = {k: torch.tensor(0.0) for k in self.PARTS}
        rep = ae_total(img, img.clone(), zeros)
        assert float(rep.total) == 0.0

    def test_constant_offset_mse(self):
        img = torch.zeros(3, 4, 4)
        zeros = {k: torch.tensor(0.0) for k in self.PARTS}
        rep = ae_total(img + 1.0, img, zeros)
        assert math.isclose(float(rep.terms["recon"]), 1.0, abs_tol=1e-6)

    def test_sum_of_parts(self):
        img = torch.randn(3, 4, 4)
        rep = ae_total(img, img.clone(), self.PARTS)
        assert math.isclose(float(rep.total), 1.0, abs_tol=1e-6)

    def test_total_is_sum_of_terms(self):
        img = torch.randn(3, 4, 4)
        rep = ae_total(img + 0.3, img, self.PARTS)
        assert math.isclose(float(rep.total), sum(rep.scalars()[k] for k in rep.terms), abs_tol=1e-6)

    def test_missing_term_rejected(self):
        img = torch.randn(3, 4, 4)
        parts = dict(self.PARTS)
        del parts["style_class"]
        with pytest.raises(ValueError, match="missing"):
            ae_total(img, img, parts)

    def test_weights_applied(self):
        img = torch.randn(3, 4, 4)
        rep = ae_total(img, img.clone(), self.PARTS, weights={"style_triplet": 2.0})
        assert math.isclose(float(rep.terms["style_triplet"]), 0.4, abs_tol=1e-6)


class TestRefinerDLoss:
    def test_margins_satisfied(self):
        assert float(refiner_d_loss(torch.ones(3), -torch.ones(3))) == 0.0

    def test_zero_scores(self):
        assert math.isclose(float(refiner_d_loss(torch.zeros(2), torch.zeros(2))), 2.0, abs_tol=1e-6)

    def test_saturated(self):
        assert float(refiner_d_loss(torch.full((2,), 5.0), torch.full((2,), -5.0))) == 0.0

    def test_nonnegative(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            r = torch.tensor(rng.standard_normal(4))
            f = torch.tensor(rng.standard_normal(4))
            assert float(refiner_d_loss(r, f)) >= 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            refiner_d_loss(torch.zeros(0), torch.zeros(2))


class TestRefinerGLoss:
    def test_perfect(self):
        img = torch.randn(3, 4, 4)
        rep = refiner_g_loss(torch.zeros(2), img, img.clone())
        assert float(rep.total) == 0.0

    def test_hand_computed(self):
        # mse = 0.5, lam = 10, mean score 1 -> -1 + 5 = 4
        out = torch.zeros(1, 2, 2)
        target = torch.full((1, 2, 2), math.sqrt(0.5))
        rep = refiner_g_loss(torch.ones(3), out, target, lam=10.0)
        assert math.isclose(float(rep.total), 4.0, abs_tol=1e-6)
        assert math.isclose(float(rep.terms["rec"]), 5.0, abs_tol=1e-6)

    def test_lambda_zero_pure_adversarial(self):
        out = torch.zeros(1, 2, 2)
        target = torch.ones(1, 2, 2)
        rep = refiner_g_loss(torch.full((2,), 3.0), out, target, lam=0.0)
        assert math.isclose(float(rep.total), -3.0, abs_tol=1e-6)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes"):
            refiner_g_loss(torch.ones(1), torch.zeros(1, 2, 2), torch.zeros(1, 2, 3))


class TestLossReport:
    def test_total_equals_sum(self):
        rep = LossReport.from_terms({"a": torch.tensor(1.5), "b": torch.tensor(-0.5)})
        assert math.isclose(float(rep.total), 1.0, abs_tol=1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            LossReport.from_terms({"a": torch.tensor(float("nan"))})

    def test_scalars_view(self):
        rep = LossReport.from_terms({"a": torch.tensor(2.0)})
        s = rep.scalars()
        assert s == {"a": 2.0, "total": 2.0}
