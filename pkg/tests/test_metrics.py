"""Metric sanity: self-similarity, symmetry, monotonicity, report schema."""

import numpy as np
import pytest
import torch

from sketchsynth.autoencoder import AeConfig, AeModel, AeTrainer
from sketchsynth.metrics import evaluate_pairs, perceptual_distance, skt_rec, sty_rec
from sketchsynth.networks import FeatureExtractor, SketchDecoder
from sketchsynth.toydata import make_toy_image, make_toy_sketch
from test_autoencoder import toy_samples

AE_CFG = AeConfig(resolution=32, style_dim=64, content_channels=64, content_grid=8,
                  enc_base=8, dec_base=64, dec_min_width=8, batch_size=4,
                  class_count=2, seed=0)


@pytest.fixture(scope="module")
def extractor():
    return FeatureExtractor(3, (8, 16, 32), tap="block3", seed=0)


@pytest.fixture(scope="module")
def sketch_ref(extractor):
    torch.manual_seed(0)
    gen = SketchDecoder(extractor.tap_channels, 8, 32, base=16)
    gen.eval()
    return gen, extractor


@pytest.fixture(scope="module")
def ae_model():
    trainer = AeTrainer(AE_CFG, toy_samples(n=8, size=32, seed=11))
    for _ in range(3):
        trainer.step()
    return trainer.model


class TestSktRec:
    def test_round_trip_zero(self, sketch_ref):
        rng = np.random.default_rng(0)
        img = torch.tensor(make_toy_image(rng, 32))
        from sketchsynth.sketcher import sketchify
        sketch = sketchify(sketch_ref[0], sketch_ref[1], img[None])[0]
        assert skt_rec(sketch, img, sketch_ref) == 0.0

    def test_unrelated_image_scores_worse(self, sketch_ref):
        rng = np.random.default_rng(1)
        from sketchsynth.sketcher import sketchify
        img_a = torch.tensor(make_toy_image(rng, 32))
        img_b = torch.tensor(make_toy_image(rng, 32))
        sketch_a = sketchify(sketch_ref[0], sketch_ref[1], img_a[None])[0]
        paired = skt_rec(sketch_a, img_a, sketch_ref)
        unpaired = skt_rec(sketch_a, img_b, sketch_ref)
        assert paired < unpaired

    def test_missing_reference_rejected(self):
        with pytest.raises(ValueError, match="reference"):
            skt_rec(torch.zeros(1, 32, 32), torch.zeros(3, 32, 32), None)


class TestStyRec:
    def test_self_is_one(self, ae_model):
        rng = np.random.default_rng(2)
        img = make_toy_image(rng, 32)
        assert sty_rec(img, img.copy(), ae_model) == pytest.approx(1.0, abs=1e-6)

    def test_symmetric(self, ae_model):
        rng = np.random.default_rng(3)
        a = make_toy_image(rng, 32)
        b = make_toy_image(rng, 32)
        assert sty_rec(a, b, ae_model) == pytest.approx(sty_rec(b, a, ae_model), abs=1e-6)

    def test_bounded(self, ae_model):
        rng = np.random.default_rng(4)
        for _ in range(5):
            v = sty_rec(make_toy_image(rng, 32), make_toy_image(rng, 32), ae_model)
            assert -1.0 <= v <= 1.0

    def test_untrained_encoder_rejected(self):
        model = AeModel(AE_CFG)
        rng = np.random.default_rng(5)
        img = make_toy_image(rng, 32)
        with pytest.raises(ValueError, match="trained"):
            sty_rec(img, img, model)


class TestPerceptualDistance:
    def test_identity_zero(self, extractor):
        rng = np.random.default_rng(6)
        img = make_toy_image(rng, 32)
        assert perceptual_distance(img, img.copy(), extractor) == 0.0

    def test_symmetric(self, extractor):
        rng = np.random.default_rng(7)
        a, b = make_toy_image(rng, 32), make_toy_image(rng, 32)
        assert perceptual_distance(a, b, extractor) == pytest.approx(
            perceptual_distance(b, a, extractor), rel=1e-6)

    def test_monotone_in_noise(self, extractor):
        rng = np.random.default_rng(8)
        img = make_toy_image(rng, 32)
        noise = rng.standard_normal(img.shape).astype(np.float32)
        dists = [perceptual_distance(img, np.clip(img + amp * noise, -1, 1), extractor)
                 for amp in (0.05, 0.2, 0.8)]
        assert dists[0] < dists[1] < dists[2]

    def test_shape_mismatch_rejected(self, extractor):
        with pytest.raises(ValueError, match="differ"):
            perceptual_distance(np.zeros((3, 32, 32)), np.zeros((3, 16, 16)), extractor)

    def test_nonnegative(self, extractor):
        rng = np.random.default_rng(9)
        for _ in range(5):
            d = perceptual_distance(make_toy_image(rng, 32), make_toy_image(rng, 32), extractor)
            assert d >= 0.0


class TestEvaluatePairs:
    def test_report_schema(self, ae_model, sketch_ref, tmp_path):
        samples = toy_samples(n=4, size=32, seed=21)
        out = tmp_path / "report.json"
        report = evaluate_pairs(samples, ae_model, sketch_ref=sketch_ref,
                                checkpoint_ids={"ae": 3, "tom": 0}, out_path=out)
        assert out.exists()
        assert report["n_samples"] == 4
        assert set(report["means"]) == {"skt_rec", "sty_rec", "percep"}
        assert len(report["per_sample"]) == 4
        assert all({"id", "skt_rec", "sty_rec", "percep"} <= set(r) for r in report["per_sample"])
        assert "[-1,1]" in report["range_convention"]
        assert report["extractor_id"] == sketch_ref[1].extractor_id
        assert report["checkpoint_ids"] == {"ae": 3, "tom": 0}

    def test_unknown_metric_rejected(self, ae_model, sketch_ref):
        with pytest.raises(ValueError, match="unknown metrics"):
            evaluate_pairs([], ae_model, sketch_ref=sketch_ref, metrics=("fid",))

    def test_skt_rec_without_reference_rejected(self, ae_model):
        with pytest.raises(ValueError, match="reference"):
            evaluate_pairs([], ae_model, sketch_ref=None, metrics=("skt_rec",))
