"""Stage-1 auto-encoder contracts: encoders, decoder, subsets, training step."""

import dataclasses
import math

import numpy as np
import pytest
import torch

from sketchsynth.augment import StyleAugmentConfig
from sketchsynth.autoencoder import (
    AeConfig,
    AeModel,
    AeTrainer,
    PairSample,
    class_subset_bounds,
    infer_ae,
    load_ae,
    next_class_subset,
    validate_subset_size,
)
from sketchsynth.networks import state_dict_digest
from sketchsynth.toydata import make_toy_image, make_toy_sketch

CFG = AeConfig(resolution=32, style_dim=64, content_channels=64, content_grid=8,
               enc_base=8, dec_base=64, dec_min_width=8, batch_size=4,
               class_count=2, seed=0)


def toy_samples(n=12, n_sketches=2, size=32, seed=0):
    rng = np.random.default_rng(seed)
    return [
        PairSample(
            uid=f"img_{i:03d}",
            image=make_toy_image(rng, size),
            sketches=[make_toy_sketch(rng, size) for _ in range(n_sketches)],
        )
        for i in range(n)
    ]


@pytest.fixture(scope="module")
def samples():
    return toy_samples()


@pytest.fixture
def trainer(samples):
    return AeTrainer(CFG, samples)


class TestEncoders:
    def test_style_deterministic_in_eval(self, trainer):
        model = trainer.model
        model.eval()
        img = torch.rand(2, 3, 32, 32) * 2 - 1
        a = model.encode_style(img)
        b = model.encode_style(img.clone())
        assert torch.equal(a, b)
        assert a.shape == (2, CFG.style_dim)

    def test_constant_gray_image_finite(self, trainer):
        img = torch.zeros(1, 3, 32, 32)
        code = trainer.model.encode_style(img)
        assert torch.isfinite(code).all()

    def test_wrong_resolution_rejected(self, trainer):
        with pytest.raises(ValueError, match="trained at"):
            trainer.model.encode_style(torch.zeros(1, 3, 64, 64))
        with pytest.raises(ValueError, match="trained at"):
            trainer.model.encode_content(torch.zeros(1, 1, 16, 16))

    def test_content_deterministic_and_shaped(self, trainer):
        model = trainer.model
        model.eval()
        skt = torch.rand(3, 1, 32, 32) * 2 - 1
        a = model.encode_content(skt)
        assert torch.equal(a, model.encode_content(skt.clone()))
        assert a.shape == (3, CFG.content_channels, 8, 8)

    def test_blank_sketch_finite(self, trainer):
        blank = torch.ones(1, 1, 32, 32)
        assert torch.isfinite(trainer.model.encode_content(blank)).all()


class TestDecoder:
    def test_output_range_and_shape(self, trainer):
        out = trainer.model.decode(torch.randn(2, CFG.style_dim),
                                   torch.randn(2, CFG.content_channels, 8, 8))
        assert out.shape == (2, 3, 32, 32)
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_style_path_live(self, trainer):
        content = torch.randn(1, CFG.content_channels, 8, 8)
        with torch.no_grad():
            a = trainer.model.decode(torch.randn(1, CFG.style_dim), content)
            b = trainer.model.decode(torch.randn(1, CFG.style_dim), content)
        assert float(((a - b) ** 2).sum()) > 0.0

    def test_all_ones_style_is_content_only_path(self, trainer):
        # channel gates of one leave features untouched at every injection site
        content = torch.randn(2, CFG.content_channels, 8, 8)
        ones = torch.ones(2, CFG.style_dim)
        a = trainer.model.decode(ones, content)

        decoder = trainer.model.decoder
        x = torch.nn.functional.leaky_relu(decoder.stem(content), 0.2)
        for i, _ in enumerate(decoder.level_res):
            if i > 0:
                x = torch.nn.functional.interpolate(x, scale_factor=2, mode="nearest")
                x = torch.nn.functional.leaky_relu(decoder.ups[i - 1](x), 0.2)
            x = decoder.dmi[i](x, content)
        b = torch.tanh(decoder.head(x))
        assert torch.allclose(a, b)

    def test_style_and_content_sensitivity(self, trainer):
        # non-zero Jacobian columns: finite perturbations move the output
        model = trainer.model
        model.eval()
        rng = np.random.default_rng(0)
        style = torch.randn(1, CFG.style_dim)
        content = torch.randn(1, CFG.content_channels, 8, 8)
        with torch.no_grad():
            base = model.decode(style, content)
            for _ in range(5):
                s2 = style.clone()
                s2[0, rng.integers(CFG.style_dim)] += 0.5
                assert float((model.decode(s2, content) - base).abs().sum()) > 0
                c2 = content.clone()
                c2[0, rng.integers(CFG.content_channels), rng.integers(8), rng.integers(8)] += 0.5
                assert float((model.decode(style, c2) - base).abs().sum()) > 0

    def test_dim_mismatch_rejected(self, trainer):
        with pytest.raises(ValueError, match="style"):
            trainer.model.decode(torch.randn(1, 3), torch.randn(1, CFG.content_channels, 8, 8))
        with pytest.raises(ValueError, match="content"):
            trainer.model.decode(torch.randn(1, CFG.style_dim), torch.randn(1, 7, 8, 8))


class TestSubset:
    def test_bounds_paper_scale(self):
        assert class_subset_bounds(15000) == (500, 2000)
        assert class_subset_bounds(30000) == (500, 2000)

    def test_bounds_toy_scale_proportional(self):
        lo, hi = class_subset_bounds(64)
        assert lo == 2 and hi == 9
        lo, hi = class_subset_bounds(1500)
        assert (lo, hi) == (50, 200)

    def test_validation(self):
        validate_subset_size(500, 15000)
        with pytest.raises(ValueError, match="outside"):
            validate_subset_size(499, 15000)
        with pytest.raises(ValueError, match="outside"):
            validate_subset_size(2001, 15000)
        validate_subset_size(8, 64)
        with pytest.raises(ValueError, match="outside"):
            validate_subset_size(32, 64)

    def test_whole_dataset_subset_is_permutation(self):
        rng = np.random.default_rng(0)
        ids = [f"im{i}" for i in range(6)]
        sub = next_class_subset(ids, 6, rng)
        assert sorted(sub.image_ids) == sorted(ids)
        assert sorted(sub.label_of.values()) == list(range(6))

    def test_refreshes_differ(self):
        rng = np.random.default_rng(1)
        ids = [f"im{i}" for i in range(200)]
        a = next_class_subset(ids, 5, rng)
        b = next_class_subset(ids, 5, rng)
        assert set(a.image_ids) != set(b.image_ids)

    def test_oversized_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            next_class_subset(["a", "b"], 3, np.random.default_rng(0))

    def test_head_reinitialized(self):
        rng = np.random.default_rng(2)
        head = torch.nn.Linear(16, 4)
        before = head.weight.detach().clone()
        next_class_subset([f"i{k}" for k in range(10)], 4, rng, head=head)
        assert not torch.equal(head.weight.detach(), before)

    def test_refresh_preserves_non_head_weights(self, samples):
        trainer = AeTrainer(CFG, samples)
        digests = {
            "style_enc": state_dict_digest(trainer.model.style_enc),
            "content_enc": state_dict_digest(trainer.model.content_enc),
            "decoder": state_dict_digest(trainer.model.decoder),
        }
        head_before = state_dict_digest(trainer.model.style_head)
        members_before = set(trainer.subset.image_ids)
        trainer.refresh_subset()
        assert state_dict_digest(trainer.model.style_enc) == digests["style_enc"]
        assert state_dict_digest(trainer.model.content_enc) == digests["content_enc"]
        assert state_dict_digest(trainer.model.decoder) == digests["decoder"]
        assert state_dict_digest(trainer.model.style_head) != head_before
        # membership almost surely changes for k << n; assert with this seed
        assert set(trainer.subset.image_ids) != members_before


class TestTrainStep:
    def test_all_terms_present_and_finite(self, trainer):
        report = trainer.step()
        keys = set(report.terms)
        assert keys == {"recon", "style_triplet", "content_triplet",
                        "style_class", "content_declass"}
        assert all(math.isfinite(v) for v in report.scalars().values())

    def test_vanilla_arm_reconstruction_only(self, samples):
        trainer = AeTrainer(CFG.vanilla(), samples)
        report = trainer.step()
        s = report.scalars()
        assert s["style_triplet"] == 0.0
        assert s["content_triplet"] == 0.0
        assert s["style_class"] == 0.0
        assert s["content_declass"] == 0.0
        assert s["total"] == pytest.approx(s["recon"])

    def test_declass_head_gradient_isolation(self, samples):
        cfg = dataclasses.replace(CFG, enable_style_triplet=False,
                                  enable_content_triplet=False, enable_style_class=False)
        trainer = AeTrainer(cfg, samples)
        batch = trainer.draw_batch()
        # replicate the step's loss wiring without the optimizer update
        originals = torch.tensor(np.stack([s.image for s in batch]))
        translated = torch.tensor(np.stack([trainer._translated(s.image) for s in batch]))
        skt = torch.tensor(np.stack([trainer._masked(s.sketches[0]) for s in batch]))
        f_style = trainer.model.encode_style(translated)
        f_content = trainer.model.encode_content(skt)
        recon = trainer.model.decode(f_style, f_content)
        from sketchsynth.losses import UniformTarget, content_declass_loss
        pooled = f_content.mean(dim=(-2, -1))
        head = trainer.model.style_head
        logits = torch.nn.functional.linear(pooled, head.weight.detach(), head.bias.detach())
        loss = content_declass_loss(logits, UniformTarget(k=trainer.subset.k))
        loss.backward()
        assert head.weight.grad is None
        assert head.bias.grad is None
        enc_grads = [p.grad for p in trainer.model.content_enc.parameters()]
        assert any(g is not None and g.abs().sum() > 0 for g in enc_grads)

    def test_style_class_trains_head(self, samples):
        trainer = AeTrainer(CFG, samples)
        before = trainer.model.style_head.weight.detach().clone()
        # force a batch containing subset members
        members = [s for s in samples if s.uid in trainer.subset.label_of]
        batch = members + [s for s in samples if s.uid not in trainer.subset.label_of][:2]
        trainer.step(batch)
        assert not torch.equal(trainer.model.style_head.weight.detach(), before)

    def test_recon_target_is_original_while_encoder_sees_translation(self, samples):
        aug = StyleAugmentConfig(crop_range=(1.0, 1.0), rotate_range=(0.0, 0.0),
                                 scale_range=(1.0, 1.0), hflip_prob=1.0, apply_prob=0.0)
        cfg = dataclasses.replace(CFG, style_augment=aug)
        trainer = AeTrainer(cfg, samples)
        trainer.step()
        target = trainer.last_batch["recon_target"].numpy()
        seen = trainer.last_batch["style_input"].numpy()
        # encoder input is the horizontally flipped original, target is unflipped
        assert np.allclose(seen[..., ::-1], target, atol=1e-6)
        assert not np.allclose(seen, target)

    def test_loss_decreases_on_tiny_corpus(self, samples):
        trainer = AeTrainer(dataclasses.replace(CFG, refresh_every=0), samples)
        first = [trainer.step().scalars()["total"] for _ in range(20)]
        for _ in range(160):
            trainer.step()
        last = [trainer.step().scalars()["total"] for _ in range(20)]
        assert np.mean(last) < np.mean(first)

    def test_subset_refresh_happens_on_schedule(self, samples):
        cfg = dataclasses.replace(CFG, refresh_every=5)
        trainer = AeTrainer(cfg, samples)
        for _ in range(5):
            trainer.step()
        assert trainer.subset.created_at_step == 5

    def test_single_sketch_corpus_rejected_with_content_triplet(self):
        with pytest.raises(ValueError, match="2 sketches"):
            AeTrainer(CFG, toy_samples(n=8, n_sketches=1))

    def test_batch_of_one_rejected(self, trainer):
        with pytest.raises(ValueError, match=">= 2"):
            trainer.step(trainer.samples[:1])


class TestInferAndCheckpoint:
    def test_untrained_inference_rejected(self, samples):
        trainer = AeTrainer(CFG, samples)
        skt = torch.zeros(1, 1, 32, 32)
        img = torch.zeros(1, 3, 32, 32)
        with pytest.raises(ValueError, match="train"):
            infer_ae(skt, img, trainer.model)

    def test_inference_deterministic_and_finite(self, samples, tmp_path):
        trainer = AeTrainer(CFG, samples, run_dir=tmp_path)
        for _ in range(3):
            trainer.step()
        skt = torch.ones(1, 1, 32, 32)  # blank sketch
        img = torch.tensor(samples[0].image)[None]
        a = infer_ae(skt, img, trainer.model)
        b = infer_ae(skt.clone(), img.clone(), trainer.model)
        assert torch.equal(a, b)
        assert torch.isfinite(a).all()

    def test_checkpoint_round_trip(self, samples, tmp_path):
        trainer = AeTrainer(CFG, samples, run_dir=tmp_path)
        for _ in range(2):
            trainer.step()
        path = trainer.save()
        model = load_ae(path)
        assert model.trained_steps == 2
        assert state_dict_digest(model) == state_dict_digest(trainer.model)
        skt = torch.tensor(samples[0].sketches[0])[None]
        img = torch.tensor(samples[1].image)[None]
        assert torch.equal(infer_ae(skt, img, model), infer_ae(skt, img, trainer.model))
