"""Multi-style sketch synthesis for RGB-only datasets.

One generator is trained against online style-matched feature targets;
because the paired real sketch is re-drawn every step, the target for a
given image keeps moving, and SGD checkpoints sampled along the way
decode to visibly different sketch styles. A small bank of real line
sketches (a few dozen, any content domain) is the only supervision.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import data
from .losses import LossReport, tom_d_loss, tom_g_loss
from .networks import FeatureExtractor, GramCritic, SketchDecoder, as_rgb
from .ops import GramMatrix, adain, channel_stats, gram_matrix


class TrainingDiverged(RuntimeError):
    """Raised when a training loss goes non-finite; carries the dump path."""


@dataclass
class SketcherConfig:
    resolution: int = 64
    extractor_widths: tuple = (16, 32, 64, 128)
    tap: str = "block3"
    extractor_seed: int = 0
    decoder_base: int = 32
    critic_hidden: tuple = (256, 64)
    g_optimizer: str = "adam"   # "adam" (stable at desk scale) or "sgd"
    g_lr: float = 2e-4
    g_momentum: float = 0.9     # sgd only
    d_lr: float = 2e-4
    grad_clip: float = 1.0
    batch_size: int = 8
    ckpt_after: int = 500
    ckpt_every: int = 100
    max_checkpoints: int = 10
    seed: int = 0

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["extractor_widths"] = list(self.extractor_widths)
        d["critic_hidden"] = list(self.critic_hidden)
        return d


def checkpoint_schedule(after: int, every: int, slots: int) -> list[int]:
    """Steps at which generator weights are snapshotted: warmup + fixed stride."""
    if slots < 0 or after < 0 or every <= 0:
        raise ValueError("need slots >= 0, after >= 0, every > 0")
    return [after + i * every for i in range(slots)]


class SketchStyleBank:
    """The real-sketch set the generator's feature statistics are matched to."""

    def __init__(self, sketches: np.ndarray, ids: list[str]):
        if len(sketches) == 0:
            raise ValueError("sketch bank must be non-empty")
        if sketches.ndim != 4 or sketches.shape[1] != 1:
            raise ValueError(f"expected (N,1,H,W) sketches, got {sketches.shape}")
        self.sketches = torch.tensor(sketches, dtype=torch.float32)
        self.ids = list(ids)

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_dir(cls, directory, resolution: int) -> "SketchStyleBank":
        paths = data.list_images(directory)
        if not paths:
            raise ValueError(f"no sketch images in {directory}")
        arr = np.stack([data.load_image(p, channels=1, size=resolution) for p in paths])
        return cls(arr, [p.stem for p in paths])

    def draw(self, rng: np.random.Generator, n: int) -> tuple[list[int], torch.Tensor]:
        idx = rng.integers(0, len(self), size=n).tolist()
        return idx, self.sketches[idx]


def make_target(f_content: torch.Tensor, f_sketch: torch.Tensor) -> torch.Tensor:
    """Blend content structure with sketch feature statistics (adaptive IN)."""
    if f_content.shape[-3] != f_sketch.shape[-3]:
        raise ValueError(
            f"channel mismatch: content {f_content.shape[-3]} vs sketch {f_sketch.shape[-3]}"
        )
    return adain(f_content, channel_stats(f_sketch))


def split_grams(gram: GramMatrix) -> list[GramMatrix]:
    if gram.data.dim() == 2:
        return [gram]
    return [GramMatrix(d, gram.normalizer) for d in gram.data]


class SketcherTrainer:
    """Single-writer training state: generator, critic, frozen extractor."""

    def __init__(self, cfg: SketcherConfig, run_dir=None):
        self.cfg = cfg
        self.run_dir = Path(run_dir) if run_dir is not None else None
        torch.manual_seed(cfg.seed)
        self.extractor = FeatureExtractor(
            3, cfg.extractor_widths, cfg.tap, cfg.extractor_seed
        )
        tap_res = self.extractor.tap_resolution(cfg.resolution)
        self.generator = SketchDecoder(
            self.extractor.tap_channels, tap_res, cfg.resolution, cfg.decoder_base
        )
        self.critic = GramCritic(self.extractor.tap_channels, tuple(cfg.critic_hidden))
        if cfg.g_optimizer == "adam":
            self.g_opt = torch.optim.Adam(self.generator.parameters(), lr=cfg.g_lr,
                                          betas=(0.5, 0.999))
        elif cfg.g_optimizer == "sgd":
            self.g_opt = torch.optim.SGD(self.generator.parameters(), lr=cfg.g_lr,
                                         momentum=cfg.g_momentum)
        else:
            raise ValueError(f"unknown g_optimizer {cfg.g_optimizer!r}")
        self.d_opt = torch.optim.Adam(self.critic.parameters(), lr=cfg.d_lr, betas=(0.5, 0.999))
        self.rng = np.random.default_rng(cfg.seed)
        self.step_count = 0
        self.checkpoint_steps: list[int] = []
        self.last_pairing: list[tuple[int, int]] = []  # (batch position, sketch id)
        self.last_target_stat_err = float("nan")

    def _dump_state(self, tag: str) -> str:
        directory = self.run_dir or Path(".")
        directory.mkdir(parents=True, exist_ok=True)
        path = Path(directory) / f"diverged_{tag}_step{self.step_count}.pt"
        torch.save({
            "generator": self.generator.state_dict(),
            "critic": self.critic.state_dict(),
            "step": self.step_count,
            "config": self.cfg.as_dict(),
        }, path)
        return str(path)

    def _critic_scores_fn(self):
        def fn(grams):
            stacked = GramMatrix(torch.stack([g.data for g in grams]), grams[0].normalizer)
            return self.critic.scores(stacked)
        return fn

    def step(self, rgb_batch: torch.Tensor, bank: SketchStyleBank) -> LossReport:
        """One alternating critic/generator update on a freshly drawn pairing."""
        if rgb_batch.dim() != 4 or rgb_batch.shape[0] == 0:
            raise ValueError("rgb_batch must be a non-empty (B,3,H,W) tensor")
        b = rgb_batch.shape[0]
        pair_ids, sketches = bank.draw(self.rng, b)
        self.last_pairing = list(enumerate(pair_ids))

        with torch.no_grad():
            f_content = self.extractor(rgb_batch)
            f_sketch = self.extractor(as_rgb(sketches))
            f_target = make_target(f_content, f_sketch)

        fake = self.generator(f_content)
        f_hat = self.extractor(fake)

        # critic update on detached generated features
        real_grams = split_grams(gram_matrix(f_sketch))
        fake_grams = split_grams(gram_matrix(f_hat.detach()))
        d_report = tom_d_loss(real_grams, fake_grams, self._critic_scores_fn())
        self.d_opt.zero_grad()
        d_report.total.backward()
        torch.nn.utils.clip_grad_norm_(self.critic.parameters(), self.cfg.grad_clip)
        self.d_opt.step()

        # generator update through the (just updated) critic
        fake_scores = self.critic.scores(gram_matrix(f_hat))
        g_report = tom_g_loss(fake_scores, f_target, f_hat)

        self.g_opt.zero_grad()
        g_report.total.backward()
        torch.nn.utils.clip_grad_norm_(self.generator.parameters(), self.cfg.grad_clip)
        self.g_opt.step()

        terms = {
            "d_real": d_report.terms["d_real"].detach(),
            "d_fake": d_report.terms["d_fake"].detach(),
            "g_adv": g_report.terms["adv"].detach(),
            "g_match": g_report.terms["match"].detach(),
        }
        try:
            report = LossReport.from_terms(terms)
        except ValueError:
            dump = self._dump_state("tom")
            raise TrainingDiverged(f"non-finite sketcher loss at step {self.step_count}; state dumped to {dump}")
        self.step_count += 1
        return report

    def target_stat_error(self, rgb_batch: torch.Tensor, bank: SketchStyleBank) -> float:
        """Spot check: worst |target stats - sketch-feature stats| on a fresh pairing."""
        with torch.no_grad():
            _, sketches = bank.draw(self.rng, rgb_batch.shape[0])
            f_content = self.extractor(rgb_batch)
            f_sketch = self.extractor(as_rgb(sketches))
            target = make_target(f_content, f_sketch)
            want = channel_stats(f_sketch)
            got = channel_stats(target)
            err = max(
                (got.mean - want.mean).abs().max().item(),
                (got.std - want.std).abs().max().item(),
            )
        self.last_target_stat_err = err
        return err

    def sample_checkpoint(self, metrics: dict | None = None) -> Path:
        """Snapshot generator weights into the run's checkpoint manifest."""
        if self.run_dir is None:
            raise ValueError("trainer has no run_dir to checkpoint into")
        if len(self.checkpoint_steps) >= self.cfg.max_checkpoints:
            raise ValueError(f"checkpoint list already holds {self.cfg.max_checkpoints}")
        path = data.save_checkpoint(
            self.run_dir, "tom", self.step_count,
            {"generator": self.generator.state_dict()},
            self.cfg.as_dict(), metrics,
            name=f"tom_{self.step_count:08d}.pt",
        )
        self.checkpoint_steps.append(self.step_count)
        return path


def sketchify(generator: SketchDecoder, extractor: FeatureExtractor,
              rgb: torch.Tensor) -> torch.Tensor:
    """Deterministic sketch inference: (B,3,H,W) -> (B,1,H,W)."""
    was_training = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            return generator(extractor(rgb))
    finally:
        generator.train(was_training)


class ImageFolder:
    """All images of a directory as one float tensor (CI-scale datasets)."""

    def __init__(self, directory, resolution: int, channels: int = 3):
        self.paths = data.list_images(directory)
        self.images = torch.tensor(
            np.stack([data.load_image(p, channels=channels, size=resolution) for p in self.paths])
        ) if self.paths else torch.zeros((0, channels, resolution, resolution))

    def __len__(self) -> int:
        return len(self.paths)

    def batch(self, rng: np.random.Generator, n: int) -> torch.Tensor:
        idx = rng.integers(0, len(self), size=n)
        return self.images[idx]


def train_sketcher(rgb_dir, bank_dir, steps: int, out_dir, cfg: SketcherConfig,
                   log_every: int = 100) -> Path:
    """Full training loop; returns the run's manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    folder = ImageFolder(rgb_dir, cfg.resolution)
    if len(folder) == 0:
        raise ValueError(f"no RGB images in {rgb_dir}")
    bank = SketchStyleBank.from_dir(bank_dir, cfg.resolution)
    trainer = SketcherTrainer(cfg, run_dir=out_dir)
    schedule = set(checkpoint_schedule(cfg.ckpt_after, cfg.ckpt_every, cfg.max_checkpoints))

    for _ in range(steps):
        batch = folder.batch(trainer.rng, cfg.batch_size)
        report = trainer.step(batch, bank)
        if trainer.step_count in schedule:
            trainer.sample_checkpoint(metrics=report.scalars())
        if log_every and trainer.step_count % log_every == 0:
            stat_err = trainer.target_stat_error(batch, bank)
            parts = " ".join(f"{k}={v:.4f}" for k, v in report.scalars().items())
            print(f"[tom {trainer.step_count:>6}] {parts} target_stat_err={stat_err:.2e}")
    return out_dir / "manifest.json"


def load_sketch_generator(manifest_path, index: int = 0,
                          extractor: FeatureExtractor | None = None):
    """Rebuild (generator, extractor, config) from one manifest checkpoint."""
    manifest_path = Path(manifest_path)
    manifest = data.load_manifest(manifest_path)
    entries = manifest.for_role("tom")
    if not entries:
        raise ValueError(f"{manifest_path} holds no sketch-generator checkpoints")
    if not (0 <= index < len(entries)):
        raise IndexError(f"checkpoint index {index} out of range [0, {len(entries)})")
    entry = entries[index]
    blob = data.load_checkpoint(manifest_path.parent / entry.path,
                                expected_config_hash=entry.config_hash)
    cfg = SketcherConfig(**{**blob["config"],
                            "extractor_widths": tuple(blob["config"]["extractor_widths"]),
                            "critic_hidden": tuple(blob["config"]["critic_hidden"])})
    if extractor is None:
        extractor = FeatureExtractor(3, cfg.extractor_widths, cfg.tap, cfg.extractor_seed)
    generator = SketchDecoder(extractor.tap_channels,
                              extractor.tap_resolution(cfg.resolution),
                              cfg.resolution, cfg.decoder_base)
    generator.load_state_dict(blob["state_dicts"]["generator"])
    generator.eval()
    return generator, extractor, cfg


def generate_sketches(manifest_path, rgb_dir, out_dir) -> data.Catalog:
    """Emit one sketch per (image, checkpoint) plus a catalog.

    Naming: `<image-stem>.skt<k>.png` for checkpoint index k. Unreadable
    images are skipped with a warning; reruns overwrite byte-identically.
    """
    manifest_path, out_dir = Path(manifest_path), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = data.load_manifest(manifest_path)
    entries = manifest.for_role("tom")
    if not entries:
        raise ValueError(f"{manifest_path} holds no sketch-generator checkpoints")

    extractor = None
    generators = []
    cfg = None
    for k in range(len(entries)):
        gen, extractor, cfg = load_sketch_generator(manifest_path, k, extractor)
        generators.append(gen)

    paths = data.list_images(rgb_dir)
    if not paths:
        print(f"[tom generate] warning: no images found in {rgb_dir}")
    kept = []
    for p in paths:
        try:
            img = torch.tensor(data.load_image(p, channels=3, size=cfg.resolution))[None]
        except Exception as exc:  # unreadable/corrupt: skip, not fatal
            print(f"[tom generate] warning: skipping {p.name}: {exc}")
            continue
        for k, gen in enumerate(generators):
            sketch = sketchify(gen, extractor, img)[0].numpy()
            data.save_image(out_dir / f"{p.stem}.skt{k}.png", sketch)
        kept.append(p)

    catalog = data.build_catalog(Path(rgb_dir), out_dir, out_dir / "catalog.json",
                                 config_hash_value=data.config_hash(cfg.as_dict()))
    return catalog
