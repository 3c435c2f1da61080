"""Stage-1 self-supervised auto-encoder.

A style encoder reads a translated RGB image, a content encoder reads a
masked synthetic sketch, and the decoder reconstructs the ORIGINAL
image, so neither path can lean on pixel alignment. Four
self-supervision terms (style/content triplets, style classification on
a rotating class subset, content de-classification toward the uniform
distribution) disentangle the two codes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import data
from .augment import SketchMaskConfig, StyleAugmentConfig, mask_sketch, translate_style
from .losses import (
    LossReport,
    TripletMargins,
    UniformTarget,
    ae_total,
    content_declass_loss,
    content_triplet,
    style_class_loss,
    style_triplet,
)
from .networks import ContentEncoder, ImageDecoder, StyleEncoder
from .sketcher import TrainingDiverged

PAPER_DATASET_SIZE = 15000
PAPER_SUBSET_BOUNDS = (500, 2000)


@dataclass
class AeConfig:
    resolution: int = 64
    style_dim: int = 128          # paper scale: 512
    content_channels: int = 128   # paper scale: 512
    content_grid: int = 8
    enc_base: int = 16
    max_width: int = 256
    dec_base: int = 128
    dec_min_width: int = 16
    style_band: tuple = (1 / 16, 1 / 2)
    threshold_mode: str = "abs_mean"
    lr: float = 2e-4
    batch_size: int = 32
    alpha: float = 0.3            # style triplet margin
    beta: float = 0.5             # content triplet margin
    class_count: int = 8          # momentum subset size k
    refresh_every: int = 2000
    w_style_triplet: float = 1.0
    w_content_triplet: float = 1.0
    w_style_class: float = 1.0
    w_content_declass: float = 1.0
    enable_style_triplet: bool = True
    enable_content_triplet: bool = True
    enable_style_class: bool = True
    enable_content_declass: bool = True
    enable_augment: bool = True
    paper_sign_style_triplet: bool = False
    style_augment: StyleAugmentConfig = field(default_factory=StyleAugmentConfig)
    mask_regions: tuple = (4, 8)       # rectangles per sketch, sampled
    mask_size_frac: tuple = (0.04, 0.12)  # rectangle side as fraction of width
    seed: int = 0

    def __post_init__(self):
        if self.content_channels != self.style_dim:
            raise ValueError(
                "content_channels must equal style_dim: the average-pooled "
                "content grid shares the style classifier head"
            )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def margins(self) -> TripletMargins:
        return TripletMargins(alpha=self.alpha, beta=self.beta)

    def weights(self) -> dict:
        return {
            "style_triplet": self.w_style_triplet,
            "content_triplet": self.w_content_triplet,
            "style_class": self.w_style_class,
            "content_declass": self.w_content_declass,
        }

    def vanilla(self) -> "AeConfig":
        """The reconstruction-only baseline arm: no self-supervision, no augmentation."""
        return dataclasses.replace(
            self,
            enable_style_triplet=False, enable_content_triplet=False,
            enable_style_class=False, enable_content_declass=False,
            enable_augment=False,
        )


def class_subset_bounds(n: int, paper_n: int = PAPER_DATASET_SIZE,
                        bounds: tuple[int, int] = PAPER_SUBSET_BOUNDS) -> tuple[int, int]:
    """Allowed subset sizes: [500, 2000] at paper scale (>= 15000 images),
    scaled proportionally (floor 2) for smaller datasets."""
    if n < 2:
        raise ValueError(f"need at least 2 images, got {n}")
    lo, hi = bounds
    if n >= paper_n:
        return (lo, hi)
    slo = max(2, round(lo * n / paper_n))
    shi = max(slo, min(n, round(hi * n / paper_n)))
    return (slo, shi)


def validate_subset_size(k: int, n: int) -> None:
    lo, hi = class_subset_bounds(n)
    if not (lo <= k <= hi):
        raise ValueError(f"subset size {k} outside allowed [{lo}, {hi}] for {n} images")
    if k > n:
        raise ValueError(f"subset size {k} exceeds dataset size {n}")


@dataclass
class MomentumClassSubset:
    """The current image subset whose identities act as style classes."""

    image_ids: list[str]
    label_of: dict[str, int]
    refresh_every: int
    created_at_step: int = 0

    @property
    def k(self) -> int:
        return len(self.image_ids)


def next_class_subset(
    ids, k: int, rng: np.random.Generator,
    head: torch.nn.Linear | None = None,
    refresh_every: int = 2000, step: int = 0,
) -> MomentumClassSubset:
    """Draw a fresh uniform subset with fresh labels; re-initialize the
    classifier head so stale class boundaries cannot linger."""
    ids = list(ids)
    if k > len(ids):
        raise ValueError(f"subset size {k} exceeds dataset size {len(ids)}")
    chosen = [ids[i] for i in rng.choice(len(ids), size=k, replace=False)]
    if head is not None:
        if head.out_features != k:
            raise ValueError(f"classifier head has {head.out_features} classes, subset has {k}")
        head.reset_parameters()
    return MomentumClassSubset(
        image_ids=chosen,
        label_of={uid: i for i, uid in enumerate(chosen)},
        refresh_every=refresh_every,
        created_at_step=step,
    )


class AeModel(torch.nn.Module):
    """Style encoder + content encoder + classifier head + decoder."""

    def __init__(self, cfg: AeConfig):
        super().__init__()
        self.cfg = cfg
        self.style_enc = StyleEncoder(cfg.resolution, cfg.style_dim, cfg.enc_base, cfg.max_width)
        self.content_enc = ContentEncoder(cfg.resolution, cfg.content_grid,
                                          cfg.content_channels, cfg.enc_base, cfg.max_width)
        self.style_head = torch.nn.Linear(cfg.style_dim, cfg.class_count)
        self.decoder = ImageDecoder(cfg.resolution, cfg.style_dim, cfg.content_channels,
                                    cfg.content_grid, cfg.dec_base, cfg.dec_min_width,
                                    tuple(cfg.style_band), cfg.threshold_mode)
        self.trained_steps = 0

    def encode_style(self, img: torch.Tensor) -> torch.Tensor:
        return self.style_enc(img)

    def encode_content(self, skt: torch.Tensor) -> torch.Tensor:
        return self.content_enc(skt)

    def decode(self, style: torch.Tensor, content: torch.Tensor) -> torch.Tensor:
        return self.decoder(style, content)

    def synthesize(self, skt: torch.Tensor, style_img: torch.Tensor) -> torch.Tensor:
        """Deterministic inference path: sketch + exemplar -> image."""
        was = self.training
        self.eval()
        try:
            with torch.no_grad():
                return self.decode(self.encode_style(style_img), self.encode_content(skt))
        finally:
            self.train(was)


def infer_ae(skt: torch.Tensor, style_img: torch.Tensor, model: AeModel) -> torch.Tensor:
    if model.trained_steps <= 0:
        raise ValueError("auto-encoder has no trained weights; train or load a checkpoint first")
    return model.synthesize(skt, style_img)


@dataclass
class PairSample:
    uid: str
    image: np.ndarray               # (3,R,R) in [-1,1]
    sketches: list[np.ndarray]      # each (1,R,R)


def load_pair_samples(catalog_path, resolution: int, split: str | None = None,
                      verify: bool = True, rgb_root=None) -> list[PairSample]:
    """Materialize catalog pairs in memory. rgb_root, when given, overrides
    where the images live (checksums are then checked against it)."""
    catalog_path = Path(catalog_path)
    catalog = data.load_catalog(catalog_path, verify=verify and rgb_root is None)
    pairs = catalog.pairs if split is None else catalog.split_pairs(split)
    samples = []
    for pair in pairs:
        img_path, skt_paths = data.resolve_pair(pair, catalog_path)
        if rgb_root is not None:
            img_path = Path(rgb_root) / Path(pair.image_path).name
            if verify and pair.checksum and data.sha256_file(img_path) != pair.checksum:
                raise ValueError(f"checksum mismatch for {img_path}")
        samples.append(PairSample(
            uid=pair.stem,
            image=data.load_image(img_path, channels=3, size=resolution),
            sketches=[data.load_image(s, channels=1, size=resolution) for s in skt_paths],
        ))
    return samples


class AeTrainer:
    """Single-writer stage-1 training over an in-memory pair corpus."""

    def __init__(self, cfg: AeConfig, samples: list[PairSample], run_dir=None):
        if len(samples) < 2:
            raise ValueError("need at least 2 paired samples (negatives come from the batch)")
        if cfg.enable_content_triplet and any(len(s.sketches) < 2 for s in samples):
            raise ValueError("content triplet needs >= 2 sketches per image")
        validate_subset_size(cfg.class_count, len(samples))
        self.cfg = cfg
        self.samples = samples
        self.run_dir = Path(run_dir) if run_dir is not None else None
        torch.manual_seed(cfg.seed)
        self.model = AeModel(cfg)
        self.opt = torch.optim.Adam(self.model.parameters(), lr=cfg.lr, betas=(0.5, 0.999))
        self.rng = np.random.default_rng(cfg.seed)
        self.subset = next_class_subset(
            [s.uid for s in samples], cfg.class_count, self.rng,
            self.model.style_head, cfg.refresh_every, step=0,
        )
        self.step_count = 0
        self.last_batch: dict = {}

    # ----- augmentation plumbing -------------------------------------------------

    def _translated(self, img: np.ndarray) -> np.ndarray:
        if not self.cfg.enable_augment:
            return np.asarray(img, dtype=np.float32)
        return translate_style(img, self.cfg.style_augment, rng=self.rng)

    def _masked(self, skt: np.ndarray) -> np.ndarray:
        if not self.cfg.enable_augment:
            return np.asarray(skt, dtype=np.float32)
        lo, hi = self.cfg.mask_regions
        n = int(self.rng.integers(lo, hi + 1))
        w = skt.shape[-1]
        s_lo = max(1, round(self.cfg.mask_size_frac[0] * w))
        s_hi = max(s_lo, round(self.cfg.mask_size_frac[1] * w))
        cfg = SketchMaskConfig(num_regions=n, region_size_range=(s_lo, s_hi), fill_value=1.0)
        return mask_sketch(skt, cfg, rng=self.rng)

    def draw_batch(self, size: int | None = None) -> list[PairSample]:
        size = size or min(self.cfg.batch_size, len(self.samples))
        size = min(size, len(self.samples))
        idx = self.rng.choice(len(self.samples), size=size, replace=False)
        return [self.samples[i] for i in idx]

    # ----- one optimization step -------------------------------------------------

    def step(self, batch: list[PairSample] | None = None) -> LossReport:
        cfg = self.cfg
        batch = self.draw_batch() if batch is None else batch
        if len(batch) < 2:
            raise ValueError("batch must hold >= 2 distinct images")

        originals = torch.tensor(np.stack([s.image for s in batch]))
        translated = torch.tensor(np.stack([self._translated(s.image) for s in batch]))

        skt_anchor, skt_pos = [], []
        for s in batch:
            picks = self.rng.choice(len(s.sketches), size=min(2, len(s.sketches)),
                                    replace=len(s.sketches) < 2)
            skt_anchor.append(self._masked(s.sketches[picks[0]]))
            skt_pos.append(self._masked(s.sketches[picks[-1]]))
        skt_anchor = torch.tensor(np.stack(skt_anchor))
        skt_pos = torch.tensor(np.stack(skt_pos))

        model = self.model
        model.train()
        f_style = model.encode_style(translated)
        f_content = model.encode_content(skt_anchor)
        recon = model.decode(f_style, f_content)

        zero = torch.zeros(())
        parts = {name: zero for name in
                 ("style_triplet", "content_triplet", "style_class", "content_declass")}

        if cfg.enable_style_triplet:
            f_org = model.encode_style(originals)
            parts["style_triplet"] = style_triplet(
                f_style, f_org, torch.roll(f_org, 1, dims=0), cfg.margins(),
                paper_sign=cfg.paper_sign_style_triplet,
            )
        if cfg.enable_content_triplet:
            f_pos = model.encode_content(skt_pos)
            parts["content_triplet"] = content_triplet(
                f_content, f_pos, torch.roll(f_pos, 1, dims=0), cfg.margins(),
            )
        if cfg.enable_style_class:
            rows = [i for i, s in enumerate(batch) if s.uid in self.subset.label_of]
            if rows:
                labels = torch.tensor([self.subset.label_of[batch[i].uid] for i in rows])
                parts["style_class"] = style_class_loss(model.style_head(f_style[rows]), labels)
        if cfg.enable_content_declass:
            pooled = f_content.mean(dim=(-2, -1))
            # detached head: this term trains the content encoder only
            head = self.model.style_head
            logits = F.linear(pooled, head.weight.detach(), head.bias.detach())
            parts["content_declass"] = content_declass_loss(logits, UniformTarget(k=self.subset.k))

        try:
            report = ae_total(recon, originals, parts, weights=cfg.weights())
        except ValueError:
            dump = self._dump_state()
            raise TrainingDiverged(f"non-finite auto-encoder loss at step {self.step_count}; "
                                   f"state dumped to {dump}")

        self.opt.zero_grad()
        report.total.backward()
        self.opt.step()
        self.step_count += 1
        model.trained_steps = self.step_count

        self.last_batch = {
            "uids": [s.uid for s in batch],
            "recon_target": originals.detach(),
            "style_input": translated.detach(),
            "content_input": skt_anchor.detach(),
        }

        if (self.subset.refresh_every > 0
                and self.step_count % self.subset.refresh_every == 0):
            self.refresh_subset()
        return report

    def refresh_subset(self) -> MomentumClassSubset:
        self.subset = next_class_subset(
            [s.uid for s in self.samples], self.cfg.class_count, self.rng,
            self.model.style_head, self.cfg.refresh_every, step=self.step_count,
        )
        return self.subset

    def _dump_state(self) -> str:
        directory = self.run_dir or Path(".")
        directory.mkdir(parents=True, exist_ok=True)
        path = Path(directory) / f"diverged_ae_step{self.step_count}.pt"
        torch.save({"model": self.model.state_dict(), "step": self.step_count,
                    "config": self.cfg.as_dict()}, path)
        return str(path)

    def save(self, run_dir=None, metrics: dict | None = None) -> Path:
        run_dir = Path(run_dir) if run_dir is not None else self.run_dir
        if run_dir is None:
            raise ValueError("no run_dir to save into")
        return data.save_checkpoint(
            run_dir, "ae", self.step_count,
            {"model": self.model.state_dict()},
            self.cfg.as_dict(), metrics,
            name=f"ae_{self.step_count:08d}.pt",
        )


def _cfg_from_dict(raw: dict) -> AeConfig:
    raw = dict(raw)
    sa = raw.get("style_augment")
    if isinstance(sa, dict):
        sa = dict(sa)
        for key in ("crop_range", "rotate_range", "scale_range"):
            sa[key] = tuple(sa[key])
        raw["style_augment"] = StyleAugmentConfig(**sa)
    for key in ("style_band", "mask_regions", "mask_size_frac"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return AeConfig(**raw)


def load_ae(ckpt_path, expected_config_hash: str | None = None) -> AeModel:
    blob = data.load_checkpoint(ckpt_path, expected_config_hash)
    if blob["role"] != "ae":
        raise ValueError(f"{ckpt_path} is a {blob['role']!r} checkpoint, not 'ae'")
    cfg = _cfg_from_dict(blob["config"])
    model = AeModel(cfg)
    model.load_state_dict(blob["state_dicts"]["model"])
    model.trained_steps = blob["step"]
    model.eval()
    return model


def train_autoencoder(catalog_path, steps: int, out_dir, cfg: AeConfig,
                      log_every: int = 100) -> Path:
    """Full stage-1 loop from a sketch-pair catalog; returns the checkpoint path."""
    out_dir = Path(out_dir)
    samples = load_pair_samples(catalog_path, cfg.resolution, split=None)
    trainer = AeTrainer(cfg, samples, run_dir=out_dir)
    for _ in range(steps):
        report = trainer.step()
        if log_every and trainer.step_count % log_every == 0:
            parts = " ".join(f"{k}={v:.4f}" for k, v in report.scalars().items())
            print(f"[ae {trainer.step_count:>6}] {parts}")
    return trainer.save(out_dir)
