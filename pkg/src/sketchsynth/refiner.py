"""Stage-2 adversarial refinement over the frozen auto-encoder's outputs.

Only paired data is used: each training target image is refined from the
auto-encoding of its own sketch, never a mismatched one, and the critic
is unconditional. Hinge losses; reconstruction weighted by lam (10).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import data
from .autoencoder import AeModel, PairSample, load_ae, load_pair_samples
from .losses import LossReport, refiner_g_loss
from .networks import RefineGenerator, ScoreCritic, state_dict_digest
from .sketcher import TrainingDiverged


@dataclass
class RefinerConfig:
    resolution: int = 64
    lam: float = 10.0            # reconstruction weight
    use_style_skip: bool = True
    noise_scale: float = 0.1
    g_base: int = 32
    d_base: int = 32
    g_lr: float = 2e-4
    d_lr: float = 2e-4
    batch_size: int = 24
    seed: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class RefinerTrainer:
    """Single-writer stage-2 state; the stage-1 model is frozen on entry."""

    def __init__(self, cfg: RefinerConfig, ae_model: AeModel, run_dir=None):
        if ae_model.trained_steps <= 0:
            raise ValueError("refiner needs a trained stage-1 model")
        if ae_model.cfg.resolution != cfg.resolution:
            raise ValueError(
                f"resolution mismatch: stage-1 {ae_model.cfg.resolution}, refiner {cfg.resolution}"
            )
        self.cfg = cfg
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.ae = ae_model
        self.ae.eval()
        for p in self.ae.parameters():
            p.requires_grad_(False)
        self.ae_digest = state_dict_digest(self.ae)

        torch.manual_seed(cfg.seed)
        style_dim = ae_model.cfg.style_dim if cfg.use_style_skip else None
        self.generator = RefineGenerator(cfg.resolution, cfg.g_base, style_dim)
        self.critic = ScoreCritic(cfg.resolution, cfg.d_base)
        self.g_opt = torch.optim.Adam(self.generator.parameters(), lr=cfg.g_lr, betas=(0.5, 0.999))
        self.d_opt = torch.optim.Adam(self.critic.parameters(), lr=cfg.d_lr, betas=(0.5, 0.999))
        self.rng = np.random.default_rng(cfg.seed)
        self.noise_gen = torch.Generator().manual_seed(cfg.seed)
        self.step_count = 0
        self.last_pairing: list[tuple[str, str]] = []  # (sketch uid, style uid)

    def _ae_pass(self, batch: list[PairSample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
        """Frozen stage-1 forward on each sample's OWN sketch (paired data only)."""
        sketches, styles, pairing = [], [], []
        for s in batch:
            k = int(self.rng.integers(0, len(s.sketches)))
            sketches.append(s.sketches[k])
            styles.append(s.image)
            pairing.append((s.uid, s.uid))
        if any(a != b for a, b in pairing):
            raise AssertionError("mismatched pair entered stage-2 training")
        self.last_pairing = pairing
        skt = torch.tensor(np.stack(sketches))
        sty = torch.tensor(np.stack(styles))
        with torch.no_grad():
            style_code = self.ae.encode_style(sty)
            img_ae = self.ae.decode(style_code, self.ae.encode_content(skt))
        return img_ae, sty, (style_code if self.cfg.use_style_skip else None)

    def step(self, batch: list[PairSample]) -> LossReport:
        if len(batch) == 0:
            raise ValueError("refiner step needs a non-empty batch")
        cfg = self.cfg
        img_ae, styles, style_code = self._ae_pass(batch)

        fake = self.generator(img_ae, style_code, cfg.noise_scale, self.noise_gen)

        # critic update on detached fakes
        d_real = F.relu(1.0 - self.critic(styles)).mean()
        d_fake = F.relu(1.0 + self.critic(fake.detach())).mean()
        self.d_opt.zero_grad()
        (d_real + d_fake).backward()
        self.d_opt.step()

        # generator update through the updated critic
        g_rep = refiner_g_loss(self.critic(fake), fake, styles, lam=cfg.lam)
        self.g_opt.zero_grad()
        g_rep.total.backward()
        self.g_opt.step()

        terms = {
            "d_real": d_real.detach(),
            "d_fake": d_fake.detach(),
            "g_adv": g_rep.terms["adv"].detach(),
            "g_rec": g_rep.terms["rec"].detach(),  # = lam * mse
        }
        try:
            report = LossReport.from_terms(terms)
        except ValueError:
            dump = self._dump_state()
            raise TrainingDiverged(f"non-finite refiner loss at step {self.step_count}; "
                                   f"state dumped to {dump}")
        self.step_count += 1
        return report

    def refine(self, img_ae: torch.Tensor, style: torch.Tensor | None = None,
               noise_seed: int = 0) -> torch.Tensor:
        """Deterministic inference: same inputs and seed give identical bytes."""
        was = self.generator.training
        self.generator.eval()
        try:
            with torch.no_grad():
                gen = torch.Generator().manual_seed(noise_seed)
                return self.generator(img_ae, style, self.cfg.noise_scale, gen)
        finally:
            self.generator.train(was)

    def _dump_state(self) -> str:
        directory = self.run_dir or Path(".")
        directory.mkdir(parents=True, exist_ok=True)
        path = Path(directory) / f"diverged_gan_step{self.step_count}.pt"
        torch.save({"generator": self.generator.state_dict(),
                    "critic": self.critic.state_dict(),
                    "step": self.step_count, "config": self.cfg.as_dict()}, path)
        return str(path)

    def save(self, run_dir=None, metrics: dict | None = None) -> Path:
        run_dir = Path(run_dir) if run_dir is not None else self.run_dir
        if run_dir is None:
            raise ValueError("no run_dir to save into")
        config = {**self.cfg.as_dict(),
                  "ae_config_hash": data.config_hash(self.ae.cfg.as_dict()),
                  "style_dim": self.ae.cfg.style_dim if self.cfg.use_style_skip else None}
        return data.save_checkpoint(
            run_dir, "gan", self.step_count,
            {"generator": self.generator.state_dict(), "critic": self.critic.state_dict()},
            config, metrics, name=f"gan_{self.step_count:08d}.pt",
        )


def refine(img_ae: torch.Tensor, generator: RefineGenerator, noise_scale: float,
           style: torch.Tensor | None = None, noise_seed: int = 0) -> torch.Tensor:
    """Standalone deterministic refinement with an already-loaded generator."""
    was = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            gen = torch.Generator().manual_seed(noise_seed)
            return generator(img_ae, style, noise_scale, gen)
    finally:
        generator.train(was)


def load_refiner(ckpt_path, expected_config_hash: str | None = None
                 ) -> tuple[RefineGenerator, RefinerConfig]:
    blob = data.load_checkpoint(ckpt_path, expected_config_hash)
    if blob["role"] != "gan":
        raise ValueError(f"{ckpt_path} is a {blob['role']!r} checkpoint, not 'gan'")
    raw = dict(blob["config"])
    style_dim = raw.pop("style_dim", None)
    raw.pop("ae_config_hash", None)
    cfg = RefinerConfig(**raw)
    generator = RefineGenerator(cfg.resolution, cfg.g_base,
                                style_dim if cfg.use_style_skip else None)
    generator.load_state_dict(blob["state_dicts"]["generator"])
    generator.eval()
    return generator, cfg


def train_refiner(catalog_path, ae_ckpt, steps: int, out_dir, cfg: RefinerConfig,
                  log_every: int = 100) -> Path:
    """Full stage-2 loop; verifies stage-1 stays bit-identical, returns ckpt path."""
    out_dir = Path(out_dir)
    ae_model = load_ae(ae_ckpt)
    samples = load_pair_samples(catalog_path, cfg.resolution, split=None)
    trainer = RefinerTrainer(cfg, ae_model, run_dir=out_dir)
    for _ in range(steps):
        batch = [samples[i] for i in
                 trainer.rng.choice(len(samples),
                                    size=min(cfg.batch_size, len(samples)), replace=False)]
        report = trainer.step(batch)
        if log_every and trainer.step_count % log_every == 0:
            parts = " ".join(f"{k}={v:.4f}" for k, v in report.scalars().items())
            print(f"[gan {trainer.step_count:>6}] {parts}")
    if state_dict_digest(trainer.ae) != trainer.ae_digest:
        raise RuntimeError("stage-1 weights changed during refiner training")
    return trainer.save(out_dir)
