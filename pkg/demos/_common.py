"""Shared plumbing for the demo scripts: a tiny cached corpus and models.

Everything is sized to run in well under a minute per script on a laptop
CPU. Artifacts land in demos/out/ and are reused across scripts.
"""

from pathlib import Path

from sketchsynth import data
from sketchsynth.autoencoder import AeConfig, AeTrainer, load_pair_samples
from sketchsynth.sketcher import SketcherConfig, generate_sketches, train_sketcher
from sketchsynth.toydata import write_toy_images, write_toy_sketches

OUT = Path(__file__).parent / "out"
RES = 32

TOM_CFG = SketcherConfig(resolution=RES, extractor_widths=(8, 16, 32), tap="block3",
                         decoder_base=16, critic_hidden=(64, 32), batch_size=4,
                         ckpt_after=100, ckpt_every=40, max_checkpoints=3, seed=0)
AE_CFG = AeConfig(resolution=RES, style_dim=64, content_channels=64, content_grid=8,
                  enc_base=8, dec_base=64, dec_min_width=8, batch_size=4,
                  class_count=2, refresh_every=100, seed=0)


def corpus():
    rgb, bank = OUT / "rgb", OUT / "bank"
    if not rgb.exists():
        write_toy_images(rgb, 16, size=RES, seed=0)
    if not bank.exists():
        write_toy_sketches(bank, 6, size=RES, seed=1)
    return rgb, bank


def sketcher_run(steps: int = 220):
    """Train (once) the tiny sketch generator and emit its sketch catalog."""
    rgb, bank = corpus()
    run = OUT / "run"
    manifest = run / "manifest.json"
    if not manifest.exists():
        print(f"* training the sketch generator for {steps} steps (~30 s) ...")
        train_sketcher(rgb, bank, steps, run, TOM_CFG, log_every=100)
    catalog = OUT / "sketch" / "catalog.json"
    if not catalog.exists():
        print("* generating sketches for the corpus ...")
        generate_sketches(manifest, rgb, OUT / "sketch")
    return manifest, catalog


def trained_ae(steps: int = 250):
    """Train (once) the tiny stage-1 model on the generated sketch pairs."""
    manifest, catalog = sketcher_run()
    run = OUT / "run"
    existing = [e for e in data.load_manifest(manifest).entries if e.role == "ae"]
    if existing:
        from sketchsynth.autoencoder import load_ae
        return load_ae(run / existing[-1].path), catalog
    print(f"* training the auto-encoder for {steps} steps (~40 s) ...")
    samples = load_pair_samples(catalog, RES)
    trainer = AeTrainer(AE_CFG, samples, run_dir=run)
    for _ in range(steps):
        trainer.step()
    trainer.save()
    return trainer.model, catalog
