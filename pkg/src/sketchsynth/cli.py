"""Command-line entry points: `tom` (sketch synthesis) and `s2i` (stage-1/2,
evaluation, serving).

Config precedence per option: dataclass default < --config file section <
explicit CLI flag. The config file is JSON with sections "tom", "ae",
"gan", and "augment" (augment holds "style" and "sketch_mask" blocks).
"""

from __future__ import annotations

import argparse
import json
import os
from pathlib import Path

from .augment import StyleAugmentConfig
from .autoencoder import AeConfig, load_ae, load_pair_samples, train_autoencoder
from .metrics import METRIC_NAMES, evaluate_pairs
from .refiner import RefinerConfig, load_refiner, train_refiner
from .sketcher import SketcherConfig, generate_sketches, load_sketch_generator, train_sketcher


def _read_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _tupled(raw: dict, keys) -> dict:
    out = dict(raw)
    for k in keys:
        if k in out and isinstance(out[k], list):
            out[k] = tuple(out[k])
    return out


def _sketcher_config(file_cfg: dict, overrides: dict) -> SketcherConfig:
    section = _tupled(file_cfg.get("tom", {}), ("extractor_widths", "critic_hidden"))
    merged = {**section, **{k: v for k, v in overrides.items() if v is not None}}
    return SketcherConfig(**merged)


def _ae_config(file_cfg: dict, overrides: dict) -> AeConfig:
    section = _tupled(file_cfg.get("ae", {}),
                      ("style_band", "mask_regions", "mask_size_frac"))
    augment = file_cfg.get("augment", {})
    if "style" in augment:
        section["style_augment"] = StyleAugmentConfig(
            **_tupled(augment["style"], ("crop_range", "rotate_range", "scale_range")))
    if "sketch_mask" in augment:
        mask = augment["sketch_mask"]
        if "num_regions" in mask:
            n = mask["num_regions"]
            section["mask_regions"] = tuple(n) if isinstance(n, list) else (n, n)
        if "region_size_frac" in mask:
            section["mask_size_frac"] = tuple(mask["region_size_frac"])
    merged = {**section, **{k: v for k, v in overrides.items() if v is not None}}
    return AeConfig(**merged)


def _refiner_config(file_cfg: dict, overrides: dict) -> RefinerConfig:
    merged = {**file_cfg.get("gan", {}),
              **{k: v for k, v in overrides.items() if v is not None}}
    return RefinerConfig(**merged)


# ---------------------------------------------------------------------------
# tom

def tom_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tom", description="Multi-style sketch synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the sketch generator on an RGB dataset")
    p_train.add_argument("--rgb-dir", required=True)
    p_train.add_argument("--sketch-bank", required=True, help="directory of real line sketches")
    p_train.add_argument("--steps", type=int, required=True)
    p_train.add_argument("--ckpt-every", type=int, default=None)
    p_train.add_argument("--ckpt-after", type=int, default=None)
    p_train.add_argument("--out", required=True, help="run directory")
    p_train.add_argument("--res", type=int, default=None)
    p_train.add_argument("--batch", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--config", default=None, help="JSON config file")

    p_gen = sub.add_parser("generate", help="emit one sketch per image per checkpoint")
    p_gen.add_argument("--ckpt-manifest", required=True)
    p_gen.add_argument("--rgb-dir", required=True)
    p_gen.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    if args.command == "train":
        cfg = _sketcher_config(_read_config(args.config), {
            "resolution": args.res, "batch_size": args.batch, "seed": args.seed,
            "ckpt_every": args.ckpt_every, "ckpt_after": args.ckpt_after,
        })
        manifest = train_sketcher(args.rgb_dir, args.sketch_bank, args.steps, args.out, cfg)
        print(f"manifest written to {manifest}")
    elif args.command == "generate":
        catalog = generate_sketches(args.ckpt_manifest, args.rgb_dir, args.out)
        print(f"{len(catalog.pairs)} images x {len(catalog.checkpoint_ids)} checkpoints "
              f"-> {Path(args.out) / 'catalog.json'}")
    return 0


# ---------------------------------------------------------------------------
# s2i

def s2i_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="s2i", description="Exemplar-based sketch-to-image")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ae = sub.add_parser("train-ae", help="stage-1 self-supervised auto-encoder")
    p_ae.add_argument("--catalog", required=True)
    p_ae.add_argument("--rgb-dir", default=None,
                      help="optional root overriding the catalog's image locations")
    p_ae.add_argument("--res", type=int, default=None)
    p_ae.add_argument("--steps", type=int, required=True)
    p_ae.add_argument("--k", type=int, default=None, help="momentum class-subset size")
    p_ae.add_argument("--out", required=True, help="run directory")
    p_ae.add_argument("--batch", type=int, default=None)
    p_ae.add_argument("--seed", type=int, default=None)
    p_ae.add_argument("--vanilla", action="store_true",
                      help="reconstruction-only baseline arm")
    p_ae.add_argument("--config", default=None)

    p_gan = sub.add_parser("train-gan", help="stage-2 adversarial refiner")
    p_gan.add_argument("--ae-ckpt", required=True)
    p_gan.add_argument("--catalog", required=True)
    p_gan.add_argument("--steps", type=int, required=True)
    p_gan.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="reconstruction weight (default 10)")
    p_gan.add_argument("--out", required=True)
    p_gan.add_argument("--batch", type=int, default=None)
    p_gan.add_argument("--seed", type=int, default=None)
    p_gan.add_argument("--config", default=None)

    p_eval = sub.add_parser("eval", help="metric report over a catalog split")
    p_eval.add_argument("--ae", required=True)
    p_eval.add_argument("--gan", default=None)
    p_eval.add_argument("--catalog", required=True)
    p_eval.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--tom-manifest", default=None,
                        help="manifest holding the pinned sketch reference (for skt_rec)")
    p_eval.add_argument("--tom-index", type=int, default=0)
    p_eval.add_argument("--split", default=None, help="train|test (default: all)")
    p_eval.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="HTTP inference service")
    p_serve.add_argument("--run-dir", default=os.environ.get("S2I_RUN_DIR"))
    p_serve.add_argument("--gallery", default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=int(os.environ.get("S2I_PORT", "8601")))
    p_serve.add_argument("--queue-size", type=int, default=8)

    args = parser.parse_args(argv)

    if args.command == "train-ae":
        file_cfg = _read_config(args.config)
        overrides = {"resolution": args.res, "class_count": args.k,
                     "batch_size": args.batch, "seed": args.seed}
        cfg = _ae_config(file_cfg, overrides)
        if args.vanilla:
            cfg = cfg.vanilla()
        if args.rgb_dir is not None:
            samples = load_pair_samples(args.catalog, cfg.resolution, rgb_root=args.rgb_dir)
            from .autoencoder import AeTrainer
            trainer = AeTrainer(cfg, samples, run_dir=args.out)
            for _ in range(args.steps):
                report = trainer.step()
                if trainer.step_count % 100 == 0:
                    print(f"[ae {trainer.step_count:>6}] total={report.scalars()['total']:.4f}")
            ckpt = trainer.save()
        else:
            ckpt = train_autoencoder(args.catalog, args.steps, args.out, cfg)
        print(f"checkpoint written to {ckpt}")

    elif args.command == "train-gan":
        cfg = _refiner_config(_read_config(args.config), {
            "lam": args.lam, "batch_size": args.batch, "seed": args.seed,
        })
        ckpt = train_refiner(args.catalog, args.ae_ckpt, args.steps, args.out, cfg)
        print(f"checkpoint written to {ckpt}")

    elif args.command == "eval":
        metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
        ae_model = load_ae(args.ae)
        sketch_ref = None
        checkpoint_ids: dict = {"ae": ae_model.trained_steps}
        if args.tom_manifest is not None:
            gen, extractor, _ = load_sketch_generator(args.tom_manifest, args.tom_index)
            sketch_ref = (gen, extractor)
            checkpoint_ids["tom"] = args.tom_index
        refiner = None
        if args.gan is not None:
            refiner = load_refiner(args.gan)
            checkpoint_ids["gan"] = str(args.gan)
        samples = load_pair_samples(args.catalog, ae_model.cfg.resolution, split=args.split)
        report = evaluate_pairs(samples, ae_model, sketch_ref=sketch_ref, refiner=refiner,
                                metrics=metrics, seed=args.seed,
                                checkpoint_ids=checkpoint_ids, out_path=args.out)
        print(json.dumps({"means": report["means"], "n": report["n_samples"]}, indent=2))

    elif args.command == "serve":
        if args.run_dir is None:
            parser.error("--run-dir (or S2I_RUN_DIR) is required")
        import uvicorn

        from .service import create_app
        app = create_app(run_dir=args.run_dir, gallery_dir=args.gallery,
                         queue_size=args.queue_size)
        uvicorn.run(app, host=args.host, port=args.port)
    return 0
