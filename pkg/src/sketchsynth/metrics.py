"""Evaluation harness: sketch round-trip, style-code cosine, feature distance.

Every run writes a JSON report carrying config hashes, checkpoint ids,
the extractor id, the pixel-range convention, and per-sample values, so
regressions are traceable beyond the means.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import data
from .autoencoder import AeModel, PairSample
from .networks import FeatureExtractor, SketchDecoder
from .sketcher import sketchify

RANGE_CONVENTION = "pixels in [-1,1]; distances are means of squared differences"

METRIC_NAMES = ("skt_rec", "sty_rec", "percep")


def _chw(t) -> torch.Tensor:
    t = torch.as_tensor(t, dtype=torch.float32)
    if t.dim() != 3:
        raise ValueError(f"expected a single (C,H,W) image, got shape {tuple(t.shape)}")
    return t


def skt_rec(input_sketch, generated,
            sketch_ref: tuple[SketchDecoder, FeatureExtractor]) -> float:
    """Content fidelity: mean-squared distance between the input sketch and
    the sketch re-extracted from the generated image by ONE pinned
    reference checkpoint. Lower is better."""
    if sketch_ref is None:
        raise ValueError("skt_rec needs a pinned sketch-generator reference checkpoint")
    generator, extractor = sketch_ref
    skt = _chw(input_sketch)
    img = _chw(generated)
    resk = sketchify(generator, extractor, img[None])[0]
    if resk.shape != skt.shape:
        raise ValueError(f"sketch shapes differ: {tuple(skt.shape)} vs {tuple(resk.shape)}")
    return float(((resk - skt) ** 2).mean())


def sty_rec(style_img, generated, model: AeModel) -> float:
    """Style fidelity: cosine similarity of the style codes of the exemplar
    and the generated image under the frozen style encoder. Higher is better."""
    if model.trained_steps <= 0:
        raise ValueError("sty_rec needs a trained style encoder")
    a = _chw(style_img)[None]
    b = _chw(generated)[None]
    was = model.training
    model.eval()
    try:
        with torch.no_grad():
            ca = model.encode_style(a)
            cb = model.encode_style(b)
    finally:
        model.train(was)
    return float(F.cosine_similarity(ca, cb, dim=-1)[0])


def perceptual_distance(a, b, extractor: FeatureExtractor,
                        taps: tuple[str, ...] | None = None) -> float:
    """Feature-space distance proxy: per-layer mean-squared feature
    difference averaged over the extractor's tap layers (all of them by
    default, shallow texture statistics through deep structure).
    Non-negative, symmetric, zero iff the features coincide."""
    ta, tb = _chw(a), _chw(b)
    if ta.shape != tb.shape:
        raise ValueError(f"image shapes differ: {tuple(ta.shape)} vs {tuple(tb.shape)}")
    taps = tuple(taps) if taps is not None else tuple(extractor.tap_names())
    total = 0.0
    with torch.no_grad():
        for tap in taps:
            fa = extractor(ta[None], tap=tap)
            fb = extractor(tb[None], tap=tap)
            total += float(((fa - fb) ** 2).mean())
    return total / len(taps)


def evaluate_pairs(
    samples: list[PairSample],
    ae_model: AeModel,
    sketch_ref: tuple[SketchDecoder, FeatureExtractor] | None = None,
    refiner=None,                      # (generator, RefinerConfig) or None
    extractor: FeatureExtractor | None = None,
    metrics: tuple[str, ...] = METRIC_NAMES,
    seed: int = 0,
    checkpoint_ids: dict | None = None,
    out_path=None,
) -> dict:
    """Paired reconstruction metrics over a sample list; writes the report.

    Each sample is synthesized from its own first sketch + own image as
    the exemplar; skt_rec uses the single pinned sketch reference for
    every sample (apples to apples).
    """
    unknown = set(metrics) - set(METRIC_NAMES)
    if unknown:
        raise ValueError(f"unknown metrics {sorted(unknown)}; have {METRIC_NAMES}")
    if "skt_rec" in metrics and sketch_ref is None:
        raise ValueError("skt_rec requested but no sketch reference supplied")
    if "percep" in metrics and extractor is None:
        extractor = sketch_ref[1] if sketch_ref else FeatureExtractor()

    per_sample = []
    for s in samples:
        skt = torch.tensor(s.sketches[0])[None]
        img = torch.tensor(s.image)[None]
        generated = ae_model.synthesize(skt, img)[0]
        if refiner is not None:
            generator, rcfg = refiner
            from .refiner import refine
            style = None
            if generator.style_dim is not None:
                with torch.no_grad():
                    style = ae_model.encode_style(img)
            generated = refine(generated[None], generator, rcfg.noise_scale,
                               style, noise_seed=seed)[0]
        row: dict = {"id": s.uid}
        if "skt_rec" in metrics:
            row["skt_rec"] = skt_rec(s.sketches[0], generated, sketch_ref)
        if "sty_rec" in metrics:
            row["sty_rec"] = sty_rec(s.image, generated, ae_model)
        if "percep" in metrics:
            row["percep"] = perceptual_distance(s.image, generated, extractor)
        per_sample.append(row)

    means = {m: float(np.mean([r[m] for r in per_sample]))
             for m in metrics if per_sample}
    report = {
        "range_convention": RANGE_CONVENTION,
        "extractor_id": extractor.extractor_id if extractor is not None else None,
        "ae_config_hash": data.config_hash(ae_model.cfg.as_dict()),
        "checkpoint_ids": checkpoint_ids or {},
        "seed": seed,
        "n_samples": len(per_sample),
        "metrics": list(metrics),
        "means": means,
        "per_sample": per_sample,
    }
    if out_path is not None:
        data.atomic_write_json(out_path, report)
    return report
