"""Seed-deterministic augmentation: style-image translations and sketch masking.

Works on numpy float arrays shaped (C, H, W). Given the same (input,
config, rng state) the outputs are bit-identical across processes and
platforms (PCG64). Parallel workers must derive distinct generators,
e.g. np.random.default_rng((seed, worker_id, step)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class StyleAugmentConfig:
    crop_range: tuple[float, float] = (0.8, 1.0)     # kept area fraction
    rotate_range: tuple[float, float] = (-15.0, 15.0)  # degrees
    scale_range: tuple[float, float] = (0.8, 1.2)
    hflip_prob: float = 0.5
    apply_prob: float = 0.5  # independent chance for crop/rotate/scale
    seed: int = 0

    def __post_init__(self):
        for name in ("crop_range", "rotate_range", "scale_range"):
            lo, hi = getattr(self, name)
            if not (lo <= hi):
                raise ValueError(f"{name} is degenerate: ({lo}, {hi})")
        c_lo, c_hi = self.crop_range
        if not (0.0 < c_lo and c_hi <= 1.0):
            raise ValueError(f"crop_range must lie in (0, 1], got {self.crop_range}")
        s_lo, _ = self.scale_range
        if s_lo <= 0:
            raise ValueError("scale_range must be positive")
        for name in ("hflip_prob", "apply_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p}")


@dataclass
class SketchMaskConfig:
    num_regions: int = 6
    region_size_range: tuple[int, int] = (3, 8)  # rectangle side, pixels
    fill_value: float = 1.0  # sketch background level
    seed: int = 0

    def __post_init__(self):
        if self.num_regions < 0:
            raise ValueError("num_regions must be >= 0")
        lo, hi = self.region_size_range
        if not (1 <= lo <= hi):
            raise ValueError(f"region_size_range is degenerate: ({lo}, {hi})")


def _resize(img: np.ndarray, h: int, w: int) -> np.ndarray:
    zh, zw = h / img.shape[1], w / img.shape[2]
    if zh == 1.0 and zw == 1.0:
        return img
    out = ndimage.zoom(img, (1.0, zh, zw), order=1, mode="nearest", grid_mode=True)
    # zoom can be off by one pixel for awkward ratios
    return out[:, :h, :w] if out.shape[1] >= h and out.shape[2] >= w else _pad_to(out, h, w)


def _pad_to(img: np.ndarray, h: int, w: int) -> np.ndarray:
    ph, pw = max(0, h - img.shape[1]), max(0, w - img.shape[2])
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="edge")


def translate_style(
    img: np.ndarray,
    cfg: StyleAugmentConfig,
    rng: np.random.Generator | None = None,
    fill: str = "edge",
) -> np.ndarray:
    """Randomly composed flip/rotate/scale/crop, resampled back to the input shape.

    fill picks the rotation/shrink fill: "edge" replication (styles) or
    "white" (+1.0 background, for line sketches).
    """
    if img.ndim != 3:
        raise ValueError(f"expected (C,H,W), got shape {img.shape}")
    if fill not in ("edge", "white"):
        raise ValueError(f"unknown fill {fill!r}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    c, h, w = img.shape
    out = np.asarray(img, dtype=np.float32)

    if rng.random() < cfg.hflip_prob:
        out = out[:, :, ::-1]

    do_rotate = rng.random() < cfg.apply_prob
    angle = float(rng.uniform(*cfg.rotate_range))
    if do_rotate and angle != 0.0:
        if fill == "edge":
            out = ndimage.rotate(out, angle, axes=(-2, -1), reshape=False, order=1, mode="nearest")
        else:
            out = ndimage.rotate(out, angle, axes=(-2, -1), reshape=False, order=1,
                                 mode="constant", cval=1.0)

    do_scale = rng.random() < cfg.apply_prob
    s = float(rng.uniform(*cfg.scale_range))
    if do_scale and s != 1.0:
        zoomed = ndimage.zoom(out, (1.0, s, s), order=1, mode="nearest", grid_mode=True)
        if s > 1.0:  # center crop back
            y0 = (zoomed.shape[1] - h) // 2
            x0 = (zoomed.shape[2] - w) // 2
            out = zoomed[:, y0:y0 + h, x0:x0 + w]
        else:  # center pad back
            py, px = h - zoomed.shape[1], w - zoomed.shape[2]
            pads = ((0, 0), (py // 2, py - py // 2), (px // 2, px - px // 2))
            if fill == "edge":
                out = np.pad(zoomed, pads, mode="edge")
            else:
                out = np.pad(zoomed, pads, mode="constant", constant_values=1.0)

    do_crop = rng.random() < cfg.apply_prob
    area = float(rng.uniform(*cfg.crop_range))
    if do_crop and area != 1.0:
        side = np.sqrt(area)
        ch, cw = max(1, round(h * side)), max(1, round(w * side))
        if ch > h or cw > w:
            raise ValueError(f"crop {ch}x{cw} larger than image {h}x{w}")
        y0 = int(rng.integers(0, h - ch + 1))
        x0 = int(rng.integers(0, w - cw + 1))
        out = _resize(out[:, y0:y0 + ch, x0:x0 + cw], h, w)

    out = np.ascontiguousarray(out, dtype=np.float32)
    assert out.shape == (c, h, w)
    return out


def mask_sketch(
    skt: np.ndarray,
    cfg: SketchMaskConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Blank out exactly num_regions random rectangles to break sketch lines.

    Pixels outside the sampled rectangles are untouched.
    """
    if skt.ndim != 3:
        raise ValueError(f"expected (C,H,W), got shape {skt.shape}")
    _, h, w = skt.shape
    lo, hi = cfg.region_size_range
    if lo > min(h, w):
        raise ValueError(f"region size {lo} exceeds sketch extent {min(h, w)}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    out = np.array(skt, dtype=np.float32, copy=True)
    for _ in range(cfg.num_regions):
        rh = int(rng.integers(lo, min(hi, h) + 1))
        rw = int(rng.integers(lo, min(hi, w) + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        x0 = int(rng.integers(0, w - rw + 1))
        out[:, y0:y0 + rh, x0:x0 + rw] = cfg.fill_value
    return out
