"""Synthetic toy corpora for demos and CI-scale training runs.

Images are colored blob compositions with per-image palettes; sketches
are white-background line drawings. Everything is seed-deterministic.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .data import save_image


def make_toy_image(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """One (3,size,size) [-1,1] image: oriented gradient or wave background,
    several textured shapes, and an optional grating overlay.

    Deliberately high-entropy (layout, palette, texture all vary) so that
    memorizing whole images is harder than factoring them into content
    and style.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / max(size - 1, 1)

    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    c0 = rng.uniform(0.05, 0.95, 3).astype(np.float32)
    c1 = rng.uniform(0.05, 0.95, 3).astype(np.float32)
    img = c0[:, None, None] * (1 - ramp)[None] + c1[:, None, None] * ramp[None]
    if rng.random() < 0.5:  # wavy background
        freq = rng.uniform(1.5, 5.0)
        phase = rng.uniform(0, 2 * np.pi)
        wave = 0.5 + 0.5 * np.sin(2 * np.pi * freq * ramp + phase)
        c2 = rng.uniform(0.05, 0.95, 3).astype(np.float32)
        img = img * (1 - 0.5 * wave[None]) + c2[:, None, None] * 0.5 * wave[None]

    for _ in range(int(rng.integers(4, 9))):
        color = rng.uniform(0.0, 1.0, 3).astype(np.float32)
        cy, cx = rng.uniform(0.1, 0.9, 2) * size
        ry, rx = rng.uniform(0.06, 0.28, 2) * size
        kind = rng.random()
        ys, xs = np.mgrid[0:size, 0:size].astype(np.float32)
        if kind < 0.45:  # ellipse
            mask = (((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2) <= 1.0
        elif kind < 0.8:  # rotated rectangle
            ang = rng.uniform(0, np.pi)
            u = (xs - cx) * np.cos(ang) + (ys - cy) * np.sin(ang)
            v = -(xs - cx) * np.sin(ang) + (ys - cy) * np.cos(ang)
            mask = (np.abs(u) <= rx) & (np.abs(v) <= ry)
        else:  # wedge
            ang = rng.uniform(0, 2 * np.pi)
            u = (xs - cx) * np.cos(ang) + (ys - cy) * np.sin(ang)
            v = -(xs - cx) * np.sin(ang) + (ys - cy) * np.cos(ang)
            mask = (u >= 0) & (np.abs(v) <= (rx - u * 0.7)) & (u <= rx)
        fill = color[:, None]
        if rng.random() < 0.4:  # textured fill
            tf = rng.uniform(3, 9)
            ta = rng.uniform(0, np.pi)
            tex = 0.5 + 0.5 * np.sin(2 * np.pi * tf * ((xs / size) * np.cos(ta)
                                                       + (ys / size) * np.sin(ta)))
            color2 = rng.uniform(0.0, 1.0, 3).astype(np.float32)
            fill = color[:, None] * tex[mask][None] + color2[:, None] * (1 - tex[mask])[None]
        img[:, mask] = fill

    if rng.random() < 0.3:  # faint global grating
        gf = rng.uniform(4, 10)
        ga = rng.uniform(0, np.pi)
        grating = np.sin(2 * np.pi * gf * (xx * np.cos(ga) + yy * np.sin(ga)))
        img = img + 0.08 * grating[None]

    return np.clip(img * 2.0 - 1.0, -1.0, 1.0).astype(np.float32)


def make_toy_sketch(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """One (1,size,size) [-1,1] line sketch: dark strokes on white."""
    pil = Image.new("L", (size, size), 255)
    draw = ImageDraw.Draw(pil)
    for _ in range(int(rng.integers(3, 7))):
        n_pts = int(rng.integers(2, 5))
        pts = [tuple(rng.uniform(0.05, 0.95, 2) * size) for _ in range(n_pts)]
        draw.line(pts, fill=int(rng.integers(0, 60)), width=int(rng.integers(1, 3)))
    if rng.random() < 0.5:
        cy, cx = rng.uniform(0.25, 0.75, 2) * size
        r = rng.uniform(0.1, 0.3) * size
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=0, width=1)
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    return arr[None] * 2.0 - 1.0


def write_toy_images(directory, n: int, size: int = 64, seed: int = 0) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n):
        p = directory / f"img_{i:04d}.png"
        save_image(p, make_toy_image(rng, size))
        paths.append(p)
    return paths


def write_toy_sketches(directory, n: int, size: int = 64, seed: int = 0) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n):
        p = directory / f"sketch_{i:04d}.png"
        save_image(p, make_toy_sketch(rng, size))
        paths.append(p)
    return paths
