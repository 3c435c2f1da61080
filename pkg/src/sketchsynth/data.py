"""Dataset ingestion, sketch-pair catalogs, and checkpoint management.

Images live on disk as PNG and are normalized to [-1, 1] float32 (C,H,W)
on load. Catalogs and manifests are JSON with paths stored relative to
the file that references them; writes are atomic (temp + rename).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


# ---------------------------------------------------------------------------
# image io

def to_unit(img: np.ndarray) -> np.ndarray:
    """[-1,1] float -> [0,1] float."""
    return np.clip((img + 1.0) / 2.0, 0.0, 1.0)


def from_unit(img: np.ndarray) -> np.ndarray:
    return img.astype(np.float32) * 2.0 - 1.0


def save_image(path, img: np.ndarray) -> None:
    """Write a (C,H,W) [-1,1] array as PNG (L for 1 channel, RGB for 3)."""
    path = Path(path)
    arr = np.round(to_unit(np.asarray(img)) * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        pil = Image.fromarray(arr[0], mode="L")
    elif arr.shape[0] == 3:
        pil = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    else:
        raise ValueError(f"cannot save {arr.shape[0]}-channel image")
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")


def load_image(path, channels: int = 3, size: int | None = None) -> np.ndarray:
    """Read an image as (channels,H,W) float32 in [-1,1]; optional square resize."""
    pil = Image.open(path)
    pil = pil.convert("RGB" if channels == 3 else "L")
    if size is not None and pil.size != (size, size):
        pil = pil.resize((size, size), Image.BILINEAR)
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    if channels == 3:
        arr = arr.transpose(2, 0, 1)
    else:
        arr = arr[None]
    return from_unit(arr)


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir()
                  if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# json helpers

def atomic_write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def config_hash(cfg) -> str:
    """Stable short hash of a config (dataclass or plain dict)."""
    if dataclasses.is_dataclass(cfg) and not isinstance(cfg, type):
        cfg = dataclasses.asdict(cfg)
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# sketch-pair catalog

@dataclass
class SketchPair:
    image_path: str                  # relative to the catalog file
    sketch_paths: list[str]
    split: str = "train"             # train | test
    checksum: str = ""               # sha256 of the image file

    @property
    def stem(self) -> str:
        return Path(self.image_path).stem


@dataclass
class Catalog:
    pairs: list[SketchPair] = field(default_factory=list)
    orphans: list[str] = field(default_factory=list)  # images with zero sketches
    checkpoint_ids: list[int] = field(default_factory=list)
    config_hash: str = ""

    def split_pairs(self, split: str) -> list[SketchPair]:
        return [p for p in self.pairs if p.split == split]


def save_catalog(catalog: Catalog, path) -> None:
    atomic_write_json(path, {
        "pairs": [dataclasses.asdict(p) for p in catalog.pairs],
        "orphans": catalog.orphans,
        "checkpoint_ids": catalog.checkpoint_ids,
        "config_hash": catalog.config_hash,
    })


def load_catalog(path, verify: bool = True) -> Catalog:
    """Load a catalog; with verify, every path must resolve and checksums match."""
    path = Path(path)
    raw = read_json(path)
    catalog = Catalog(
        pairs=[SketchPair(**p) for p in raw["pairs"]],
        orphans=list(raw.get("orphans", [])),
        checkpoint_ids=list(raw.get("checkpoint_ids", [])),
        config_hash=raw.get("config_hash", ""),
    )
    if verify:
        base = path.parent
        for pair in catalog.pairs:
            img = base / pair.image_path
            if not img.exists():
                raise FileNotFoundError(f"catalog references missing image {img}")
            for s in pair.sketch_paths:
                if not (base / s).exists():
                    raise FileNotFoundError(f"catalog references missing sketch {base / s}")
            if pair.checksum and sha256_file(img) != pair.checksum:
                raise ValueError(f"checksum mismatch for {img}")
    return catalog


def resolve_pair(pair: SketchPair, catalog_path) -> tuple[Path, list[Path]]:
    base = Path(catalog_path).parent
    return base / pair.image_path, [base / s for s in pair.sketch_paths]


def _sketch_index(path: Path) -> int | None:
    # <image-stem>.skt<k>.png
    parts = path.name.split(".")
    if len(parts) >= 3 and parts[-2].startswith("skt"):
        try:
            return int(parts[-2][3:])
        except ValueError:
            return None
    return None


def build_catalog(rgb_dir, sketch_dir, out_path, config_hash_value: str = "") -> Catalog:
    """Scan an image dir and a TOM-style sketch dir into a catalog file.

    Sketches follow the `<image-stem>.skt<k>.png` convention. Images with
    no sketches are listed under orphans and excluded from the train split.
    Ordering is lexicographic by stem, so reruns are byte-identical.
    """
    rgb_dir, sketch_dir, out_path = Path(rgb_dir), Path(sketch_dir), Path(out_path)
    base = out_path.parent
    base.mkdir(parents=True, exist_ok=True)

    by_stem: dict[str, list[Path]] = {}
    if sketch_dir.exists():
        for s in list_images(sketch_dir):
            k = _sketch_index(s)
            if k is None:
                continue
            stem = s.name.split(".skt")[0]
            by_stem.setdefault(stem, []).append(s)

    pairs, orphans, ckpt_ids = [], [], set()
    for img in list_images(rgb_dir):
        rel_img = os.path.relpath(img, base)
        sketches = sorted(by_stem.get(img.stem, []), key=_sketch_index)
        if not sketches:
            orphans.append(rel_img)
            continue
        ckpt_ids.update(_sketch_index(s) for s in sketches)
        pairs.append(SketchPair(
            image_path=rel_img,
            sketch_paths=[os.path.relpath(s, base) for s in sketches],
            split="train",
            checksum=sha256_file(img),
        ))
    catalog = Catalog(pairs=pairs, orphans=orphans,
                      checkpoint_ids=sorted(ckpt_ids), config_hash=config_hash_value)
    save_catalog(catalog, out_path)
    return catalog


def split_dataset(catalog: Catalog, test_fraction: float, seed: int) -> Catalog:
    """Seeded disjoint/exhaustive train-test split over the catalog's pairs."""
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(catalog.pairs)
    n_test = round(n * test_fraction)
    if n_test == 0 or n_test == n:
        raise ValueError(f"fraction {test_fraction} yields an empty split for {n} pairs")
    order = np.random.default_rng(seed).permutation(n)
    test_idx = set(order[:n_test].tolist())
    pairs = [dataclasses.replace(p, split="test" if i in test_idx else "train")
             for i, p in enumerate(catalog.pairs)]
    return dataclasses.replace(catalog, pairs=pairs)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_ROLES = ("tom", "ae", "gan")


@dataclass
class CheckpointEntry:
    role: str
    step: int
    path: str  # relative to the manifest
    config_hash: str
    metrics: dict = field(default_factory=dict)


@dataclass
class CheckpointManifest:
    entries: list[CheckpointEntry] = field(default_factory=list)

    def for_role(self, role: str) -> list[CheckpointEntry]:
        return [e for e in self.entries if e.role == role]


def save_manifest(manifest: CheckpointManifest, path) -> None:
    atomic_write_json(path, {"entries": [dataclasses.asdict(e) for e in manifest.entries]})


def load_manifest(path) -> CheckpointManifest:
    raw = read_json(path)
    return CheckpointManifest(entries=[CheckpointEntry(**e) for e in raw["entries"]])


def save_checkpoint(
    run_dir,
    role: str,
    step: int,
    state_dicts: dict,
    config: dict,
    metrics: dict | None = None,
    name: str | None = None,
) -> Path:
    """Write a weights blob plus a manifest entry under run_dir/ckpt/.

    The checkpoint embeds the producing config and its hash; loading
    verifies the hash so stage configs can never be silently mixed.
    """
    if role not in CHECKPOINT_ROLES:
        raise ValueError(f"unknown checkpoint role {role!r}")
    run_dir = Path(run_dir)
    ckpt_dir = run_dir / "ckpt"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    name = name or f"{role}_{step:08d}.pt"
    path = ckpt_dir / name
    chash = config_hash(config)
    torch.save({
        "role": role,
        "step": step,
        "state_dicts": state_dicts,
        "config": config,
        "config_hash": chash,
    }, path)

    manifest_path = run_dir / "manifest.json"
    manifest = load_manifest(manifest_path) if manifest_path.exists() else CheckpointManifest()
    manifest.entries.append(CheckpointEntry(
        role=role, step=step, path=os.path.relpath(path, run_dir),
        config_hash=chash, metrics=dict(metrics or {}),
    ))
    save_manifest(manifest, manifest_path)
    return path


def load_checkpoint(path, expected_config_hash: str | None = None) -> dict:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    actual = config_hash(blob["config"])
    if actual != blob.get("config_hash"):
        raise ValueError(f"checkpoint {path} is corrupt: embedded hash mismatch")
    if expected_config_hash is not None and actual != expected_config_hash:
        raise ValueError(
            f"checkpoint {path} config hash {actual} != expected {expected_config_hash}"
        )
    return blob
