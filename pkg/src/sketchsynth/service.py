"""HTTP inference service over frozen checkpoints.

Exposes sketch extraction and exemplar-based synthesis for the studio
UI (and anything else that speaks multipart PNG). Loaded weights are
immutable; no request mutates server state. Inference is serialized
behind a lock with a bounded admission queue: overflow answers 429.
"""

from __future__ import annotations

import io
import threading
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import FileResponse, JSONResponse, Response
from PIL import Image, UnidentifiedImageError

from . import __version__, data
from .autoencoder import AeModel, load_ae
from .networks import FeatureExtractor, SketchDecoder
from .refiner import RefineGenerator, RefinerConfig, load_refiner, refine
from .sketcher import load_sketch_generator, sketchify

MAX_SIDE_DEFAULT = 4096


class ModelBundle:
    """Everything the endpoints serve: sketch generators, stage-1, stage-2."""

    def __init__(self):
        self.sketchers: list[SketchDecoder] = []
        self.extractor: FeatureExtractor | None = None
        self.ae: AeModel | None = None
        self.refiner: tuple[RefineGenerator, RefinerConfig] | None = None
        self.resolution: int | None = None
        self.ae_step: int | None = None
        self.gan_step: int | None = None

    @property
    def loaded(self) -> bool:
        return bool(self.sketchers) or self.ae is not None

    @classmethod
    def from_run_dir(cls, run_dir) -> "ModelBundle":
        bundle = cls()
        if run_dir is None:
            return bundle
        manifest_path = Path(run_dir) / "manifest.json"
        if not manifest_path.exists():
            return bundle
        manifest = data.load_manifest(manifest_path)
        base = manifest_path.parent

        tom_entries = manifest.for_role("tom")
        for k in range(len(tom_entries)):
            gen, bundle.extractor, tom_cfg = load_sketch_generator(
                manifest_path, k, bundle.extractor)
            bundle.sketchers.append(gen)
            bundle.resolution = tom_cfg.resolution

        ae_entries = manifest.for_role("ae")
        if ae_entries:
            entry = ae_entries[-1]
            bundle.ae = load_ae(base / entry.path, expected_config_hash=entry.config_hash)
            bundle.ae_step = entry.step
            bundle.resolution = bundle.ae.cfg.resolution

        gan_entries = manifest.for_role("gan")
        if gan_entries:
            entry = gan_entries[-1]
            bundle.refiner = load_refiner(base / entry.path, expected_config_hash=entry.config_hash)
            bundle.gan_step = entry.step
        return bundle


def png_bytes(img: np.ndarray) -> bytes:
    """(C,H,W) [-1,1] array -> deterministic PNG bytes."""
    arr = np.round(data.to_unit(np.asarray(img)) * 255.0).astype(np.uint8)
    pil = Image.fromarray(arr[0], "L") if arr.shape[0] == 1 else \
        Image.fromarray(arr.transpose(1, 2, 0), "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


class _BadRequest(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail


def decode_upload(blob: bytes, channels: int, resolution: int, max_side: int) -> np.ndarray:
    """Validate an uploaded image and fit it to the model resolution with
    an aspect-preserving pad (white for sketches, black for RGB)."""
    try:
        pil = Image.open(io.BytesIO(blob))
        pil.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise _BadRequest(400, f"not a decodable image: {exc}")
    w, h = pil.size
    if w < 1 or h < 1:
        raise _BadRequest(422, "image has an empty dimension")
    if max(w, h) > max_side:
        raise _BadRequest(422, f"image side {max(w, h)} exceeds the {max_side}px cap")
    pil = pil.convert("RGB" if channels == 3 else "L")
    if w != h:
        side = max(w, h)
        fill = 255 if channels == 1 else (0, 0, 0)
        canvas = Image.new(pil.mode, (side, side), fill)
        canvas.paste(pil, ((side - w) // 2, (side - h) // 2))
        pil = canvas
    if pil.size != (resolution, resolution):
        pil = pil.resize((resolution, resolution), Image.BILINEAR)
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    arr = arr.transpose(2, 0, 1) if channels == 3 else arr[None]
    return data.from_unit(arr)


def create_app(run_dir=None, gallery_dir=None, queue_size: int = 8,
               max_side: int = MAX_SIDE_DEFAULT) -> FastAPI:
    app = FastAPI(title="sketchsynth", version=__version__)
    bundle = ModelBundle.from_run_dir(run_dir)
    app.state.bundle = bundle
    app.state.gallery_dir = Path(gallery_dir) if gallery_dir is not None else None
    # admission slots bound the in-flight + queued request count; one lock
    # serializes actual model execution
    app.state.slots = threading.BoundedSemaphore(queue_size)
    app.state.infer_lock = threading.Lock()

    def _admitted(fn):
        if not app.state.slots.acquire(blocking=False):
            return _error(429, "inference queue is full, retry later")
        try:
            with app.state.infer_lock:
                return fn()
        except _BadRequest as exc:
            return _error(exc.status, exc.detail)
        finally:
            app.state.slots.release()

    @app.get("/health")
    def health():
        payload = {
            "loaded_checkpoints": {
                "tom": len(bundle.sketchers),
                "ae": bundle.ae_step,
                "gan": bundle.gan_step,
            },
            "resolution": bundle.resolution,
            "version": __version__,
        }
        if not bundle.loaded:
            return JSONResponse(status_code=503,
                                content={**payload, "detail": "no checkpoints loaded"})
        return payload

    @app.get("/styles")
    def styles():
        gallery = app.state.gallery_dir
        if gallery is None or not gallery.exists():
            return []
        return [{"id": p.name, "thumbnail_url": f"/styles/{p.name}"}
                for p in data.list_images(gallery)]

    @app.get("/styles/{name}")
    def style_file(name: str):
        gallery = app.state.gallery_dir
        if gallery is None or "/" in name or ".." in name:
            return _error(404, "no such style")
        path = gallery / name
        if not path.is_file():
            return _error(404, "no such style")
        return FileResponse(path)

    @app.post("/sketchify")
    def sketchify_endpoint(image: UploadFile = File(...),
                           checkpoint_index: int = Form(0)):
        if not bundle.sketchers:
            return _error(503, "no sketch-generator checkpoints loaded")
        if not (0 <= checkpoint_index < len(bundle.sketchers)):
            return _error(404, f"checkpoint index {checkpoint_index} out of range "
                               f"[0, {len(bundle.sketchers)})")

        def run():
            rgb = decode_upload(image.file.read(), 3, bundle.resolution, max_side)
            out = sketchify(bundle.sketchers[checkpoint_index], bundle.extractor,
                            torch.tensor(rgb)[None])[0].numpy()
            return Response(content=png_bytes(out), media_type="image/png",
                            headers={"X-Model-Resolution": str(bundle.resolution)})

        return _admitted(run)

    @app.post("/synthesize")
    def synthesize_endpoint(sketch: UploadFile = File(...),
                            style: UploadFile = File(...),
                            stage: str = Form("ae"),
                            seed: int = Form(0)):
        if stage not in ("ae", "gan"):
            return _error(400, f"stage must be 'ae' or 'gan', got {stage!r}")
        if bundle.ae is None:
            return _error(503, "no auto-encoder checkpoint loaded")
        if stage == "gan" and bundle.refiner is None:
            return _error(503, "no refiner checkpoint loaded")

        def run():
            skt = decode_upload(sketch.file.read(), 1, bundle.resolution, max_side)
            sty = decode_upload(style.file.read(), 3, bundle.resolution, max_side)
            skt_t = torch.tensor(skt)[None]
            sty_t = torch.tensor(sty)[None]
            out = bundle.ae.synthesize(skt_t, sty_t)
            if stage == "gan":
                generator, rcfg = bundle.refiner
                style_code = None
                if generator.style_dim is not None:
                    with torch.no_grad():
                        bundle.ae.eval()
                        style_code = bundle.ae.encode_style(sty_t)
                out = refine(out, generator, rcfg.noise_scale, style_code, noise_seed=seed)
            return Response(content=png_bytes(out[0].numpy()), media_type="image/png",
                            headers={"X-Model-Resolution": str(bundle.resolution)})

        return _admitted(run)

    return app
