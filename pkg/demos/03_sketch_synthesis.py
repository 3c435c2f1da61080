"""Train the sketch generator once, then harvest several sketch styles for
the same images from different checkpoints."""

import numpy as np
import torch

from _common import OUT, RES, corpus, sketcher_run
from sketchsynth import data
from sketchsynth.sketcher import ImageFolder, load_sketch_generator, sketchify

manifest, catalog_path = sketcher_run()
catalog = data.load_catalog(catalog_path, verify=False)

print(f"\ncatalog: {len(catalog.pairs)} images x {len(catalog.checkpoint_ids)} checkpoints, "
      f"{len(catalog.orphans)} orphans")
print("sketch files live in", OUT / "sketch")

rgb, _ = corpus()
imgs = ImageFolder(rgb, RES).images[:4]
extractor = None
sketches = []
for k in range(len(catalog.checkpoint_ids)):
    gen, extractor, _ = load_sketch_generator(manifest, k, extractor)
    sketches.append(sketchify(gen, extractor, imgs))

print("\nhow different are the checkpoint styles? mean |pixel diff| between checkpoints:")
for a in range(len(sketches)):
    for b in range(a + 1, len(sketches)):
        print(f"  ckpt {a} vs {b}: {float((sketches[a] - sketches[b]).abs().mean()):.4f}")

bright = [float(((s + 1) / 2 > 0.8).float().mean()) for s in sketches]
print("white-background fraction per checkpoint:", [f"{v:.0%}" for v in bright])

with torch.no_grad():
    per_image = torch.stack([s.flatten(1).std(dim=1) for s in sketches])
print("sketch pixel std per image (nonzero = content-dependent):",
      np.round(per_image.mean(dim=0).numpy(), 3).tolist())
