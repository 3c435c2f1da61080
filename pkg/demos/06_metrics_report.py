"""Build a metrics report: sketch round-trip, style cosine, feature distance,
with the JSON layout the evaluation CLI emits."""

import json

from _common import OUT, RES, sketcher_run, trained_ae
from sketchsynth.autoencoder import load_pair_samples
from sketchsynth.metrics import evaluate_pairs
from sketchsynth.sketcher import load_sketch_generator

model, catalog = trained_ae()
manifest, _ = sketcher_run()
gen, extractor, _ = load_sketch_generator(manifest, 0)
samples = load_pair_samples(catalog, RES)[:8]

report = evaluate_pairs(
    samples, model,
    sketch_ref=(gen, extractor),
    checkpoint_ids={"tom": 0, "ae": model.trained_steps},
    out_path=OUT / "report.json",
)

print("means:", json.dumps(report["means"], indent=2))
print("range convention:", report["range_convention"])
print("extractor id:", report["extractor_id"])
print(f"per-sample rows: {len(report['per_sample'])} (see {OUT / 'report.json'})")
print("\nfirst row:", json.dumps(report["per_sample"][0], indent=2))
