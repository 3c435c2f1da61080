"""Drive the HTTP service end to end in-process: health, gallery, sketchify,
and both synthesis stages. Needs the test extra (httpx) for the client."""

from fastapi.testclient import TestClient

from _common import OUT, corpus, trained_ae
from sketchsynth.service import create_app, png_bytes
from sketchsynth.sketcher import ImageFolder
from _common import RES

trained_ae()  # ensures run dir holds tom + ae checkpoints
rgb, _ = corpus()

app = create_app(run_dir=OUT / "run", gallery_dir=rgb, queue_size=4)
client = TestClient(app)

print("GET /health ->", client.get("/health").json())

styles = client.get("/styles").json()
print(f"GET /styles -> {len(styles)} entries, first: {styles[0]}")

img_bytes = png_bytes(ImageFolder(rgb, RES).images[0].numpy())
r = client.post("/sketchify", files={"image": ("img.png", img_bytes, "image/png")},
                data={"checkpoint_index": "1"})
print("POST /sketchify ->", r.status_code, r.headers["content-type"],
      f"{len(r.content)} bytes, model res {r.headers['X-Model-Resolution']}")

sketch = client.post("/sketchify", files={"image": ("img.png", img_bytes, "image/png")},
                     data={"checkpoint_index": "0"}).content

r = client.post("/synthesize",
                files={"sketch": ("s.png", sketch, "image/png"),
                       "style": ("y.png", img_bytes, "image/png")},
                data={"stage": "ae", "seed": "0"})
print("POST /synthesize (ae) ->", r.status_code, f"{len(r.content)} bytes")
(OUT / "service_ae.png").write_bytes(r.content)

r2 = client.post("/synthesize",
                 files={"sketch": ("s.png", sketch, "image/png"),
                        "style": ("y.png", img_bytes, "image/png")},
                 data={"stage": "gan", "seed": "0"})
print("POST /synthesize (gan) ->", r2.status_code,
      "(503 means no refiner checkpoint yet; run demo 05 first to add one)")
print("outputs under", OUT)
