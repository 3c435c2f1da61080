/** Browser studio wiring: draw, pick or mix styles, synthesize, compare.
 *
 * Drawing stays responsive regardless of network state: input handling
 * never awaits a request, and a newer synthesis supersedes the one in
 * flight (SynthesisClient owns the AbortController).
 */

import { BackendError, StyleEntry, SupersededError, SynthesisClient } from "./api.js";
import { debounce } from "./debounce.js";
import { digestBytes, HistoryStrip } from "./history.js";
import { makeRgb, RgbImage, rgbaBytes, stitchStyles } from "./mixer.js";
import { rasterize, toRgbaBytes } from "./raster.js";
import { Point, StrokeSession } from "./strokes.js";

const CANVAS_SIZE = 256;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  parent?.appendChild(node);
  return node;
}

async function bufferToPng(rgba: Uint8ClampedArray, size: number): Promise<Uint8Array> {
  const canvas = document.createElement("canvas");
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d")!;
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
  const blob: Blob = await new Promise((resolve, reject) =>
    canvas.toBlob((b) => (b ? resolve(b) : reject(new Error("toBlob failed"))), "image/png"));
  return new Uint8Array(await blob.arrayBuffer());
}

async function imageToRgb(url: string, size: number): Promise<RgbImage> {
  const img = new Image();
  img.crossOrigin = "anonymous";
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error(`cannot load ${url}`));
    img.src = url;
  });
  const canvas = document.createElement("canvas");
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(img, 0, 0, size, size);
  const rgba = ctx.getImageData(0, 0, size, size).data;
  const out = makeRgb(size, size);
  for (let i = 0; i < size * size; i++) {
    out.data[i * 3] = rgba[i * 4] / 255;
    out.data[i * 3 + 1] = rgba[i * 4 + 1] / 255;
    out.data[i * 3 + 2] = rgba[i * 4 + 2] / 255;
  }
  return out;
}

export function mountStudio(root: HTMLElement, baseUrl = ""): void {
  const client = new SynthesisClient(baseUrl);
  const session = new StrokeSession(CANVAS_SIZE);
  const history = new HistoryStrip();

  root.innerHTML = "";
  const layout = el("div", { class: "studio" }, root);
  const left = el("div", { class: "panel" }, layout);
  const right = el("div", { class: "panel" }, layout);

  // --- drawing surface ---------------------------------------------------
  const canvas = el("canvas", { class: "draw" }, left);
  canvas.width = CANVAS_SIZE;
  canvas.height = CANVAS_SIZE;
  const ctx = canvas.getContext("2d")!;

  function redraw(): void {
    ctx.fillStyle = "#fff";
    ctx.fillRect(0, 0, CANVAS_SIZE, CANVAS_SIZE);
    ctx.strokeStyle = "#111";
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    for (const stroke of session.list()) {
      ctx.lineWidth = stroke.width;
      ctx.beginPath();
      const [x0, y0] = stroke.points[0];
      ctx.moveTo(x0, y0);
      for (const [x, y] of stroke.points.slice(1)) ctx.lineTo(x, y);
      ctx.stroke();
    }
  }
  redraw();

  let current: Point[] | null = null;
  const pos = (ev: PointerEvent): Point => {
    const rect = canvas.getBoundingClientRect();
    return [
      ((ev.clientX - rect.left) / rect.width) * CANVAS_SIZE,
      ((ev.clientY - rect.top) / rect.height) * CANVAS_SIZE,
    ];
  };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    current = [pos(ev)];
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!current) return;
    current.push(pos(ev));
    redraw();
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(...current[0]);
    for (const [x, y] of current.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  });
  canvas.addEventListener("pointerup", () => {
    if (current) {
      session.add(current, 2);
      current = null;
      redraw();
      if (autoToggle.checked) autoSynth.call();
    }
  });

  const controls = el("div", { class: "controls" }, left);
  const undoBtn = el("button", {}, controls);
  undoBtn.textContent = "undo";
  undoBtn.onclick = () => { session.undo(); redraw(); };
  const redoBtn = el("button", {}, controls);
  redoBtn.textContent = "redo";
  redoBtn.onclick = () => { session.redo(); redraw(); };
  const clearBtn = el("button", {}, controls);
  clearBtn.textContent = "clear";
  clearBtn.onclick = () => { session.clear(); redraw(); };

  // --- style picking / mixing --------------------------------------------
  const gallery = el("div", { class: "gallery" }, left);
  const mixed: StyleEntry[] = [];
  let styleFile: Uint8Array | null = null;
  let styleLabel: string | null = null;

  const upload = el("input", { type: "file", accept: "image/png,image/jpeg" }, left);
  upload.onchange = async () => {
    const f = upload.files?.[0];
    if (!f) return;
    styleFile = new Uint8Array(await f.arrayBuffer());
    styleLabel = `upload:${f.name}`;
    toast(`style: ${f.name}`);
  };

  async function loadGallery(): Promise<void> {
    try {
      const entries = await client.styles();
      gallery.innerHTML = "";
      for (const entry of entries) {
        const img = el("img", { src: `${baseUrl}${entry.thumbnail_url}`,
                                title: entry.id, class: "thumb" }, gallery);
        img.onclick = async () => {
          if (mixToggle.checked) {
            if (mixed.length < 4) mixed.push(entry);
            toast(`mixing ${mixed.length} styles`);
            if (mixed.length >= 2) await applyMix();
          } else {
            styleFile = await client.fetchStyleImage(entry);
            styleLabel = entry.id;
            toast(`style: ${entry.id}`);
          }
        };
      }
    } catch (err) {
      toast(String(err));
    }
  }

  async function applyMix(): Promise<void> {
    const imgs = await Promise.all(
      mixed.map((e) => imageToRgb(`${baseUrl}${e.thumbnail_url}`, 128)));
    const stitched = stitchStyles(imgs, 128);
    styleFile = await bufferToPng(rgbaBytes(stitched), 128);
    styleLabel = `mix:${mixed.map((e) => e.id).join("+")}`;
  }

  // --- synthesis controls --------------------------------------------------
  const optRow = el("div", { class: "controls" }, left);
  const stageSel = el("select", {}, optRow);
  for (const stage of ["ae", "gan"]) {
    const o = el("option", { value: stage }, stageSel);
    o.textContent = stage;
  }
  const seedInput = el("input", { type: "number", value: "0" }, optRow);
  const mixToggle = el("input", { type: "checkbox", id: "mix" }, optRow);
  el("label", { for: "mix" }, optRow).textContent = "mix styles";
  const autoToggle = el("input", { type: "checkbox", id: "auto" }, optRow);
  el("label", { for: "auto" }, optRow).textContent = "auto on pen-up";
  const goBtn = el("button", {}, optRow);
  goBtn.textContent = "synthesize";

  const resultImg = el("img", { class: "result" }, right);
  const latencyLabel = el("div", { class: "latency" }, right);
  const historyRow = el("div", { class: "history" }, right);
  const toastBox = el("div", { class: "toast" }, right);

  function toast(msg: string): void {
    toastBox.textContent = msg;
    setTimeout(() => { if (toastBox.textContent === msg) toastBox.textContent = ""; }, 4000);
  }

  async function synthesize(): Promise<void> {
    if (!styleFile) {
      toast("pick or upload a style first");
      return;
    }
    const raster = rasterize(session, CANVAS_SIZE);
    const sketchPng = await bufferToPng(toRgbaBytes(raster), CANVAS_SIZE);
    const payload = {
      sketchPng,
      stylePng: styleFile,
      styleId: styleLabel,
      stage: stageSel.value as "ae" | "gan",
      seed: Number(seedInput.value) || 0,
    };
    try {
      const res = await client.synthesize(payload);
      const url = URL.createObjectURL(res.blob);
      resultImg.src = url;
      latencyLabel.textContent = `${res.latencyMs.toFixed(0)} ms`;
      const entry = history.add({
        stage: payload.stage,
        seed: payload.seed,
        styleId: payload.styleId,
        sketchDigest: digestBytes(payload.sketchPng),
        styleDigest: digestBytes(payload.stylePng),
      }, url, res.latencyMs);
      const thumb = el("img", { src: url, class: "thumb",
                                title: JSON.stringify(entry.request) }, historyRow);
      thumb.onclick = () => { resultImg.src = url; };
    } catch (err) {
      if (err instanceof SupersededError) return; // a newer request took over
      if (err instanceof BackendError) toast(`error ${err.status}: ${err.message}`);
      else toast(String(err));
    }
  }

  const autoSynth = debounce(() => void synthesize(), 300);
  goBtn.onclick = () => void synthesize();
  stageSel.onchange = () => void synthesize(); // re-request with identical payload inputs

  void loadGallery();
  void client.health().then(({ ok, status }) => {
    if (!ok) toast(`backend not ready (${status})`);
  });
}
