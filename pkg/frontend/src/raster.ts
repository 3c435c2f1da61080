/** Pure sketch rasterization: white background, dark anti-aliased lines.
 *
 * Deterministic for a given session, DOM-free so it runs in tests and
 * workers; the browser layer converts the buffer to PNG via a canvas.
 */

import type { Stroke, StrokeSession } from "./strokes.js";

export interface GrayImage {
  readonly size: number;
  /** Row-major luminance in [0,1]; 1 = white background. */
  readonly data: Float32Array;
}

function segmentDistance(
  px: number, py: number,
  ax: number, ay: number,
  bx: number, by: number,
): number {
  const vx = bx - ax;
  const vy = by - ay;
  const len2 = vx * vx + vy * vy;
  let t = 0;
  if (len2 > 0) {
    t = ((px - ax) * vx + (py - ay) * vy) / len2;
    t = Math.max(0, Math.min(1, t));
  }
  const dx = px - (ax + t * vx);
  const dy = py - (ay + t * vy);
  return Math.hypot(dx, dy);
}

function drawStroke(img: GrayImage, stroke: Stroke, scale: number): void {
  const size = img.size;
  const half = (stroke.width * scale) / 2;
  const reach = half + 1; // one pixel of anti-aliasing falloff
  const pts = stroke.points.map(([x, y]) => [x * scale, y * scale] as const);
  const segments = pts.length === 1 ? [[pts[0], pts[0]] as const]
    : pts.slice(1).map((p, i) => [pts[i], p] as const);

  for (const [a, b] of segments) {
    const x0 = Math.max(0, Math.floor(Math.min(a[0], b[0]) - reach));
    const x1 = Math.min(size - 1, Math.ceil(Math.max(a[0], b[0]) + reach));
    const y0 = Math.max(0, Math.floor(Math.min(a[1], b[1]) - reach));
    const y1 = Math.min(size - 1, Math.ceil(Math.max(a[1], b[1]) + reach));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const d = segmentDistance(x + 0.5, y + 0.5, a[0], a[1], b[0], b[1]);
        const coverage = Math.max(0, Math.min(1, half + 0.5 - d));
        if (coverage > 0) {
          const i = y * size + x;
          img.data[i] = Math.min(img.data[i], 1 - coverage);
        }
      }
    }
  }
}

/** Rasterize a session at the given square size (stroke coordinates are in
 * session canvas units and scale with the output size). */
export function rasterize(session: StrokeSession, size: number): GrayImage {
  if (!Number.isInteger(size) || size < 1) {
    throw new Error(`size must be a positive integer, got ${size}`);
  }
  const img: GrayImage = { size, data: new Float32Array(size * size).fill(1) };
  const scale = size / session.canvasSize;
  for (const stroke of session.list()) {
    drawStroke(img, stroke, scale);
  }
  return img;
}

/** RGBA bytes for canvas putImageData / PNG encoding. */
export function toRgbaBytes(img: GrayImage): Uint8ClampedArray {
  const out = new Uint8ClampedArray(img.size * img.size * 4);
  for (let i = 0; i < img.data.length; i++) {
    const v = Math.round(Math.max(0, Math.min(1, img.data[i])) * 255);
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}

export function darkPixelCount(img: GrayImage, threshold = 0.5): number {
  let n = 0;
  for (const v of img.data) if (v < threshold) n++;
  return n;
}
