/** Style mixing: stitch 2-4 exemplar images into one square grid so a
 * single upload carries a blended style reference. */

export interface RgbImage {
  readonly width: number;
  readonly height: number;
  /** Row-major RGB triples in [0,1]. */
  readonly data: Float32Array;
}

export function makeRgb(width: number, height: number, fill = 1): RgbImage {
  return { width, height, data: new Float32Array(width * height * 3).fill(fill) };
}

function sampleNearest(src: RgbImage, u: number, v: number): [number, number, number] {
  const x = Math.min(src.width - 1, Math.max(0, Math.round(u * (src.width - 1))));
  const y = Math.min(src.height - 1, Math.max(0, Math.round(v * (src.height - 1))));
  const i = (y * src.width + x) * 3;
  return [src.data[i], src.data[i + 1], src.data[i + 2]];
}

function blit(dst: RgbImage, src: RgbImage,
              x0: number, y0: number, w: number, h: number): void {
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const [r, g, b] = sampleNearest(src, w > 1 ? x / (w - 1) : 0, h > 1 ? y / (h - 1) : 0);
      const i = ((y0 + y) * dst.width + (x0 + x)) * 3;
      dst.data[i] = r;
      dst.data[i + 1] = g;
      dst.data[i + 2] = b;
    }
  }
}

/** Layouts: 2 -> vertical halves; 3 -> left half + two right quadrants;
 * 4 -> 2x2 grid. */
export function stitchStyles(images: RgbImage[], size: number): RgbImage {
  if (images.length < 2 || images.length > 4) {
    throw new Error(`can mix 2-4 styles, got ${images.length}`);
  }
  if (!Number.isInteger(size) || size < 2) {
    throw new Error(`size must be an integer >= 2, got ${size}`);
  }
  const out = makeRgb(size, size);
  const half = Math.floor(size / 2);
  const rest = size - half;
  if (images.length === 2) {
    blit(out, images[0], 0, 0, half, size);
    blit(out, images[1], half, 0, rest, size);
  } else if (images.length === 3) {
    blit(out, images[0], 0, 0, half, size);
    blit(out, images[1], half, 0, rest, half);
    blit(out, images[2], half, half, rest, rest);
  } else {
    blit(out, images[0], 0, 0, half, half);
    blit(out, images[1], half, 0, rest, half);
    blit(out, images[2], 0, half, half, rest);
    blit(out, images[3], half, half, rest, rest);
  }
  return out;
}

export function rgbaBytes(img: RgbImage): Uint8ClampedArray {
  const out = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.width * img.height; i++) {
    out[i * 4] = Math.round(Math.max(0, Math.min(1, img.data[i * 3])) * 255);
    out[i * 4 + 1] = Math.round(Math.max(0, Math.min(1, img.data[i * 3 + 1])) * 255);
    out[i * 4 + 2] = Math.round(Math.max(0, Math.min(1, img.data[i * 3 + 2])) * 255);
    out[i * 4 + 3] = 255;
  }
  return out;
}
