// Frame pixels to canvas. The upscale is nearest-neighbor with
// smoothing off so the human sees bit-for-bit the observation an agent
// would; the buffer conversions are pure functions for testing.

import type { FrameMsg } from "./protocol.js";

// node (vitest) fallback; not part of the browser build's type surface
declare const Buffer: { from(s: string, enc: string): Uint8Array };

export function b64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // vitest runs without a DOM; Buffer covers it there
  return new Uint8Array(Buffer.from(b64, "base64"));
}

/** Tightly packed rgb -> rgba with full alpha, row-major. */
export function rgbToRgba(
  rgb: Uint8Array,
  w: number,
  h: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (rgb.length !== w * h * 3) {
    throw new Error(`pixel buffer is ${rgb.length} bytes, want ${w * h * 3}`);
  }
  const rgba = new Uint8ClampedArray(new ArrayBuffer(w * h * 4));
  for (let i = 0, j = 0; i < rgb.length; i += 3, j += 4) {
    rgba[j] = rgb[i];
    rgba[j + 1] = rgb[i + 1];
    rgba[j + 2] = rgb[i + 2];
    rgba[j + 3] = 255;
  }
  return rgba;
}

export class CanvasRenderer {
  private ctx: CanvasRenderingContext2D;
  private buffer: HTMLCanvasElement;
  private bufferCtx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement, private scale = 8) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.ctx.imageSmoothingEnabled = false;
    this.buffer = document.createElement("canvas");
    const bctx = this.buffer.getContext("2d");
    if (!bctx) throw new Error("canvas 2d context unavailable");
    this.bufferCtx = bctx;
  }

  draw(frame: FrameMsg): void {
    const [h, w] = frame.shape;
    if (this.buffer.width !== w || this.buffer.height !== h) {
      this.buffer.width = w;
      this.buffer.height = h;
      this.canvas.width = w * this.scale;
      this.canvas.height = h * this.scale;
      this.ctx.imageSmoothingEnabled = false; // resets with the size
    }
    const rgba = rgbToRgba(b64ToBytes(frame.pixels), w, h);
    this.bufferCtx.putImageData(new ImageData(rgba, w, h), 0, 0);
    this.ctx.drawImage(this.buffer, 0, 0, this.canvas.width, this.canvas.height);
  }
}
