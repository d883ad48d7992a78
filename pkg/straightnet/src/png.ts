import * as fs from 'node:fs';
import { PNG } from 'pngjs';

export interface GrayImage {
  height: number;
  width: number;
  /** row-major uint8 intensities */
  data: Uint8Array;
}

/** Read a PNG as 8-bit grayscale, averaging channels if needed. */
export function readGray(path: string): GrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const { width, height, data } = png;
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) {
    const o = i * 4;
    // pngjs expands every format to RGBA
    out[i] = Math.round((data[o] + data[o + 1] + data[o + 2]) / 3);
  }
  return { height, width, data: out };
}

export function writeGray(path: string, img: GrayImage): void {
  const png = new PNG({ width: img.width, height: img.height, colorType: 0 });
  for (let i = 0; i < img.data.length; i++) {
    const o = i * 4;
    png.data[o] = img.data[i];
    png.data[o + 1] = img.data[i];
    png.data[o + 2] = img.data[i];
    png.data[o + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}

/** Intensities scaled to [0, 1] for the network. */
export function toUnit(img: GrayImage): Float32Array {
  const out = new Float32Array(img.data.length);
  for (let i = 0; i < out.length; i++) out[i] = img.data[i] / 255;
  return out;
}

/** Clamp-and-round [0, 1] activations back to 8-bit pixels. */
export function fromUnit(data: Float32Array, height: number, width: number): GrayImage {
  const out = new Uint8Array(height * width);
  for (let i = 0; i < out.length; i++) {
    out[i] = Math.max(0, Math.min(255, Math.round(data[i] * 255)));
  }
  return { height, width, data: out };
}
