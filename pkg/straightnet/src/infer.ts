import * as tf from '@tensorflow/tfjs';
import { LABEL_STRAIGHT } from './bundle';
import { CELL_H, CELL_W, GRID_COLS } from './config';
import { GrayImage } from './png';
import { StraightNet } from './model';
import { Rng, deriveSeed } from './rng';

export interface InferOptions {
  /** fill level for masked cells, in pixel units */
  noiseMean?: number;
  noiseStddev?: number;
  seed?: number;
}

function cellBounds(index: number, gridRows: number):
    { r0: number; c0: number } {
  const row = Math.floor(index / GRID_COLS);
  const col = index % GRID_COLS;
  if (row < 0 || row >= gridRows || index < 0) {
    throw new Error(`cell ${index} outside the ${gridRows}x${GRID_COLS} grid`);
  }
  return { r0: row * CELL_H, c0: col * CELL_W };
}

/**
 * Straightening pass for one canvas: the cells flagged as bent are
 * noised out, every condition label is grey (straight), the model runs
 * without latent sampling, and the output keeps the original pixels
 * everywhere except the bent cells. With no bent cells the input comes
 * back bit-for-bit.
 */
export function straightenInfer(model: StraightNet, img: GrayImage,
                                bentCellList: number[],
                                opts: InferOptions = {}): GrayImage {
  const gridRows = model.cfg.gridRows;
  const H = model.canvasH;
  const W = GRID_COLS * CELL_W;
  if (img.height !== H || img.width !== W) {
    throw new Error(`image is ${img.height}x${img.width}, model wants ${H}x${W}`);
  }
  const cells = [...new Set(bentCellList)].sort((a, b) => a - b);
  for (const cell of cells) cellBounds(cell, gridRows);

  const out = new Uint8Array(img.data);
  if (cells.length === 0) {
    return { height: H, width: W, data: out };
  }

  // training fills masked cells with noise around the background level;
  // the mean over the cells we keep is a close stand-in for it
  let fill = opts.noiseMean;
  if (fill === undefined) {
    const bent = new Set(cells);
    let sum = 0;
    let n = 0;
    for (let i = 0; i < img.data.length; i++) {
      const cell = Math.floor(Math.floor(i / W) / CELL_H) * GRID_COLS +
          Math.floor((i % W) / CELL_W);
      if (!bent.has(cell)) { sum += img.data[i]; n += 1; }
    }
    fill = n > 0 ? sum / n : 128;
  }
  const noiseMean = fill / 255;
  const noiseStd = (opts.noiseStddev ?? 25) / 255;
  const rng = new Rng(deriveSeed(opts.seed ?? 0, 'infer-noise'));

  const masked = new Float32Array(img.data.length);
  for (let i = 0; i < masked.length; i++) masked[i] = img.data[i] / 255;
  for (const cell of cells) {
    const { r0, c0 } = cellBounds(cell, gridRows);
    for (let r = r0; r < r0 + CELL_H; r++) {
      for (let c = c0; c < c0 + CELL_W; c++) {
        const v = noiseMean + noiseStd * rng.normal();
        masked[r * W + c] = Math.min(1, Math.max(0, v));
      }
    }
  }

  const grey = new Float32Array(img.data.length).fill(128 / 255);
  const labels = new Int32Array(model.cells).fill(LABEL_STRAIGHT);

  const recon = tf.tidy(() => {
    const m = tf.tensor4d(masked, [1, H, W, 1]);
    const cond = tf.tensor4d(grey, [1, H, W, 1]);
    const lab = tf.tensor2d(labels, [1, model.cells], 'int32');
    return model.forward(m, cond, lab, { sampling: false }).recon;
  });
  const reconData = recon.dataSync() as Float32Array;
  recon.dispose();

  for (const cell of cells) {
    const { r0, c0 } = cellBounds(cell, gridRows);
    for (let r = r0; r < r0 + CELL_H; r++) {
      for (let c = c0; c < c0 + CELL_W; c++) {
        const i = r * W + c;
        out[i] = Math.max(0, Math.min(255, Math.round(reconData[i] * 255)));
      }
    }
  }
  return { height: H, width: W, data: out };
}
