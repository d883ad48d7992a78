import * as fs from 'node:fs';
import * as path from 'node:path';
import { CELL_H, CELL_W, GRID_COLS } from './config';
import { GrayImage, readGray, toUnit } from './png';

/**
 * Reader for the training-bundle directory the preprocessing toolkit
 * emits: a manifest.json plus an <id>_original.png / <id>_masked.png /
 * <id>_condition.png trio per sample. The condition image encodes one
 * label per 8x16 cell: 0 blank, 128 straight, 255 bent.
 */

export const LABEL_BLANK = 0;
export const LABEL_STRAIGHT = 1;
export const LABEL_BENT = 2;
export const N_LABELS = 3;

// pixel value for each label index
const PALETTE = [0, 128, 255];

export interface BundleSample {
  id: string;
  split: 'train' | 'val';
  maskIndices: number[];
  /** [0,1] intensities, row-major on the canvas */
  original: Float32Array;
  masked: Float32Array;
  condition: Float32Array;
  /** one label index per cell, row-major over the cell grid */
  labels: Int32Array;
  originalBytes: Uint8Array;
}

export interface Bundle {
  dir: string;
  canvasH: number;
  canvasW: number;
  gridRows: number;
  samples: BundleSample[];
}

export function cellLabels(condition: GrayImage, gridRows: number): Int32Array {
  const labels = new Int32Array(gridRows * GRID_COLS);
  for (let r = 0; r < gridRows; r++) {
    for (let c = 0; c < GRID_COLS; c++) {
      const px = condition.data[
        (r * CELL_H + (CELL_H >> 1)) * condition.width + c * CELL_W + (CELL_W >> 1)];
      let best = 0;
      for (let k = 1; k < PALETTE.length; k++) {
        if (Math.abs(px - PALETTE[k]) < Math.abs(px - PALETTE[best])) best = k;
      }
      labels[r * GRID_COLS + c] = best;
    }
  }
  return labels;
}

export function bentCells(labels: Int32Array): number[] {
  const out: number[] = [];
  for (let i = 0; i < labels.length; i++) {
    if (labels[i] === LABEL_BENT) out.push(i);
  }
  return out;
}

function expectShape(img: GrayImage, h: number, w: number, what: string): void {
  if (img.height !== h || img.width !== w) {
    throw new Error(
      `${what} is ${img.height}x${img.width}, expected ${h}x${w}`);
  }
}

export function loadBundle(dir: string): Bundle {
  const manifestPath = path.join(dir, 'manifest.json');
  const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  const records = manifest.samples;
  if (!Array.isArray(records) || records.length === 0) {
    throw new Error(`no samples in ${manifestPath}`);
  }
  const [canvasH, canvasW] = manifest.canvas ?? [128, 32];
  const gridRows = manifest.grid_rows ?? canvasH / CELL_H;
  if (gridRows * CELL_H !== canvasH || canvasW !== GRID_COLS * CELL_W) {
    throw new Error(
      `canvas ${canvasH}x${canvasW} does not tile into 8x16 cells over ${gridRows} rows`);
  }

  const samples: BundleSample[] = records.map((rec: any) => {
    const id = String(rec.id);
    const original = readGray(path.join(dir, `${id}_original.png`));
    const masked = readGray(path.join(dir, `${id}_masked.png`));
    const condition = readGray(path.join(dir, `${id}_condition.png`));
    expectShape(original, canvasH, canvasW, `${id}_original.png`);
    expectShape(masked, canvasH, canvasW, `${id}_masked.png`);
    expectShape(condition, canvasH, canvasW, `${id}_condition.png`);
    return {
      id,
      split: rec.split === 'val' ? 'val' : 'train',
      maskIndices: rec.mask_indices ?? [],
      original: toUnit(original),
      masked: toUnit(masked),
      condition: toUnit(condition),
      labels: cellLabels(condition, gridRows),
      originalBytes: original.data,
    };
  });

  return { dir, canvasH, canvasW, gridRows, samples };
}
