import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { GrayImage, toUnit } from './png';

const FORMAT = 'straightnet-lpips-v1';

export interface LpipsWeightsFile {
  format: string;
  channels: number[];
  weights: { [name: string]: { shape: number[]; data: string } };
}

/**
 * Perceptual distance between two grayscale images.
 *
 * The images are replicated to three channels and pushed through a
 * small fixed conv pyramid; feature maps are unit-normalized per
 * position, squared differences are reweighted by a non-negative
 * per-channel vector and averaged over space, and the per-stage terms
 * sum to the distance. Weights come from a file so the metric is stable
 * across runs; see tools/gen_lpips_weights.ts.
 */
export class Lpips {
  readonly channels: number[];
  private convs: { w: tf.Tensor4D; b: tf.Tensor1D }[] = [];
  private lins: tf.Tensor1D[] = [];

  constructor(file: LpipsWeightsFile) {
    if (file.format !== FORMAT) {
      throw new Error(`unsupported LPIPS weights format: ${file.format}`);
    }
    this.channels = file.channels;
    let cin = 3;
    for (let i = 0; i < this.channels.length; i++) {
      const cout = this.channels[i];
      this.convs.push({
        w: tf.keep(readTensor(file, `conv${i}.w`, [3, 3, cin, cout])) as tf.Tensor4D,
        b: tf.keep(readTensor(file, `conv${i}.b`, [cout])) as tf.Tensor1D,
      });
      const lin = readTensor(file, `lin${i}.w`, [cout]);
      const min = (lin.min().dataSync() as Float32Array)[0];
      if (min < 0) {
        lin.dispose();
        throw new Error(`lin${i}.w has negative entries`);
      }
      this.lins.push(tf.keep(lin) as tf.Tensor1D);
      cin = cout;
    }
  }

  dispose(): void {
    for (const c of this.convs) { c.w.dispose(); c.b.dispose(); }
    for (const l of this.lins) l.dispose();
  }

  private features(x: tf.Tensor4D): tf.Tensor4D[] {
    const taps: tf.Tensor4D[] = [];
    // grayscale in [0,1] -> 3 channels in [-1,1]
    let z = tf.concat([x, x, x], 3).mul(2).sub(1) as tf.Tensor4D;
    for (let i = 0; i < this.convs.length; i++) {
      z = tf.relu(tf.conv2d(z, this.convs[i].w, 1, 'same')
          .add(this.convs[i].b)) as tf.Tensor4D;
      taps.push(z);
      if (i + 1 < this.convs.length) {
        z = tf.maxPool(z, 2, 2, 'same');
      }
    }
    return taps;
  }

  distance(a: GrayImage, b: GrayImage): number {
    if (a.height !== b.height || a.width !== b.width) {
      throw new Error('image shapes differ');
    }
    return tf.tidy(() => {
      const ta = tf.tensor4d(toUnit(a), [1, a.height, a.width, 1]);
      const tb = tf.tensor4d(toUnit(b), [1, b.height, b.width, 1]);
      const fa = this.features(ta);
      const fb = this.features(tb);
      let total = tf.scalar(0);
      for (let i = 0; i < fa.length; i++) {
        const na = unitNorm(fa[i]);
        const nb = unitNorm(fb[i]);
        const diff = na.sub(nb).square();
        const weighted = diff.mul(this.lins[i]).sum(3);
        total = total.add(weighted.mean());
      }
      return (total.dataSync() as Float32Array)[0];
    });
  }
}

function unitNorm(f: tf.Tensor4D): tf.Tensor4D {
  const norm = f.square().sum(3, true).sqrt().add(1e-10);
  return f.div(norm);
}

function readTensor(file: LpipsWeightsFile, name: string,
                    shape: number[]): tf.Tensor {
  const entry = file.weights[name];
  if (!entry) throw new Error(`LPIPS weights file is missing ${name}`);
  if (entry.shape.join() !== shape.join()) {
    throw new Error(`${name}: stored shape [${entry.shape}] != expected [${shape}]`);
  }
  const buf = Buffer.from(entry.data, 'base64');
  const data = new Float32Array(buf.buffer, buf.byteOffset,
                                buf.byteLength / 4);
  return tf.tensor(Array.from(data), shape);
}

/** Package root regardless of whether we run from src/ or dist/src/. */
export function packageRoot(): string {
  let dir = __dirname;
  for (let i = 0; i < 5; i++) {
    if (fs.existsSync(path.join(dir, 'package.json'))) return dir;
    dir = path.dirname(dir);
  }
  throw new Error('package.json not found above ' + __dirname);
}

export function defaultWeightsPath(): string {
  return path.join(packageRoot(), 'weights', 'lpips.json');
}

export function loadLpips(weightsPath?: string): Lpips {
  const p = weightsPath ?? defaultWeightsPath();
  if (!fs.existsSync(p)) {
    throw new Error(
      `LPIPS weights not found at ${p}; run \`npm run gen-lpips-weights\``);
  }
  const file = JSON.parse(fs.readFileSync(p, 'utf-8')) as LpipsWeightsFile;
  return new Lpips(file);
}

export interface LpipsRow {
  id: string;
  lpips: number;
}

/** lpips.csv: raw distance plus a sign-flipped column so tools that rank
 * the metric upward can sort on it without rescaling. */
export function writeLpipsCsv(rows: LpipsRow[], outPath: string): void {
  const lines = ['id,lpips,lpips_neg'];
  for (const r of rows) {
    lines.push(`${r.id},${r.lpips.toFixed(6)},${(-r.lpips).toFixed(6)}`);
  }
  fs.writeFileSync(outPath, lines.join('\n') + '\n');
}

/**
 * Fill the lpips column of a pipeline scores.csv by id. Rows without a
 * measured distance pass through untouched; the header and column order
 * are preserved.
 */
export function mergeLpipsIntoScores(scoresPath: string, rows: LpipsRow[],
                                     outPath: string): void {
  const text = fs.readFileSync(scoresPath, 'utf-8');
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${scoresPath} is empty`);
  const header = lines[0].split(',');
  const idCol = header.indexOf('id');
  const lpipsCol = header.indexOf('lpips');
  if (idCol < 0 || lpipsCol < 0) {
    throw new Error(`${scoresPath} lacks id/lpips columns`);
  }
  const byId = new Map(rows.map((r) => [r.id, r.lpips]));
  const out = [lines[0]];
  for (const line of lines.slice(1)) {
    const cells = line.split(',');
    const d = byId.get(cells[idCol]);
    if (d !== undefined) cells[lpipsCol] = d.toFixed(4);
    out.push(cells.join(','));
  }
  fs.writeFileSync(outPath, out.join('\n') + '\n');
}
