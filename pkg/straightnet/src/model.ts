import * as tf from '@tensorflow/tfjs';
import {
  CANVAS_W, GRID_COLS, ModelConfig, canvasHeight, cellCount, validateModelConfig,
} from './config';
import { N_LABELS } from './bundle';
import { Rng, deriveSeed } from './rng';

export interface LatentStats {
  /** [batch, cells, latentDim] */
  mu: tf.Tensor3D;
  sigma: tf.Tensor3D;
}

export interface EncodeResult {
  tokens: tf.Tensor3D;
  /** full / half / quarter resolution encoder features for the decoder */
  h1: tf.Tensor4D;
  s1: tf.Tensor4D;
  s2: tf.Tensor4D;
}

export interface ForwardOptions {
  sampling?: boolean;
  /** standard-normal draws [batch, cells, latentDim]; required when sampling */
  eps?: tf.Tensor3D;
}

export interface ForwardResult {
  recon: tf.Tensor4D;
  stats: LatentStats;
}

function glorot(rng: Rng, shape: number[]): tf.Tensor {
  let fanIn: number;
  let fanOut: number;
  if (shape.length === 4) {
    const rf = shape[0] * shape[1];
    fanIn = rf * shape[2];
    fanOut = rf * shape[3];
  } else {
    fanIn = shape[shape.length - 2];
    fanOut = shape[shape.length - 1];
  }
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  const n = shape.reduce((a, b) => a * b, 1);
  return tf.tensor(rng.uniforms(n, -limit, limit), shape);
}

/** x [B,T,I] times w [I,O] without materializing a tiled w */
function denseAll(x: tf.Tensor3D, w: tf.Variable, b: tf.Variable): tf.Tensor3D {
  const [B, T, I] = x.shape;
  const flat = tf.reshape(x, [B * T, I]);
  const y = tf.matMul(flat, w as unknown as tf.Tensor2D).add(b);
  return tf.reshape(y, [B, T, -1]) as tf.Tensor3D;
}

/**
 * Filter gradient of a stride-1 'same' cross-correlation, as plain
 * typed-array loops. The cpu backend computes the same thing through
 * per-element buffer accessors and is two orders of magnitude slower,
 * which made training infeasible; the forward pass and the input
 * gradient stay on the backend's fast kernels.
 */
export function convFilterGrad(x: Float32Array, dy: Float32Array,
                               B: number, H: number, W: number,
                               ci: number, co: number,
                               kh: number, kw: number): Float32Array {
  const ph = (kh - 1) / 2;
  const pw = (kw - 1) / 2;
  const dw = new Float32Array(kh * kw * ci * co);
  for (let b = 0; b < B; b++) {
    for (let y = 0; y < H; y++) {
      const r0 = Math.max(0, ph - y);
      const r1 = Math.min(kh, H + ph - y);
      for (let xx = 0; xx < W; xx++) {
        const dyOff = ((b * H + y) * W + xx) * co;
        const c0 = Math.max(0, pw - xx);
        const c1 = Math.min(kw, W + pw - xx);
        for (let dr = r0; dr < r1; dr++) {
          const sy = y + dr - ph;
          for (let dc = c0; dc < c1; dc++) {
            const sx = xx + dc - pw;
            const xOff = ((b * H + sy) * W + sx) * ci;
            const wOff = (dr * kw + dc) * ci * co;
            for (let c = 0; c < ci; c++) {
              const xv = x[xOff + c];
              if (xv === 0) continue;
              const row = wOff + c * co;
              for (let o = 0; o < co; o++) {
                dw[row + o] += xv * dy[dyOff + o];
              }
            }
          }
        }
      }
    }
  }
  return dw;
}

const convWithGrad = tf.customGrad((...args) => {
  const x = args[0] as tf.Tensor4D;
  const w = args[1] as tf.Tensor4D;
  const save = args[2] as tf.GradSaveFunc;
  save([x, w]);
  const value = tf.conv2d(x as tf.Tensor4D, w as tf.Tensor4D, 1, 'same');
  const gradFunc = (dy: tf.Tensor, saved: tf.Tensor[]) => {
    const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
    const [kh, kw, ci, co] = ws.shape;
    const [B, H, W] = xs.shape;
    const dx = tf.conv2dTranspose(dy as tf.Tensor4D, ws,
                                  xs.shape, 1, 'same');
    const dwData = convFilterGrad(
        xs.dataSync() as Float32Array, dy.dataSync() as Float32Array,
        B, H, W, ci, co, kh, kw);
    const dw = tf.tensor4d(dwData, [kh, kw, ci, co]);
    return [dx, dw];
  };
  return { value, gradFunc };
});

/** Stride-1 'same' convolution plus bias, differentiable. */
function conv(x: tf.Tensor4D, w: tf.Variable, b: tf.Variable): tf.Tensor4D {
  const cin = (w.shape as number[])[2];
  if (x.shape[3] !== cin) {
    throw new Error(`conv: ${x.shape[3]} channels into a ${cin}-channel kernel`);
  }
  return convWithGrad(x, w as unknown as tf.Tensor4D)
      .add(b) as tf.Tensor4D;
}

/**
 * Conditional variational straightener: a residual CNN tokenizes the
 * masked canvas and its condition image into one vector per 8x16 cell,
 * a transformer mixes the cells, an independent variational processor
 * per cell re-encodes its vector, and a condition-aware upsampling
 * decoder paints the reconstruction.
 */
export class StraightNet {
  readonly cfg: ModelConfig;
  readonly vars = new Map<string, tf.Variable>();
  private readonly c1: number;
  private readonly c2: number;

  constructor(cfg: ModelConfig, seed = 0) {
    validateModelConfig(cfg);
    this.cfg = cfg;
    this.c1 = Math.max(4, Math.round(cfg.embedDim / 4));
    this.c2 = Math.max(8, Math.round(cfg.embedDim / 2));
    tf.tidy(() => this.build(seed));
  }

  get canvasH(): number {
    return canvasHeight(this.cfg);
  }

  get cells(): number {
    return cellCount(this.cfg);
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose();
    this.vars.clear();
  }

  private addVar(name: string, init: tf.Tensor): void {
    this.vars.set(name, tf.variable(init, true, name));
  }

  private v(name: string): tf.Variable {
    const found = this.vars.get(name);
    if (!found) throw new Error(`no variable ${name}`);
    return found;
  }

  private build(seed: number): void {
    const { embedDim: D, latentDim: L, condDim: C, layers, sharedCvp } = this.cfg;
    const rng = new Rng(deriveSeed(seed, 'init'));
    const zeros = (shape: number[]) => tf.zeros(shape);
    const block = (name: string, cin: number, cout: number) => {
      this.addVar(`${name}.w1`, glorot(rng, [3, 3, cin, cout]));
      this.addVar(`${name}.b1`, zeros([cout]));
      this.addVar(`${name}.w2`, glorot(rng, [3, 3, cout, cout]));
      this.addVar(`${name}.b2`, zeros([cout]));
      this.addVar(`${name}.wp`, glorot(rng, [1, 1, cin, cout]));
      this.addVar(`${name}.bp`, zeros([cout]));
    };

    block('enc1', 2, this.c1);
    block('enc2', this.c1, this.c2);
    block('enc3', this.c2, D);

    this.addVar('epos', tf.tensor(rng.normals(this.cells * D), [this.cells, D]).mul(0.02));
    for (let l = 0; l < layers; l++) {
      const p = `tf${l}`;
      this.addVar(`${p}.ln1.g`, tf.ones([D]));
      this.addVar(`${p}.ln1.b`, zeros([D]));
      this.addVar(`${p}.qkv.w`, glorot(rng, [D, 3 * D]));
      this.addVar(`${p}.qkv.b`, zeros([3 * D]));
      this.addVar(`${p}.attn.w`, glorot(rng, [D, D]));
      this.addVar(`${p}.attn.b`, zeros([D]));
      this.addVar(`${p}.ln2.g`, tf.ones([D]));
      this.addVar(`${p}.ln2.b`, zeros([D]));
      this.addVar(`${p}.mlp1.w`, glorot(rng, [D, 2 * D]));
      this.addVar(`${p}.mlp1.b`, zeros([2 * D]));
      this.addVar(`${p}.mlp2.w`, glorot(rng, [2 * D, D]));
      this.addVar(`${p}.mlp2.b`, zeros([D]));
    }

    const nCvp = sharedCvp ? 1 : this.cells;
    this.addVar('cvp.ln.g', tf.ones([D]));
    this.addVar('cvp.ln.b', zeros([D]));
    // damped heads start the latents near the standard normal, so the
    // divergence term does not drown the reconstruction early on
    this.addVar('cvp.mu.w', glorot(rng, [nCvp, D, L]).mul(0.1));
    this.addVar('cvp.mu.b', zeros([nCvp, L]));
    this.addVar('cvp.lv.w', glorot(rng, [nCvp, D, L]).mul(0.1));
    this.addVar('cvp.lv.b', zeros([nCvp, L]));
    this.addVar('cvp.g.w', glorot(rng, [nCvp, L, D]));
    this.addVar('cvp.g.b', zeros([nCvp, D]));
    this.addVar('cond.embed',
      tf.tensor(rng.normals(N_LABELS * C), [N_LABELS, C]).mul(0.02));

    this.addVar('dec.cp2.w', glorot(rng, [1, 1, 1, C]));
    this.addVar('dec.cp2.b', zeros([C]));
    this.addVar('dec.cp1.w', glorot(rng, [1, 1, 1, C]));
    this.addVar('dec.cp1.b', zeros([C]));
    this.addVar('dec.cp0.w', glorot(rng, [1, 1, 1, C]));
    this.addVar('dec.cp0.b', zeros([C]));
    this.addVar('dec.c1.w', glorot(rng, [3, 3, D + C + this.c2 + C, this.c2]));
    this.addVar('dec.c1.b', zeros([this.c2]));
    this.addVar('dec.c2.w', glorot(rng, [3, 3, this.c2 + this.c1 + C, this.c1]));
    this.addVar('dec.c2.b', zeros([this.c1]));
    this.addVar('dec.c3.w', glorot(rng, [3, 3, this.c1 + this.c1 + C, this.c1]));
    this.addVar('dec.c3.b', zeros([this.c1]));
    this.addVar('dec.out.w', glorot(rng, [1, 1, this.c1, 1]));
    this.addVar('dec.out.b', zeros([1]));
  }

  trainableVariables(): tf.Variable[] {
    return [...this.vars.values()];
  }

  private resBlock(x: tf.Tensor4D, name: string): tf.Tensor4D {
    const y1 = tf.relu(conv(x, this.v(`${name}.w1`), this.v(`${name}.b1`)));
    const y2 = conv(y1 as tf.Tensor4D, this.v(`${name}.w2`), this.v(`${name}.b2`));
    const r = conv(x, this.v(`${name}.wp`), this.v(`${name}.bp`));
    return tf.relu(y2.add(r)) as tf.Tensor4D;
  }

  /**
   * Channel-concatenate the masked canvas with its condition image and
   * tokenize: three residual blocks, each followed by max pooling, end
   * on one embedDim vector per cell (grid order, rows outer).
   */
  cnnEncode(masked: tf.Tensor4D, condition: tf.Tensor4D): EncodeResult {
    const H = this.canvasH;
    if (masked.shape[1] !== H || masked.shape[2] !== CANVAS_W) {
      throw new Error(
        `input is ${masked.shape[1]}x${masked.shape[2]}, expected ${H}x${CANVAS_W}`);
    }
    if (condition.shape[1] !== H || condition.shape[2] !== CANVAS_W) {
      throw new Error(
        `condition is ${condition.shape[1]}x${condition.shape[2]}, expected ${H}x${CANVAS_W}`);
    }
    const x = tf.concat([masked, condition], 3) as tf.Tensor4D;
    const h1 = this.resBlock(x, 'enc1');
    const s1 = tf.maxPool(h1, 2, 2, 'same');
    const h2 = this.resBlock(s1, 'enc2');
    const s2 = tf.maxPool(h2, 2, 2, 'same');
    const h3 = this.resBlock(s2, 'enc3');
    // the last pool is anisotropic: 8x16 cells leave gridRows x 2 sites
    const g = tf.maxPool(h3, [2, 4], [2, 4], 'same');
    const tokens = tf.reshape(g, [-1, this.cells, this.cfg.embedDim]) as tf.Tensor3D;
    return { tokens, h1, s1, s2 };
  }

  private layerNorm(x: tf.Tensor3D, prefix: string): tf.Tensor3D {
    const mean = tf.mean(x, -1, true);
    const centered = x.sub(mean);
    const variance = tf.mean(centered.square(), -1, true);
    const normed = centered.div(variance.add(1e-5).sqrt());
    return normed.mul(this.v(`${prefix}.g`)).add(this.v(`${prefix}.b`)) as tf.Tensor3D;
  }

  private attention(x: tf.Tensor3D, prefix: string): tf.Tensor3D {
    const { embedDim: D, heads } = this.cfg;
    const dh = D / heads;
    const [B, T] = x.shape;
    const qkv = denseAll(x, this.v(`${prefix}.qkv.w`), this.v(`${prefix}.qkv.b`));
    const q = tf.slice(qkv, [0, 0, 0], [B, T, D]);
    const k = tf.slice(qkv, [0, 0, D], [B, T, D]);
    const vv = tf.slice(qkv, [0, 0, 2 * D], [B, T, D]);
    const toHeads = (t: tf.Tensor) =>
      tf.transpose(tf.reshape(t, [B, T, heads, dh]), [0, 2, 1, 3]);
    const qh = toHeads(q);
    const kh = toHeads(k);
    const vh = toHeads(vv);
    const scores = tf.matMul(qh, kh, false, true).mul(1 / Math.sqrt(dh));
    const attn = tf.softmax(scores, -1);
    const mixed = tf.matMul(attn, vh);
    const merged = tf.reshape(tf.transpose(mixed, [0, 2, 1, 3]), [B, T, D]) as tf.Tensor3D;
    return denseAll(merged, this.v(`${prefix}.attn.w`), this.v(`${prefix}.attn.b`));
  }

  /** Add position embeddings and run the pre-norm attention stack. */
  transformerEncode(tokens: tf.Tensor3D): tf.Tensor3D {
    let z = tokens.add(this.v('epos')) as tf.Tensor3D;
    for (let l = 0; l < this.cfg.layers; l++) {
      const p = `tf${l}`;
      z = z.add(this.attention(this.layerNorm(z, `${p}.ln1`), p)) as tf.Tensor3D;
      const m = this.layerNorm(z, `${p}.ln2`);
      const hidden = tf.relu(denseAll(m, this.v(`${p}.mlp1.w`), this.v(`${p}.mlp1.b`)));
      z = z.add(denseAll(hidden as tf.Tensor3D,
        this.v(`${p}.mlp2.w`), this.v(`${p}.mlp2.b`))) as tf.Tensor3D;
    }
    return z;
  }

  /** z [B,cells,I] through per-cell matrices w [cells,I,O] (+ b [cells,O]) */
  private perCell(z: tf.Tensor3D, w: tf.Variable, b: tf.Variable): tf.Tensor3D {
    if (this.cfg.sharedCvp) {
      const [B, T, I] = z.shape;
      const flat = tf.reshape(z, [B * T, I]);
      const y = tf.matMul(flat, tf.reshape(w, [I, -1]) as tf.Tensor2D);
      return tf.reshape(y, [B, T, -1]).add(tf.reshape(b, [1, -1])) as tf.Tensor3D;
    }
    const zx = tf.transpose(z, [1, 0, 2]);
    const yx = tf.matMul(zx as tf.Tensor3D, w as unknown as tf.Tensor3D);
    return tf.transpose(yx, [1, 0, 2]).add(b) as tf.Tensor3D;
  }

  /**
   * Per-cell variational re-encoding: linear heads give mu and
   * log-variance, the (optionally sampled) latent is decoded back to
   * embedDim and the embedded condition label is appended.
   */
  cvpForward(z: tf.Tensor3D, labels: tf.Tensor2D, opts: ForwardOptions = {}):
      { out: tf.Tensor3D; stats: LatentStats } {
    const zn = this.layerNorm(z, 'cvp.ln');
    const mu = this.perCell(zn, this.v('cvp.mu.w'), this.v('cvp.mu.b'));
    const lv = this.perCell(zn, this.v('cvp.lv.w'), this.v('cvp.lv.b'));
    const sigma = tf.exp(lv.mul(0.5)) as tf.Tensor3D;
    let h: tf.Tensor3D;
    if (opts.sampling) {
      if (!opts.eps) throw new Error('sampling requires eps draws');
      h = mu.add(sigma.mul(opts.eps)) as tf.Tensor3D;
    } else {
      h = mu;
    }
    const zhat = this.perCell(h, this.v('cvp.g.w'), this.v('cvp.g.b'));
    const cemb = tf.gather(this.v('cond.embed'), labels) as tf.Tensor3D;
    const out = tf.concat([zhat, cemb], 2) as tf.Tensor3D;
    return { out, stats: { mu: mu as tf.Tensor3D, sigma } };
  }

  private condAt(condition: tf.Tensor4D, factor: number, prefix: string): tf.Tensor4D {
    const pooled = factor === 1
      ? condition
      : tf.avgPool(condition, factor, factor, 'same');
    return conv(pooled, this.v(`${prefix}.w`), this.v(`${prefix}.b`));
  }

  /**
   * Three upsample+conv+relu stages back to the canvas. Encoder
   * features and a learned projection of the condition image join at
   * each matching scale; a final 1x1 projection and sigmoid give [0,1]
   * intensities.
   */
  decode(cellFeats: tf.Tensor3D, enc: Pick<EncodeResult, 'h1' | 's1' | 's2'>,
         condition: tf.Tensor4D): tf.Tensor4D {
    const H = this.canvasH;
    const W = CANVAS_W;
    const rows = this.cfg.gridRows;
    const t = tf.reshape(cellFeats,
      [-1, rows, GRID_COLS, cellFeats.shape[2]]) as tf.Tensor4D;

    const u1 = tf.image.resizeNearestNeighbor(t, [H / 4, W / 4]);
    const cp2 = this.condAt(condition, 4, 'dec.cp2');
    const d1 = tf.relu(conv(tf.concat([u1, enc.s2, cp2], 3) as tf.Tensor4D,
      this.v('dec.c1.w'), this.v('dec.c1.b'))) as tf.Tensor4D;

    const u2 = tf.image.resizeNearestNeighbor(d1, [H / 2, W / 2]);
    const cp1 = this.condAt(condition, 2, 'dec.cp1');
    const d2 = tf.relu(conv(tf.concat([u2, enc.s1, cp1], 3) as tf.Tensor4D,
      this.v('dec.c2.w'), this.v('dec.c2.b'))) as tf.Tensor4D;

    const u3 = tf.image.resizeNearestNeighbor(d2, [H, W]);
    const cp0 = this.condAt(condition, 1, 'dec.cp0');
    const d3 = tf.relu(conv(tf.concat([u3, enc.h1, cp0], 3) as tf.Tensor4D,
      this.v('dec.c3.w'), this.v('dec.c3.b'))) as tf.Tensor4D;

    return tf.sigmoid(conv(d3, this.v('dec.out.w'), this.v('dec.out.b')));
  }

  /**
   * Full pass. With sampling disabled the latent is its mean and the
   * whole forward is deterministic.
   */
  forward(masked: tf.Tensor4D, condition: tf.Tensor4D, labels: tf.Tensor2D,
          opts: ForwardOptions = {}): ForwardResult {
    const enc = this.cnnEncode(masked, condition);
    const z = this.transformerEncode(enc.tokens);
    const { out, stats } = this.cvpForward(z, labels, opts);
    const recon = this.decode(out, enc, condition);
    return { recon, stats };
  }
}
