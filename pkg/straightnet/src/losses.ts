import * as tf from '@tensorflow/tfjs';
import { LatentStats } from './model';

/**
 * Training objective: a windowed structural-similarity term on the
 * reconstruction plus the closed-form Gaussian divergence of every
 * cell latent, added with unit weights.
 */

const WINDOW = 11;
const SIGMA = 1.5;
const C1 = 0.01 ** 2;
const C2 = 0.03 ** 2;

let cachedWindow: tf.Tensor4D | null = null;

function gaussianWindow(): tf.Tensor4D {
  if (!cachedWindow) {
    const half = (WINDOW - 1) / 2;
    const weights = new Float32Array(WINDOW * WINDOW);
    let sum = 0;
    for (let r = 0; r < WINDOW; r++) {
      for (let c = 0; c < WINDOW; c++) {
        const w = Math.exp(-((r - half) ** 2 + (c - half) ** 2) / (2 * SIGMA ** 2));
        weights[r * WINDOW + c] = w;
        sum += w;
      }
    }
    for (let i = 0; i < weights.length; i++) weights[i] /= sum;
    cachedWindow = tf.keep(tf.tensor4d(weights, [WINDOW, WINDOW, 1, 1]));
  }
  return cachedWindow;
}

function shapeGuard(a: tf.Tensor, b: tf.Tensor): void {
  if (a.shape.length !== b.shape.length ||
      a.shape.some((d, i) => d !== b.shape[i])) {
    throw new Error(`shape mismatch: ${a.shape} vs ${b.shape}`);
  }
}

/**
 * Mean structural similarity over all full 11x11 Gaussian windows.
 * Inputs are [batch, h, w, 1] intensities in [0, 1].
 */
export function ssim(a: tf.Tensor4D, b: tf.Tensor4D): tf.Scalar {
  shapeGuard(a, b);
  const win = gaussianWindow();
  const filt = (t: tf.Tensor4D) => tf.conv2d(t, win, 1, 'valid');
  const muA = filt(a);
  const muB = filt(b);
  const muAA = muA.square();
  const muBB = muB.square();
  const muAB = muA.mul(muB);
  const varA = filt(a.square() as tf.Tensor4D).sub(muAA);
  const varB = filt(b.square() as tf.Tensor4D).sub(muBB);
  const covAB = filt(a.mul(b) as tf.Tensor4D).sub(muAB);
  const num = muAB.mul(2).add(C1).mul(covAB.mul(2).add(C2));
  const den = muAA.add(muBB).add(C1).mul(varA.add(varB).add(C2));
  return tf.mean(num.div(den)) as tf.Scalar;
}

/** 1 - SSIM; zero when the images agree. */
export function ssimLoss(a: tf.Tensor4D, b: tf.Tensor4D): tf.Scalar {
  return tf.scalar(1).sub(ssim(a, b)) as tf.Scalar;
}

/**
 * Gaussian divergence from the standard normal, summed over every cell
 * processor and latent dimension, averaged over the batch:
 * sum 0.5 * (mu^2 + sigma^2 - log sigma^2 - 1).
 */
export function kldLoss(stats: LatentStats): tf.Scalar {
  shapeGuard(stats.mu, stats.sigma);
  const minSigma = tf.min(stats.sigma).dataSync()[0];
  if (!(minSigma > 0)) {
    throw new Error(`sigma must be positive everywhere, min is ${minSigma}`);
  }
  const sq = stats.sigma.square();
  const perSample = tf.sum(
    stats.mu.square().add(sq).sub(sq.log()).sub(1).mul(0.5), [1, 2]);
  return tf.mean(perSample) as tf.Scalar;
}

export function totalLoss(original: tf.Tensor4D, recon: tf.Tensor4D,
                          stats: LatentStats):
    { total: tf.Scalar; ssimTerm: tf.Scalar; kldTerm: tf.Scalar } {
  const ssimTerm = ssimLoss(original, recon);
  const kldTerm = kldLoss(stats);
  return { total: ssimTerm.add(kldTerm) as tf.Scalar, ssimTerm, kldTerm };
}
