import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';
import { Bundle, BundleSample } from './bundle';
import { saveCheckpoint } from './checkpoint';
import { ModelConfig, TrainConfig, validateTrainConfig } from './config';
import { totalLoss } from './losses';
import { StraightNet } from './model';
import { Rng, deriveSeed } from './rng';

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  /** mean train-split structural similarity (1 - ssim loss term) */
  ssim: number;
  kld: number;
}

export interface TrainResult {
  model: StraightNet;
  log: EpochLog[];
  stoppedEarly: boolean;
}

interface BatchTensors {
  masked: tf.Tensor4D;
  condition: tf.Tensor4D;
  labels: tf.Tensor2D;
  original: tf.Tensor4D;
}

function toBatch(samples: BundleSample[], h: number, w: number,
                 cells: number): BatchTensors {
  const B = samples.length;
  const px = h * w;
  const masked = new Float32Array(B * px);
  const condition = new Float32Array(B * px);
  const original = new Float32Array(B * px);
  const labels = new Int32Array(B * cells);
  samples.forEach((s, i) => {
    masked.set(s.masked, i * px);
    condition.set(s.condition, i * px);
    original.set(s.original, i * px);
    labels.set(s.labels, i * cells);
  });
  return {
    masked: tf.tensor4d(masked, [B, h, w, 1]),
    condition: tf.tensor4d(condition, [B, h, w, 1]),
    labels: tf.tensor2d(labels, [B, cells], 'int32'),
    original: tf.tensor4d(original, [B, h, w, 1]),
  };
}

function disposeBatch(b: BatchTensors): void {
  b.masked.dispose();
  b.condition.dispose();
  b.labels.dispose();
  b.original.dispose();
}

/** Latent draws for one training step, deterministic under the run seed. */
function epsFor(rng: Rng, batch: number, cells: number, latent: number): tf.Tensor3D {
  return tf.tensor3d(rng.normals(batch * cells * latent), [batch, cells, latent]);
}

export interface TrainCallbacks {
  onEpoch?: (log: EpochLog) => void;
}

/** Improvement-based patience: stop after N epochs without a new best. */
export class EarlyStopper {
  private best = Infinity;
  private wait = 0;

  constructor(readonly patience: number) {
    if (patience < 1) throw new Error('patience must be positive');
  }

  /** Feed one epoch's validation loss; true means stop now. */
  update(valLoss: number): boolean {
    if (valLoss < this.best) {
      this.best = valLoss;
      this.wait = 0;
      return false;
    }
    this.wait += 1;
    return this.wait >= this.patience;
  }
}

/**
 * Minimize the similarity+divergence objective over the bundle's train
 * split with Adam. Validation loss (sampling off) drives
 * improvement-based early stopping; training halts after `patience`
 * epochs without a new best or at maxEpochs. All randomness descends
 * from cfg.seed, so reruns reproduce the loss curve exactly.
 */
export function train(bundle: Bundle, modelCfg: ModelConfig, cfg: TrainConfig,
                      callbacks: TrainCallbacks = {}): TrainResult {
  validateTrainConfig(cfg);
  const model = new StraightNet(modelCfg, cfg.seed);
  if (model.canvasH !== bundle.canvasH) {
    throw new Error(
      `model expects a ${model.canvasH}px canvas, bundle is ${bundle.canvasH}px`);
  }
  const trainSet = bundle.samples.filter(s => s.split === 'train');
  const valSet = bundle.samples.filter(s => s.split === 'val');
  if (trainSet.length === 0) {
    throw new Error('bundle has no training samples');
  }

  const optimizer = tf.train.adam(cfg.learningRate);
  const variables = model.trainableVariables();
  const shuffleRng = new Rng(deriveSeed(cfg.seed, 'shuffle'));
  const epsRng = new Rng(deriveSeed(cfg.seed, 'eps'));
  const h = bundle.canvasH;
  const w = bundle.canvasW;
  const cells = model.cells;

  const log: EpochLog[] = [];
  const stopper = new EarlyStopper(cfg.patience);
  let stoppedEarly = false;

  const evalSplit = (samples: BundleSample[]): number => {
    if (samples.length === 0) return NaN;
    let lossSum = 0;
    for (let at = 0; at < samples.length; at += cfg.batchSize) {
      const part = samples.slice(at, at + cfg.batchSize);
      const batch = toBatch(part, h, w, cells);
      const value = tf.tidy(() => {
        const { recon, stats } = model.forward(
          batch.masked, batch.condition, batch.labels, { sampling: false });
        return totalLoss(batch.original, recon, stats).total;
      });
      lossSum += value.dataSync()[0] * part.length;
      value.dispose();
      disposeBatch(batch);
    }
    return lossSum / samples.length;
  };

  for (let epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
    const order = shuffleRng.shuffle(trainSet.map((_, i) => i));
    let lossSum = 0;
    let ssimSum = 0;
    let kldSum = 0;
    for (let at = 0; at < order.length; at += cfg.batchSize) {
      const part = order.slice(at, at + cfg.batchSize).map(i => trainSet[i]);
      const batch = toBatch(part, h, w, cells);
      const eps = epsFor(epsRng, part.length, cells, modelCfg.latentDim);

      let ssimVal = 0;
      let kldVal = 0;
      const lossFn = (): tf.Scalar => {
        const { recon, stats } = model.forward(
          batch.masked, batch.condition, batch.labels, { sampling: true, eps });
        const { total, ssimTerm, kldTerm } = totalLoss(batch.original, recon, stats);
        ssimVal = ssimTerm.dataSync()[0];
        kldVal = kldTerm.dataSync()[0];
        return total;
      };
      const { value, grads } = tf.variableGrads(lossFn, variables);
      const stepLoss = value.dataSync()[0];
      if (!Number.isFinite(stepLoss)) {
        value.dispose();
        eps.dispose();
        disposeBatch(batch);
        throw new Error(
          `non-finite loss at epoch ${epoch} (ssim ${ssimVal}, kld ${kldVal}); ` +
          'lower the learning rate or inspect the bundle for degenerate images');
      }
      if (cfg.weightDecay > 0) {
        // plain L2 coupling, applied through the gradient like the
        // reference optimizer setup
        for (const v of variables) {
          const g = grads[v.name];
          if (!g) continue;
          const decayed = tf.tidy(() => g.add(v.mul(cfg.weightDecay)));
          g.dispose();
          grads[v.name] = decayed;
        }
      }
      optimizer.applyGradients(grads as unknown as
                               { [name: string]: tf.Variable });
      Object.values(grads).forEach(g => g.dispose());
      value.dispose();
      eps.dispose();
      disposeBatch(batch);

      lossSum += stepLoss * part.length;
      ssimSum += (1 - ssimVal) * part.length;
      kldSum += kldVal * part.length;
    }

    const trainLoss = lossSum / trainSet.length;
    const valLoss = valSet.length > 0 ? evalSplit(valSet) : trainLoss;
    const entry: EpochLog = {
      epoch,
      trainLoss,
      valLoss,
      ssim: ssimSum / trainSet.length,
      kld: kldSum / trainSet.length,
    };
    log.push(entry);
    callbacks.onEpoch?.(entry);

    if (stopper.update(valLoss)) {
      stoppedEarly = true;
      break;
    }
  }

  optimizer.dispose();
  return { model, log, stoppedEarly };
}

export function writeTrainLog(log: EpochLog[], file: string): void {
  const lines = ['epoch,train_loss,val_loss,ssim,kld'];
  for (const e of log) {
    lines.push([e.epoch, e.trainLoss, e.valLoss, e.ssim, e.kld]
      .map(x => typeof x === 'number' && !Number.isInteger(x) ? x.toFixed(6) : String(x))
      .join(','));
  }
  fs.writeFileSync(file, lines.join('\n') + '\n');
}

export function trainToDir(bundle: Bundle, modelCfg: ModelConfig,
                           cfg: TrainConfig, outDir: string,
                           callbacks: TrainCallbacks = {}): TrainResult {
  fs.mkdirSync(outDir, { recursive: true });
  const result = train(bundle, modelCfg, cfg, callbacks);
  saveCheckpoint(result.model, path.join(outDir, 'checkpoint.json'));
  writeTrainLog(result.log, path.join(outDir, 'train_log.csv'));
  return result;
}
