import * as fs from 'node:fs';
import * as tf from '@tensorflow/tfjs';
import { ModelConfig } from './config';
import { StraightNet } from './model';

interface SavedWeight {
  shape: number[];
  /** base64 little-endian float32 */
  data: string;
}

interface CheckpointFile {
  format: 'straightnet-checkpoint-v1';
  config: ModelConfig;
  weights: Record<string, SavedWeight>;
}

export function saveCheckpoint(model: StraightNet, path: string): void {
  const weights: Record<string, SavedWeight> = {};
  for (const [name, variable] of model.vars) {
    const data = variable.dataSync() as Float32Array;
    weights[name] = {
      shape: variable.shape.slice(),
      data: Buffer.from(data.buffer, data.byteOffset, data.byteLength)
        .toString('base64'),
    };
  }
  const file: CheckpointFile = {
    format: 'straightnet-checkpoint-v1',
    config: model.cfg,
    weights,
  };
  fs.writeFileSync(path, JSON.stringify(file));
}

export function loadCheckpoint(path: string): StraightNet {
  if (!fs.existsSync(path)) {
    throw new Error(`checkpoint not found: ${path}`);
  }
  const file: CheckpointFile = JSON.parse(fs.readFileSync(path, 'utf-8'));
  if (file.format !== 'straightnet-checkpoint-v1') {
    throw new Error(`unrecognized checkpoint format in ${path}`);
  }
  const model = new StraightNet(file.config);
  for (const [name, variable] of model.vars) {
    const saved = file.weights[name];
    if (!saved) throw new Error(`checkpoint ${path} is missing ${name}`);
    const buf = Buffer.from(saved.data, 'base64');
    const arr = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
    variable.assign(tf.tensor(arr, saved.shape));
  }
  return model;
}
