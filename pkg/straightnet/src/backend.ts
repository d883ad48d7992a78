import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

let ready: Promise<string> | null = null;

/**
 * Pick a tfjs backend. The wasm backend is missing conv backprop
 * kernels, so anything that differentiates has to stay on the plain cpu
 * backend; forward-only work (inference, perceptual distance) gets wasm
 * when it loads.
 */
export function initBackend(mode: 'train' | 'infer'): Promise<string> {
  if (mode === 'train') {
    return tf.setBackend('cpu').then(() => tf.ready()).then(() => 'cpu');
  }
  if (!ready) {
    ready = (async () => {
      try {
        const wasm = require('@tensorflow/tfjs-backend-wasm');
        const dir = path.dirname(require.resolve(
            '@tensorflow/tfjs-backend-wasm/dist/tf-backend-wasm.js'));
        wasm.setWasmPaths(dir + path.sep);
        if (await tf.setBackend('wasm')) {
          await tf.ready();
          return 'wasm';
        }
      } catch {
        // fall through
      }
      await tf.setBackend('cpu');
      await tf.ready();
      return 'cpu';
    })();
  }
  return ready;
}
