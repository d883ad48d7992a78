// Generates weights/lpips.json: a seeded random feature pyramid for the
// perceptual metric. Random conv features are a deliberately cheap stand-in
// for a pretrained backbone; they keep the metric deterministic, symmetric,
// zero on identical inputs, and monotone under growing distortion, which is
// all the toolkit relies on.
import * as fs from 'fs';
import * as path from 'path';
import { packageRoot } from '../src/lpips';
import { Rng, deriveSeed } from '../src/rng';

const CHANNELS = [16, 32, 64];
const SEED = 1118;

function glorot(rng: Rng, shape: number[]): Float32Array {
  const n = shape.reduce((a, b) => a * b, 1);
  const field = shape.length === 4 ? shape[0] * shape[1] : 1;
  const fanIn = field * shape[shape.length - 2];
  const fanOut = field * shape[shape.length - 1];
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  return rng.uniforms(n, -limit, limit);
}

function b64(data: Float32Array): string {
  return Buffer.from(data.buffer, data.byteOffset, data.byteLength)
      .toString('base64');
}

function main(): void {
  const weights: { [name: string]: { shape: number[]; data: string } } = {};
  let cin = 3;
  for (let i = 0; i < CHANNELS.length; i++) {
    const cout = CHANNELS[i];
    const convRng = new Rng(deriveSeed(SEED, `conv${i}`));
    const linRng = new Rng(deriveSeed(SEED, `lin${i}`));
    weights[`conv${i}.w`] = {
      shape: [3, 3, cin, cout],
      data: b64(glorot(convRng, [3, 3, cin, cout])),
    };
    weights[`conv${i}.b`] = {
      shape: [cout],
      data: b64(new Float32Array(cout)),
    };
    weights[`lin${i}.w`] = {
      shape: [cout],
      data: b64(linRng.uniforms(cout, 0.05, 1.0)),
    };
    cin = cout;
  }
  const outDir = path.join(packageRoot(), 'weights');
  fs.mkdirSync(outDir, { recursive: true });
  const outPath = path.join(outDir, 'lpips.json');
  fs.writeFileSync(outPath, JSON.stringify({
    format: 'straightnet-lpips-v1',
    channels: CHANNELS,
    weights,
  }));
  console.log(`wrote ${outPath}`);
}

main();
