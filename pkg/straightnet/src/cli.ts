#!/usr/bin/env node
import * as fs from 'fs';
import * as path from 'path';
import { parseArgs } from 'node:util';
import { initBackend } from './backend';
import { LABEL_BENT, loadBundle } from './bundle';
import { defaultModelConfig, defaultTrainConfig } from './config';
import { loadCheckpoint } from './checkpoint';
import { straightenInfer } from './infer';
import { loadLpips, mergeLpipsIntoScores, writeLpipsCsv, LpipsRow } from './lpips';
import { readGray, writeGray } from './png';
import { trainToDir } from './train';

const USAGE = `usage: straightnet <command> [options]

commands:
  train        fit the straightening model on a prepared bundle
  straighten   run a checkpoint over a bundle and write composites
  lpips        score image pairs with the perceptual metric

run straightnet <command> --help for the flags of each command.`;

function fail(msg: string): never {
  process.stderr.write(msg + '\n');
  process.exit(2);
}

function intFlag(v: string | undefined, fallback: number): number {
  if (v === undefined) return fallback;
  const n = Number(v);
  if (!Number.isInteger(n)) fail(`expected an integer, got ${v}`);
  return n;
}

function numFlag(v: string | undefined, fallback: number): number {
  if (v === undefined) return fallback;
  const n = Number(v);
  if (!Number.isFinite(n)) fail(`expected a number, got ${v}`);
  return n;
}

async function cmdTrain(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      bundle: { type: 'string' },
      out: { type: 'string' },
      epochs: { type: 'string' },
      batch: { type: 'string' },
      lr: { type: 'string' },
      'weight-decay': { type: 'string' },
      patience: { type: 'string' },
      seed: { type: 'string' },
      'embed-dim': { type: 'string' },
      layers: { type: 'string' },
      heads: { type: 'string' },
      latent: { type: 'string' },
      'cond-dim': { type: 'string' },
      'shared-cvp': { type: 'boolean', default: false },
      help: { type: 'boolean', default: false },
    },
  });
  if (values.help || !values.bundle || !values.out) {
    fail('usage: straightnet train --bundle DIR --out DIR [--epochs N] ' +
         '[--batch N] [--lr X] [--weight-decay X] [--patience N] [--seed N] ' +
         '[--embed-dim N] [--layers N] [--heads N] [--latent N] ' +
         '[--cond-dim N] [--shared-cvp]');
  }
  await initBackend('train');
  const bundle = loadBundle(values.bundle);
  const mc = defaultModelConfig();
  mc.gridRows = bundle.gridRows;
  mc.embedDim = intFlag(values['embed-dim'], mc.embedDim);
  mc.layers = intFlag(values.layers, mc.layers);
  mc.heads = intFlag(values.heads, mc.heads);
  mc.latentDim = intFlag(values.latent, mc.latentDim);
  mc.condDim = intFlag(values['cond-dim'], mc.condDim);
  mc.sharedCvp = values['shared-cvp'] as boolean;
  const tc = defaultTrainConfig();
  tc.maxEpochs = intFlag(values.epochs, tc.maxEpochs);
  tc.batchSize = intFlag(values.batch, tc.batchSize);
  tc.learningRate = numFlag(values.lr, tc.learningRate);
  tc.weightDecay = numFlag(values['weight-decay'], tc.weightDecay);
  tc.patience = intFlag(values.patience, tc.patience);
  tc.seed = intFlag(values.seed, tc.seed);
  const result = trainToDir(bundle, mc, tc, values.out, {
    onEpoch: (log) => {
      process.stderr.write(
          `epoch ${log.epoch}: train ${log.trainLoss.toFixed(4)} ` +
          `val ${log.valLoss.toFixed(4)} ssim ${log.ssim.toFixed(4)} ` +
          `kld ${log.kld.toFixed(4)}\n`);
    },
  });
  process.stderr.write(result.stoppedEarly
      ? `stopped early after ${result.log.length} epochs\n`
      : `finished ${result.log.length} epochs\n`);
}

async function cmdStraighten(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      bundle: { type: 'string' },
      checkpoint: { type: 'string' },
      out: { type: 'string' },
      seed: { type: 'string' },
      help: { type: 'boolean', default: false },
    },
  });
  if (values.help || !values.bundle || !values.checkpoint || !values.out) {
    fail('usage: straightnet straighten --bundle DIR --checkpoint FILE ' +
         '--out DIR [--seed N]');
  }
  await initBackend('infer');
  const bundle = loadBundle(values.bundle);
  const model = loadCheckpoint(values.checkpoint);
  if (model.canvasH !== bundle.canvasH) {
    fail(`checkpoint expects ${model.canvasH}px canvases, ` +
         `bundle has ${bundle.canvasH}px`);
  }
  fs.mkdirSync(values.out, { recursive: true });
  const seed = intFlag(values.seed, 0);
  let processed = 0;
  const failed: { [id: string]: string } = {};
  for (const sample of bundle.samples) {
    try {
      const bent: number[] = [];
      sample.labels.forEach((lab, i) => {
        if (lab === LABEL_BENT) bent.push(i);
      });
      const img = { height: bundle.canvasH, width: bundle.canvasW,
                    data: sample.originalBytes };
      const out = straightenInfer(model, img, bent, { seed });
      writeGray(path.join(values.out, `${sample.id}_straightened.png`), out);
      processed += 1;
    } catch (e) {
      failed[sample.id] = e instanceof Error ? e.message : String(e);
    }
  }
  model.dispose();
  fs.writeFileSync(path.join(values.out, 'report.json'), JSON.stringify(
      { command: 'straighten', processed, failed }, null, 2) + '\n');
  process.stderr.write(`straightened ${processed} image(s), ` +
                       `${Object.keys(failed).length} failed\n`);
  if (processed === 0) process.exit(1);
}

interface PairRecord {
  id: string;
  input: string;
  output: string;
  target?: string;
}

async function cmdLpips(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      pairs: { type: 'string' },
      out: { type: 'string' },
      weights: { type: 'string' },
      scores: { type: 'string' },
      merged: { type: 'string' },
      help: { type: 'boolean', default: false },
    },
  });
  if (values.help || !values.pairs || !values.out) {
    fail('usage: straightnet lpips --pairs FILE --out FILE [--weights FILE] ' +
         '[--scores FILE --merged FILE]\n\npairs: JSON list of ' +
         '{id, input, output, target?}; the distance is output vs target ' +
         'when a target is given, else output vs input.');
  }
  await initBackend('infer');
  const pairs =
      JSON.parse(fs.readFileSync(values.pairs, 'utf-8')) as PairRecord[];
  const base = path.dirname(path.resolve(values.pairs));
  const net = loadLpips(values.weights);
  const rows: LpipsRow[] = [];
  for (const pair of pairs) {
    const ref = pair.target ?? pair.input;
    const a = readGray(path.resolve(base, pair.output));
    const b = readGray(path.resolve(base, ref));
    rows.push({ id: pair.id, lpips: net.distance(a, b) });
  }
  net.dispose();
  writeLpipsCsv(rows, values.out);
  process.stderr.write(`scored ${rows.length} pair(s) -> ${values.out}\n`);
  if (values.scores || values.merged) {
    if (!values.scores || !values.merged) {
      fail('--scores and --merged go together');
    }
    mergeLpipsIntoScores(values.scores, rows, values.merged);
    process.stderr.write(`merged into ${values.merged}\n`);
  }
}

async function main(): Promise<void> {
  const [cmd, ...rest] = process.argv.slice(2);
  switch (cmd) {
    case 'train': return cmdTrain(rest);
    case 'straighten': return cmdStraighten(rest);
    case 'lpips': return cmdLpips(rest);
    case undefined:
    case 'help':
    case '--help':
      process.stdout.write(USAGE + '\n');
      return;
    default:
      fail(`unknown command: ${cmd}\n\n${USAGE}`);
  }
}

main().catch((e) => {
  process.stderr.write((e instanceof Error ? e.message : String(e)) + '\n');
  process.exit(1);
});
