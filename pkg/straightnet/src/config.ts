/**
 * Model and training knobs.
 *
 * The canvas is always 8*gridRows x 32 with 8x16 cells, so the cell
 * grid is gridRows x 2 and the model carries one variational
 * processor per cell (2 * gridRows of them).
 */

export interface ModelConfig {
  /** cell rows; the canvas is 8*gridRows tall and 32 wide */
  gridRows: number;
  /** token width coming out of the CNN encoder */
  embedDim: number;
  /** transformer depth */
  layers: number;
  heads: number;
  /** latent width of each cell processor */
  latentDim: number;
  /** width of the embedded condition label */
  condDim: number;
  /** ablation: one shared processor instead of one per cell */
  sharedCvp: boolean;
}

export interface TrainConfig {
  batchSize: number;
  learningRate: number;
  weightDecay: number;
  maxEpochs: number;
  /** epochs without validation improvement before stopping */
  patience: number;
  seed: number;
}

export const CELL_H = 8;
export const CELL_W = 16;
export const CANVAS_W = 32;
export const GRID_COLS = CANVAS_W / CELL_W;

export function defaultModelConfig(): ModelConfig {
  return {
    gridRows: 16,
    embedDim: 256,
    layers: 4,
    heads: 8,
    latentDim: 64,
    condDim: 16,
    sharedCvp: false,
  };
}

export function defaultTrainConfig(): TrainConfig {
  return {
    batchSize: 36,
    learningRate: 1e-3,
    weightDecay: 1e-4,
    maxEpochs: 50,
    patience: 10,
    seed: 0,
  };
}

export function canvasHeight(cfg: ModelConfig): number {
  return CELL_H * cfg.gridRows;
}

export function cellCount(cfg: ModelConfig): number {
  return GRID_COLS * cfg.gridRows;
}

export function validateModelConfig(cfg: ModelConfig): void {
  if (!Number.isInteger(cfg.gridRows) || cfg.gridRows < 1) {
    throw new Error(`gridRows must be a positive integer, got ${cfg.gridRows}`);
  }
  if (cfg.embedDim < 1 || cfg.embedDim % cfg.heads !== 0) {
    throw new Error(
      `embedDim ${cfg.embedDim} must be a positive multiple of heads ${cfg.heads}`);
  }
  if (cfg.layers < 0) {
    throw new Error(`layers must be non-negative, got ${cfg.layers}`);
  }
  if (cfg.latentDim < 1) {
    throw new Error(`latentDim must be positive, got ${cfg.latentDim}`);
  }
  if (cfg.condDim < 1) {
    throw new Error(`condDim must be positive, got ${cfg.condDim}`);
  }
}

export function validateTrainConfig(cfg: TrainConfig): void {
  if (cfg.batchSize < 1) throw new Error('batchSize must be positive');
  if (cfg.learningRate <= 0) throw new Error('learningRate must be positive');
  if (cfg.weightDecay < 0) throw new Error('weightDecay must be non-negative');
  if (cfg.maxEpochs < 1) throw new Error('maxEpochs must be positive');
  if (cfg.patience < 1) throw new Error('patience must be positive');
}
