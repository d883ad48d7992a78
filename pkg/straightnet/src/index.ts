export { initBackend } from './backend';
export { Bundle, BundleSample, LABEL_BENT, LABEL_BLANK, LABEL_STRAIGHT,
         bentCells, cellLabels, loadBundle } from './bundle';
export { loadCheckpoint, saveCheckpoint } from './checkpoint';
export { ModelConfig, TrainConfig, CELL_H, CELL_W, GRID_COLS,
         canvasHeight, cellCount, defaultModelConfig, defaultTrainConfig,
         validateModelConfig, validateTrainConfig } from './config';
export { straightenInfer } from './infer';
export { Lpips, loadLpips, mergeLpipsIntoScores, writeLpipsCsv } from './lpips';
export { kldLoss, ssim, ssimLoss, totalLoss } from './losses';
export { EncodeResult, ForwardOptions, ForwardResult, LatentStats,
         StraightNet } from './model';
export { GrayImage, fromUnit, readGray, toUnit, writeGray } from './png';
export { Rng, deriveSeed } from './rng';
export { EarlyStopper, EpochLog, TrainResult, train, trainToDir,
         writeTrainLog } from './train';
