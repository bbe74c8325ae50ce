export { readyBackend } from "./backend.js";
export {
  DEFAULT_MODEL,
  DEFAULT_TRAIN,
  ModelConfig,
  modelConfig,
  PRESET_LARGE,
  PRESET_SMALL,
  totalDownsampling,
  TrainSpec,
  trainSpec,
  validateModelConfig,
} from "./config.js";
export {
  batchOf,
  denormalizePrediction,
  LabelNormalization,
  LoadedSplit,
  loadManifest,
  loadSplit,
  Manifest,
  normalizeLabel,
  Region,
  SampleLabel,
  SplitInfo,
} from "./dataset.js";
export { flopsEstimate, Regressor, regressionLoss, stageSpatialSizes } from "./model.js";
export { CheckpointHeader, loadCheckpoint, saveCheckpoint, WeightSpec } from "./checkpoint.js";
export { EpochLog, evaluateSplit, train, TrainResult } from "./train.js";
export { PredictionRow, predictSplit, writePredictionsCsv } from "./infer.js";
