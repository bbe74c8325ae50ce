/** Model and training configuration for the four-stage convolutional regressor. */

export interface ModelConfig {
  /** Blocks per stage. A zero-depth stage keeps its downsampling step only. */
  readonly stageDepths: readonly [number, number, number, number];
  /** Channels per stage; must be non-decreasing. */
  readonly stageWidths: readonly [number, number, number, number];
  /** Spatial kernel of the in-block convolution (k x k). */
  readonly blockKernel: number;
  /** Hidden-width multiplier of the block's pointwise pair (C -> eC -> C). */
  readonly expansion: number;
  /** Patch size (= stride) of the stem convolution. */
  readonly stemKernel: number;
  /** Patch size (= stride) of the between-stage downsampling convolutions. */
  readonly downsampleKernel: number;
  /** Feature planes expected in the input tensor. */
  readonly inputChannels: number;
  /** Use a dense k x k convolution in blocks instead of the depthwise default. */
  readonly denseSpatialConv: boolean;
}

export const DEFAULT_MODEL: ModelConfig = {
  stageDepths: [1, 1, 1, 1],
  stageWidths: [16, 32, 64, 128],
  blockKernel: 8,
  expansion: 3,
  stemKernel: 4,
  downsampleKernel: 2,
  inputChannels: 4,
  denseSpatialConv: false,
};

/** Settings of the catalogued small variant. */
export const PRESET_SMALL: ModelConfig = {
  ...DEFAULT_MODEL,
  stageDepths: [3, 3, 27, 3],
  stageWidths: [128, 256, 512, 1024],
};

/** Settings of the catalogued large variant (small widths doubled). */
export const PRESET_LARGE: ModelConfig = {
  ...DEFAULT_MODEL,
  stageDepths: [3, 3, 27, 3],
  stageWidths: [256, 512, 1024, 2048],
};

export function modelConfig(partial: Partial<ModelConfig> = {}): ModelConfig {
  const mc = { ...DEFAULT_MODEL, ...partial };
  validateModelConfig(mc);
  return mc;
}

export function validateModelConfig(mc: ModelConfig): void {
  if (mc.stageDepths.length !== 4 || mc.stageWidths.length !== 4) {
    throw new Error("stageDepths and stageWidths must each have 4 entries");
  }
  for (const d of mc.stageDepths) {
    if (!Number.isInteger(d) || d < 0) throw new Error(`invalid stage depth ${d}`);
  }
  for (let i = 0; i < 4; i++) {
    const w = mc.stageWidths[i];
    if (!Number.isInteger(w) || w < 1) throw new Error(`invalid stage width ${w}`);
    if (i > 0 && w < mc.stageWidths[i - 1]) {
      throw new Error("stage widths must be non-decreasing");
    }
  }
  for (const [name, v] of [
    ["blockKernel", mc.blockKernel],
    ["expansion", mc.expansion],
    ["stemKernel", mc.stemKernel],
    ["downsampleKernel", mc.downsampleKernel],
    ["inputChannels", mc.inputChannels],
  ] as const) {
    if (!Number.isInteger(v) || v < 1) throw new Error(`invalid ${name} ${v}`);
  }
}

/** Factor by which the stem plus the three downsamplings shrink each spatial axis. */
export function totalDownsampling(mc: ModelConfig): number {
  return mc.stemKernel * mc.downsampleKernel ** 3;
}

export interface TrainSpec {
  /** Step size of the adaptive-moment optimizer. */
  readonly learningRate: number;
  readonly epochs: number;
  readonly batchSize: number;
  /** Directory holding manifest.json plus tensor and label files. */
  readonly dataDir: string;
  readonly trainSplit: string;
  /** Optional split evaluated (full pass, no updates) after each epoch. */
  readonly valSplit?: string;
  /** Where to write the trained checkpoint (json + bin); omit to skip saving. */
  readonly checkpointPath?: string;
  readonly seed: number;
  /** Stop once the epoch's mean training loss drops below this value. */
  readonly stopAtLoss?: number;
  /** Print a progress line every this many epochs (0 silences logging). */
  readonly logEvery: number;
}

export const DEFAULT_TRAIN: Omit<TrainSpec, "dataDir"> = {
  learningRate: 0.001,
  epochs: 100,
  batchSize: 64,
  trainSplit: "train",
  seed: 0,
  logEvery: 1,
};

export function trainSpec(partial: Partial<TrainSpec> & { dataDir: string }): TrainSpec {
  const ts = { ...DEFAULT_TRAIN, ...partial };
  if (!(ts.learningRate > 0)) throw new Error("learningRate must be > 0");
  if (!Number.isInteger(ts.epochs) || ts.epochs < 1) throw new Error("epochs must be >= 1");
  if (!Number.isInteger(ts.batchSize) || ts.batchSize < 1) {
    throw new Error("batchSize must be >= 1");
  }
  return ts;
}
