import * as tf from "@tensorflow/tfjs";

import { readyBackend } from "./backend.js";
import { ModelConfig, TrainSpec } from "./config.js";
import { saveCheckpoint } from "./checkpoint.js";
import { batchOf, loadManifest, loadSplit, LoadedSplit } from "./dataset.js";
import { Regressor, regressionLoss } from "./model.js";

export interface EpochLog {
  readonly epoch: number;
  readonly trainLoss: number;
  readonly valLoss?: number;
}

export interface TrainResult {
  readonly model: Regressor;
  readonly history: readonly EpochLog[];
  readonly stoppedEarly: boolean;
}

/** Deterministic 32-bit PRNG for shuffling (Mulberry32). */
function mulberry32(seed: number): () => number {
  let a = seed | 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  return idx;
}

/** Mean loss of the model over a whole split, without updates. */
export function evaluateSplit(model: Regressor, ds: LoadedSplit, batchSize = 256): number {
  let weighted = 0;
  for (let start = 0; start < ds.count; start += batchSize) {
    const indices = [];
    for (let i = start; i < Math.min(start + batchSize, ds.count); i++) indices.push(i);
    const { x, y } = batchOf(ds, indices);
    const loss = tf.tidy(() => regressionLoss(model.forward(x), y));
    weighted += (loss.dataSync() as Float32Array)[0] * indices.length;
    tf.dispose([x, y, loss]);
  }
  return weighted / ds.count;
}

/**
 * Train a model on an exported dataset split.
 *
 * The loss is the batch mean of |range error| + |angle error| in normalized
 * label units, minimized with the adaptive-moment optimizer. Shuffling and
 * weight initialization derive from the configured seed, so two runs with the
 * same inputs produce identical histories and weights.
 */
export async function train(ts: TrainSpec, mc: ModelConfig): Promise<TrainResult> {
  await readyBackend();
  const manifest = loadManifest(ts.dataDir);
  const trainData = loadSplit(ts.dataDir, ts.trainSplit, manifest);
  if (trainData.count === 0) throw new Error(`split "${ts.trainSplit}" is empty`);
  const valData = ts.valSplit ? loadSplit(ts.dataDir, ts.valSplit, manifest) : undefined;

  const model = Regressor.build(mc, ts.seed);
  const optimizer = tf.train.adam(ts.learningRate);
  const vars = model.variables();
  const rand = mulberry32((ts.seed ^ 0x5f356495) | 0);

  const history: EpochLog[] = [];
  let stoppedEarly = false;
  for (let epoch = 0; epoch < ts.epochs; epoch++) {
    const order = shuffled(trainData.count, rand);
    let weighted = 0;
    for (let start = 0; start < order.length; start += ts.batchSize) {
      const indices = order.slice(start, start + ts.batchSize);
      const { x, y } = batchOf(trainData, indices);
      const cost = optimizer.minimize(
        () => regressionLoss(model.forward(x), y),
        true,
        vars,
      ) as tf.Scalar;
      weighted += (cost.dataSync() as Float32Array)[0] * indices.length;
      tf.dispose([x, y, cost]);
    }
    const trainLoss = weighted / trainData.count;
    const valLoss = valData ? evaluateSplit(model, valData, ts.batchSize) : undefined;
    history.push({ epoch: epoch + 1, trainLoss, ...(valLoss !== undefined && { valLoss }) });
    if (ts.logEvery > 0 && (epoch + 1) % ts.logEvery === 0) {
      const valPart = valLoss !== undefined ? ` val_loss=${valLoss.toFixed(6)}` : "";
      console.log(`epoch ${epoch + 1}/${ts.epochs} train_loss=${trainLoss.toFixed(6)}${valPart}`);
    }
    if (ts.stopAtLoss !== undefined && trainLoss < ts.stopAtLoss) {
      stoppedEarly = true;
      break;
    }
  }
  optimizer.dispose();

  if (ts.checkpointPath) {
    saveCheckpoint(ts.checkpointPath, model, {
      label_normalization: manifest.label_normalization,
      region: manifest.region,
      packing: manifest.packing,
      optimizer: "adam",
      learning_rate: ts.learningRate,
      batch_size: ts.batchSize,
      seed: ts.seed,
      epochs_run: history.length,
      final_train_loss: history[history.length - 1].trainLoss,
    });
  }
  return { model, history, stoppedEarly };
}
