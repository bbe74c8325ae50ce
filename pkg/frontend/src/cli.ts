#!/usr/bin/env node
import { parseArgs } from "node:util";

import { readyBackend } from "./backend.js";
import { loadCheckpoint } from "./checkpoint.js";
import {
  ModelConfig,
  modelConfig,
  PRESET_LARGE,
  PRESET_SMALL,
  trainSpec,
} from "./config.js";
import { predictSplit, writePredictionsCsv } from "./infer.js";
import { flopsEstimate } from "./model.js";
import { train } from "./train.js";

const USAGE = `usage: squint-regressor <command> [options]

commands:
  train   --data DIR [--checkpoint PATH] [--split NAME] [--val-split NAME]
          [--epochs N] [--batch-size N] [--lr X] [--seed N] [--stop-at-loss X]
          [--log-every N] [model options]
  infer   --checkpoint PATH --data DIR --out FILE [--split NAME] [--batch-size N]
  flops   [--rows N] [--cols N] [model options]

model options:
  --preset small|large     catalogued stage settings
  --depths A,B,C,D         blocks per stage
  --widths A,B,C,D         channels per stage
  --kernel K               block spatial kernel (default 8)
  --expansion E            block hidden-width multiplier (default 3)
  --input-channels C       feature planes in the input (default 4)
  --dense-conv             dense spatial convolution instead of depthwise
`;

class UsageError extends Error {}

function intFlag(value: string | undefined, fallback: number, name: string): number {
  if (value === undefined) return fallback;
  const n = Number(value);
  if (!Number.isInteger(n)) throw new UsageError(`--${name} must be an integer, got "${value}"`);
  return n;
}

function floatFlag(value: string | undefined, name: string): number | undefined {
  if (value === undefined) return undefined;
  const n = Number(value);
  if (!Number.isFinite(n)) throw new UsageError(`--${name} must be a number, got "${value}"`);
  return n;
}

function fourInts(value: string, name: string): [number, number, number, number] {
  const parts = value.split(",").map((p) => Number(p.trim()));
  if (parts.length !== 4 || parts.some((p) => !Number.isInteger(p))) {
    throw new UsageError(`--${name} must be four comma-separated integers, got "${value}"`);
  }
  return parts as [number, number, number, number];
}

const MODEL_OPTIONS = {
  preset: { type: "string" },
  depths: { type: "string" },
  widths: { type: "string" },
  kernel: { type: "string" },
  expansion: { type: "string" },
  "input-channels": { type: "string" },
  "dense-conv": { type: "boolean" },
} as const;

function modelFromFlags(values: Record<string, string | boolean | undefined>): ModelConfig {
  let base: Partial<ModelConfig> = {};
  if (values.preset !== undefined) {
    const presets: Record<string, ModelConfig> = { small: PRESET_SMALL, large: PRESET_LARGE };
    const preset = presets[values.preset as string];
    if (!preset) throw new UsageError(`unknown --preset "${values.preset}" (small|large)`);
    base = preset;
  }
  if (values.depths !== undefined) {
    base = { ...base, stageDepths: fourInts(values.depths as string, "depths") };
  }
  if (values.widths !== undefined) {
    base = { ...base, stageWidths: fourInts(values.widths as string, "widths") };
  }
  if (values.kernel !== undefined) {
    base = { ...base, blockKernel: intFlag(values.kernel as string, 8, "kernel") };
  }
  if (values.expansion !== undefined) {
    base = { ...base, expansion: intFlag(values.expansion as string, 3, "expansion") };
  }
  if (values["input-channels"] !== undefined) {
    base = { ...base, inputChannels: intFlag(values["input-channels"] as string, 4, "input-channels") };
  }
  if (values["dense-conv"]) base = { ...base, denseSpatialConv: true };
  return modelConfig(base);
}

async function cmdTrain(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      split: { type: "string" },
      "val-split": { type: "string" },
      checkpoint: { type: "string" },
      epochs: { type: "string" },
      "batch-size": { type: "string" },
      lr: { type: "string" },
      seed: { type: "string" },
      "stop-at-loss": { type: "string" },
      "log-every": { type: "string" },
      ...MODEL_OPTIONS,
    },
  });
  if (!values.data) throw new UsageError("train requires --data DIR");
  const mc = modelFromFlags(values);
  const ts = trainSpec({
    dataDir: values.data,
    trainSplit: values.split ?? "train",
    valSplit: values["val-split"],
    checkpointPath: values.checkpoint,
    epochs: intFlag(values.epochs, 100, "epochs"),
    batchSize: intFlag(values["batch-size"], 64, "batch-size"),
    learningRate: floatFlag(values.lr, "lr") ?? 0.001,
    seed: intFlag(values.seed, 0, "seed"),
    stopAtLoss: floatFlag(values["stop-at-loss"], "stop-at-loss"),
    logEvery: intFlag(values["log-every"], 1, "log-every"),
  });
  const { history, stoppedEarly, model } = await train(ts, mc);
  const last = history[history.length - 1];
  console.log(
    `done: ${history.length} epoch(s), final train loss ${last.trainLoss.toFixed(6)}` +
      (stoppedEarly ? " (stopped at target)" : ""),
  );
  model.dispose();
  return 0;
}

async function cmdInfer(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      data: { type: "string" },
      split: { type: "string" },
      out: { type: "string" },
      "batch-size": { type: "string" },
    },
  });
  if (!values.checkpoint || !values.data || !values.out) {
    throw new UsageError("infer requires --checkpoint PATH, --data DIR and --out FILE");
  }
  await readyBackend();
  const { model } = loadCheckpoint(values.checkpoint);
  const rows = predictSplit(
    model,
    values.data,
    values.split ?? "test",
    intFlag(values["batch-size"], 256, "batch-size"),
  );
  writePredictionsCsv(values.out, rows);
  console.log(`wrote ${rows.length} predictions to ${values.out}`);
  model.dispose();
  return 0;
}

async function cmdFlops(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      rows: { type: "string" },
      cols: { type: "string" },
      ...MODEL_OPTIONS,
    },
  });
  const mc = modelFromFlags(values);
  const rows = intFlag(values.rows, 64, "rows");
  const cols = intFlag(values.cols, 32, "cols");
  const count = flopsEstimate(mc, rows, cols);
  console.log(
    `depths=[${mc.stageDepths}] widths=[${mc.stageWidths}] kernel=${mc.blockKernel} ` +
      `input=${rows}x${cols} -> ${count.toExponential(4)} ops`,
  );
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "train") return await cmdTrain(rest);
    if (command === "infer") return await cmdInfer(rest);
    if (command === "flops") return await cmdFlops(rest);
    if (command === undefined || command === "--help" || command === "-h") {
      process.stdout.write(USAGE);
      return command === undefined ? 2 : 0;
    }
    throw new UsageError(`unknown command "${command}"`);
  } catch (err) {
    const code = (err as NodeJS.ErrnoException).code ?? "";
    if (err instanceof UsageError || code.startsWith("ERR_PARSE_ARGS")) {
      process.stderr.write(`error: ${(err as Error).message}\n\n${USAGE}`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
