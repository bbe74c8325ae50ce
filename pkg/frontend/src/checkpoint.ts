import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { ModelConfig } from "./config.js";
import { Regressor } from "./model.js";

/**
 * Checkpoint = <base>.json (config, metadata, ordered weight specs) plus
 * <base>.bin (the weight values, little-endian float32, concatenated in the
 * listed order).
 */

export interface WeightSpec {
  readonly name: string;
  readonly shape: readonly number[];
}

export interface CheckpointHeader {
  readonly format_version: number;
  readonly config: ModelConfig;
  readonly meta: Record<string, unknown>;
  readonly weights: readonly WeightSpec[];
}

function basePath(p: string): string {
  return p.endsWith(".json") || p.endsWith(".bin") ? p.slice(0, p.lastIndexOf(".")) : p;
}

export function saveCheckpoint(
  file: string,
  model: Regressor,
  meta: Record<string, unknown> = {},
): { jsonPath: string; binPath: string } {
  const base = basePath(file);
  const specs: WeightSpec[] = [];
  const buffers: Float32Array[] = [];
  let total = 0;
  for (const [name, v] of model.namedVariables()) {
    specs.push({ name, shape: [...v.shape] });
    const data = v.dataSync() as Float32Array;
    buffers.push(data);
    total += data.length;
  }
  const flat = new Float32Array(total);
  let offset = 0;
  for (const buf of buffers) {
    flat.set(buf, offset);
    offset += buf.length;
  }
  const header: CheckpointHeader = {
    format_version: 1,
    config: model.config,
    meta,
    weights: specs,
  };
  const dir = path.dirname(base);
  fs.mkdirSync(dir, { recursive: true });
  const jsonPath = `${base}.json`;
  const binPath = `${base}.bin`;
  fs.writeFileSync(jsonPath, JSON.stringify(header, null, 1));
  fs.writeFileSync(binPath, Buffer.from(flat.buffer, flat.byteOffset, flat.byteLength));
  return { jsonPath, binPath };
}

export function loadCheckpoint(file: string): { model: Regressor; header: CheckpointHeader } {
  const base = basePath(file);
  const header = JSON.parse(fs.readFileSync(`${base}.json`, "utf8")) as CheckpointHeader;
  if (header.format_version !== 1) {
    throw new Error(`unsupported checkpoint format_version ${header.format_version}`);
  }
  const bytes = fs.readFileSync(`${base}.bin`);
  const flat = new Float32Array(bytes.buffer, bytes.byteOffset, bytes.byteLength / 4);

  const model = Regressor.build(header.config, 0);
  const vars = model.namedVariables();
  if (vars.size !== header.weights.length) {
    throw new Error(
      `checkpoint lists ${header.weights.length} weights, model has ${vars.size}`,
    );
  }
  let offset = 0;
  for (const spec of header.weights) {
    const v = vars.get(spec.name);
    if (!v) throw new Error(`checkpoint weight ${spec.name} not present in model`);
    const size = spec.shape.reduce((a, b) => a * b, 1);
    if (offset + size > flat.length) throw new Error("checkpoint .bin file too short");
    v.assign(tf.tensor(flat.slice(offset, offset + size), [...spec.shape]));
    offset += size;
  }
  if (offset !== flat.length) throw new Error("checkpoint .bin file has trailing data");
  return { model, header };
}
