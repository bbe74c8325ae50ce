import * as fs from "node:fs";
import * as path from "node:path";

import Papa from "papaparse";
import * as tf from "@tensorflow/tfjs";

/** On-disk dataset contract: manifest.json next to per-split tensor/label files. */

export interface LabelNormalization {
  readonly theta_scale_rad: number;
  readonly r_min_m: number;
  readonly r_max_m: number;
}

export interface Region {
  readonly r_min_m: number;
  readonly r_max_m: number;
  readonly theta_min_rad: number;
  readonly theta_max_rad: number;
}

export interface SplitInfo {
  readonly count: number;
  readonly shape: readonly number[];
  readonly tensor_file: string;
  readonly labels_file: string;
  readonly seed: number;
}

export interface Manifest {
  readonly format_version: number;
  readonly dtype: string;
  readonly layout: string;
  readonly channels: readonly string[];
  readonly channel_scales: readonly number[];
  readonly packing: { readonly rows_cols: readonly [number, number] };
  readonly region: Region;
  readonly label_normalization: LabelNormalization;
  readonly splits: Record<string, SplitInfo>;
  readonly [extra: string]: unknown;
}

export interface SampleLabel {
  readonly sampleId: string;
  readonly rM: number;
  readonly thetaRad: number;
  readonly snrDb: number;
}

/** One split, fully in memory with features already in sample-major NHWC order. */
export interface LoadedSplit {
  readonly count: number;
  readonly rows: number;
  readonly cols: number;
  readonly channels: number;
  /** Flat [count, rows, cols, channels] feature buffer. */
  readonly features: Float32Array;
  readonly labels: readonly SampleLabel[];
  /** Flat [count, 2] normalized (r, theta) targets. */
  readonly targets: Float32Array;
}

export function loadManifest(dataDir: string): Manifest {
  const text = fs.readFileSync(path.join(dataDir, "manifest.json"), "utf8");
  const manifest = JSON.parse(text) as Manifest;
  if (manifest.format_version !== 1) {
    throw new Error(`unsupported dataset format_version ${manifest.format_version}`);
  }
  if (manifest.dtype !== "<f4") throw new Error(`unsupported dtype ${manifest.dtype}`);
  if (manifest.layout !== "C") throw new Error(`unsupported layout ${manifest.layout}`);
  return manifest;
}

/** Map physical labels to the unit scale the model is trained on. */
export function normalizeLabel(
  norm: LabelNormalization,
  rM: number,
  thetaRad: number,
): [number, number] {
  return [(rM - norm.r_min_m) / (norm.r_max_m - norm.r_min_m), thetaRad / norm.theta_scale_rad];
}

/** Invert the label normalization and clamp the result into the search region. */
export function denormalizePrediction(
  norm: LabelNormalization,
  region: Region,
  rNorm: number,
  thetaNorm: number,
): { rHatM: number; thetaHatRad: number } {
  const r = norm.r_min_m + rNorm * (norm.r_max_m - norm.r_min_m);
  const theta = thetaNorm * norm.theta_scale_rad;
  return {
    rHatM: Math.min(region.r_max_m, Math.max(region.r_min_m, r)),
    thetaHatRad: Math.min(region.theta_max_rad, Math.max(region.theta_min_rad, theta)),
  };
}

function readLabels(file: string, expected: number): SampleLabel[] {
  const parsed = Papa.parse<Record<string, string>>(fs.readFileSync(file, "utf8"), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new Error(`failed to parse ${file}: ${parsed.errors[0].message}`);
  }
  const labels = parsed.data.map((row) => ({
    sampleId: row.sample_id,
    rM: Number(row.r_m),
    thetaRad: Number(row.theta_rad),
    snrDb: Number(row.snr_db),
  }));
  if (labels.length !== expected) {
    throw new Error(`${file}: expected ${expected} label rows, found ${labels.length}`);
  }
  return labels;
}

export function loadSplit(dataDir: string, split: string, manifest?: Manifest): LoadedSplit {
  const man = manifest ?? loadManifest(dataDir);
  const info = man.splits[split];
  if (!info) {
    throw new Error(`split "${split}" not in manifest (have: ${Object.keys(man.splits)})`);
  }
  const [count, channels, rows, cols] = info.shape;
  const tensorPath = path.join(dataDir, info.tensor_file);
  const bytes = fs.readFileSync(tensorPath);
  const expectedLen = count * channels * rows * cols;
  if (bytes.byteLength !== expectedLen * 4) {
    throw new Error(
      `${tensorPath}: ${bytes.byteLength} bytes, expected ${expectedLen * 4} for shape ${info.shape}`,
    );
  }
  const chw = new Float32Array(bytes.buffer, bytes.byteOffset, expectedLen);

  // Repack channel-major samples into the NHWC order the network consumes.
  const features = new Float32Array(expectedLen);
  const plane = rows * cols;
  for (let n = 0; n < count; n++) {
    const src = n * channels * plane;
    const dst = n * plane * channels;
    for (let c = 0; c < channels; c++) {
      for (let h = 0; h < rows; h++) {
        for (let w = 0; w < cols; w++) {
          features[dst + (h * cols + w) * channels + c] = chw[src + c * plane + h * cols + w];
        }
      }
    }
  }

  const labels = readLabels(path.join(dataDir, info.labels_file), count);
  const targets = new Float32Array(count * 2);
  for (let n = 0; n < count; n++) {
    const [rNorm, thetaNorm] = normalizeLabel(
      man.label_normalization,
      labels[n].rM,
      labels[n].thetaRad,
    );
    targets[2 * n] = rNorm;
    targets[2 * n + 1] = thetaNorm;
  }
  return { count, rows, cols, channels, features, labels, targets };
}

/** Assemble a feature/target batch for the given sample indices. */
export function batchOf(
  ds: LoadedSplit,
  indices: readonly number[],
): { x: tf.Tensor4D; y: tf.Tensor2D } {
  const sampleLen = ds.rows * ds.cols * ds.channels;
  const xBuf = new Float32Array(indices.length * sampleLen);
  const yBuf = new Float32Array(indices.length * 2);
  indices.forEach((idx, i) => {
    xBuf.set(ds.features.subarray(idx * sampleLen, (idx + 1) * sampleLen), i * sampleLen);
    yBuf[2 * i] = ds.targets[2 * idx];
    yBuf[2 * i + 1] = ds.targets[2 * idx + 1];
  });
  return {
    x: tf.tensor4d(xBuf, [indices.length, ds.rows, ds.cols, ds.channels]),
    y: tf.tensor2d(yBuf, [indices.length, 2]),
  };
}
