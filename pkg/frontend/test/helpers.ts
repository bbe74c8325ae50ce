import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

/** Shared fixtures: synthetic datasets in the exporter's on-disk format. */

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

export function mulberry32(seed: number): () => number {
  let a = seed | 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface SyntheticSplitSpec {
  split: string;
  count: number;
  rows?: number;
  cols?: number;
  channels?: number;
  /** Feature value at (sample, channel, row, col); defaults to seeded noise. */
  fill?: (n: number, c: number, h: number, w: number) => number;
  /** Physical labels per sample; defaults to seeded uniforms over the region. */
  label?: (n: number) => { rM: number; thetaRad: number };
  seed?: number;
}

export const REGION = {
  r_min_m: 5.0,
  r_max_m: 50.0,
  theta_min_rad: -Math.PI / 3,
  theta_max_rad: Math.PI / 3,
};

/** Write one split (tensor, labels, manifest entry) exactly as the exporter does. */
export function writeSyntheticSplit(dir: string, spec: SyntheticSplitSpec): void {
  const { split, count } = spec;
  const rows = spec.rows ?? 64;
  const cols = spec.cols ?? 32;
  const channels = spec.channels ?? 4;
  const seed = spec.seed ?? 1234;
  const rand = mulberry32(seed);
  const fill = spec.fill ?? (() => rand() * 2 - 1);
  const label =
    spec.label ??
    (() => ({
      rM: REGION.r_min_m + rand() * (REGION.r_max_m - REGION.r_min_m),
      thetaRad: REGION.theta_min_rad + rand() * (REGION.theta_max_rad - REGION.theta_min_rad),
    }));

  fs.mkdirSync(dir, { recursive: true });
  const data = new Float32Array(count * channels * rows * cols);
  let i = 0;
  for (let n = 0; n < count; n++) {
    for (let c = 0; c < channels; c++) {
      for (let h = 0; h < rows; h++) {
        for (let w = 0; w < cols; w++) data[i++] = fill(n, c, h, w);
      }
    }
  }
  fs.writeFileSync(
    path.join(dir, `${split}.f32`),
    Buffer.from(data.buffer, data.byteOffset, data.byteLength),
  );

  const lines = ["sample_id,r_m,theta_rad,snr_db,seed"];
  for (let n = 0; n < count; n++) {
    const { rM, thetaRad } = label(n);
    lines.push(`${n},${rM},${thetaRad},20.0,${seed}`);
  }
  fs.writeFileSync(path.join(dir, `${split}_labels.csv`), lines.join("\n") + "\n");

  const manifestPath = path.join(dir, "manifest.json");
  const manifest = fs.existsSync(manifestPath)
    ? JSON.parse(fs.readFileSync(manifestPath, "utf8"))
    : {
        format_version: 1,
        dtype: "<f4",
        layout: "C",
        channels: ["angle-frame", "distance-frame", "angle-estimate", "range-estimate"].slice(
          0,
          channels,
        ),
        channel_scales: Array(channels).fill(1.0),
        packing: { decimation: 2, interleave: "re-im", rows_cols: [rows, cols] },
        region: REGION,
        label_normalization: {
          theta_scale_rad: Math.max(Math.abs(REGION.theta_min_rad), REGION.theta_max_rad),
          r_min_m: REGION.r_min_m,
          r_max_m: REGION.r_max_m,
        },
        snr_grid_db: [20.0],
        vr_law: "stationary",
        estimator: "synthetic",
        splits: {},
      };
  manifest.splits[split] = {
    count,
    shape: [count, channels, rows, cols],
    tensor_file: `${split}.f32`,
    labels_file: `${split}_labels.csv`,
    seed,
  };
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 1));
}
