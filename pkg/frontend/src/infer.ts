import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { batchOf, denormalizePrediction, loadManifest, loadSplit, Manifest } from "./dataset.js";
import { Regressor } from "./model.js";

export interface PredictionRow {
  readonly sampleId: string;
  readonly rHatM: number;
  readonly thetaHatRad: number;
}

/**
 * Run the model over one dataset split and de-normalize the outputs into
 * physical units, clamped to the search region recorded in the manifest.
 */
export function predictSplit(
  model: Regressor,
  dataDir: string,
  split: string,
  batchSize = 256,
  manifest?: Manifest,
): PredictionRow[] {
  const man = manifest ?? loadManifest(dataDir);
  const ds = loadSplit(dataDir, split, man);
  const rows: PredictionRow[] = [];
  for (let start = 0; start < ds.count; start += batchSize) {
    const indices = [];
    for (let i = start; i < Math.min(start + batchSize, ds.count); i++) indices.push(i);
    const { x, y } = batchOf(ds, indices);
    const out = model.predictBatch(x);
    tf.dispose([x, y]);
    indices.forEach((idx, i) => {
      const { rHatM, thetaHatRad } = denormalizePrediction(
        man.label_normalization,
        man.region,
        out[2 * i],
        out[2 * i + 1],
      );
      rows.push({ sampleId: ds.labels[idx].sampleId, rHatM, thetaHatRad });
    });
  }
  return rows;
}

/** Write predictions in the schema the harness scorer consumes. */
export function writePredictionsCsv(file: string, rows: readonly PredictionRow[]): void {
  fs.mkdirSync(path.dirname(file), { recursive: true });
  const lines = ["sample_id,r_hat_m,theta_hat_rad"];
  for (const row of rows) {
    lines.push(`${row.sampleId},${row.rHatM},${row.thetaHatRad}`);
  }
  fs.writeFileSync(file, lines.join("\n") + "\n");
}
