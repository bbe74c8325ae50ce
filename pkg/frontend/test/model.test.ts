import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";

import { readyBackend } from "../src/backend.js";
import { modelConfig } from "../src/config.js";
import { depthwiseSame, Regressor, regressionLoss } from "../src/model.js";

const TINY = modelConfig({ stageWidths: [4, 4, 4, 4] });

beforeAll(async () => {
  await readyBackend();
});

describe("forward pass shape contract", () => {
  it("maps [n, 64, 32, 4] to [n, 2]", () => {
    const model = Regressor.build(TINY, 1);
    const x = tf.randomNormal<tf.Rank.R4>([3, 64, 32, 4], 0, 1, "float32", 5);
    const out = tf.tidy(() => model.forward(x));
    expect(out.shape).toEqual([3, 2]);
    tf.dispose([x, out]);
    model.dispose();
  });

  it("accepts any spatial size divisible by the downsampling factor 32", () => {
    const model = Regressor.build(TINY, 1);
    for (const [rows, cols] of [
      [32, 32],
      [128, 64],
      [96, 32],
    ]) {
      const x = tf.zeros<tf.Rank.R4>([1, rows, cols, 4]);
      const out = tf.tidy(() => model.forward(x));
      expect(out.shape).toEqual([1, 2]);
      tf.dispose([x, out]);
    }
    model.dispose();
  });

  it("rejects indivisible spatial sizes and wrong channel counts", () => {
    const model = Regressor.build(TINY, 1);
    const bad = tf.zeros<tf.Rank.R4>([1, 48, 32, 4]);
    expect(() => model.forward(bad)).toThrow(/divisible/);
    const badCh = tf.zeros<tf.Rank.R4>([1, 64, 32, 3]);
    expect(() => model.forward(badCh)).toThrow(/channels/);
    tf.dispose([bad, badCh]);
    model.dispose();
  });

  it("zero-depth stages still downsample", () => {
    const model = Regressor.build(modelConfig({ stageDepths: [0, 0, 0, 0], stageWidths: [4, 4, 4, 4] }), 1);
    const x = tf.zeros<tf.Rank.R4>([2, 64, 32, 4]);
    const out = tf.tidy(() => model.forward(x));
    expect(out.shape).toEqual([2, 2]);
    tf.dispose([x, out]);
    model.dispose();
  });
});

describe("head initialization", () => {
  it("a fresh model outputs exactly (0, 0) for any input", () => {
    const model = Regressor.build(TINY, 9);
    const x = tf.randomNormal<tf.Rank.R4>([4, 64, 32, 4], 0, 3, "float32", 17);
    const out = model.predictBatch(x);
    expect([...out]).toEqual([0, 0, 0, 0, 0, 0, 0, 0]);
    x.dispose();
    model.dispose();
  });

  it("identical seeds build identical weights, different seeds differ", () => {
    const a = Regressor.build(TINY, 4);
    const b = Regressor.build(TINY, 4);
    const c = Regressor.build(TINY, 5);
    const wa = a.namedVariables().get("stem/w")!.dataSync();
    const wb = b.namedVariables().get("stem/w")!.dataSync();
    const wc = c.namedVariables().get("stem/w")!.dataSync();
    expect([...wa]).toEqual([...wb]);
    expect([...wa]).not.toEqual([...wc]);
    a.dispose();
    b.dispose();
    c.dispose();
  });
});

describe("trained-model behavior", () => {
  function brieflyTrained(seed: number): Regressor {
    const model = Regressor.build(TINY, seed);
    const opt = tf.train.adam(0.01);
    const x = tf.randomNormal<tf.Rank.R4>([8, 64, 32, 4], 0, 1, "float32", seed);
    const y = tf.randomUniform<tf.Rank.R2>([8, 2], -0.5, 0.5, "float32", seed + 1);
    for (let i = 0; i < 3; i++) {
      const cost = opt.minimize(
        () => regressionLoss(model.forward(x), y),
        true,
        model.variables(),
      ) as tf.Scalar;
      cost.dispose();
    }
    tf.dispose([x, y]);
    opt.dispose();
    return model;
  }

  it("identical samples in one batch yield identical outputs", () => {
    const model = brieflyTrained(31);
    const one = tf.randomNormal<tf.Rank.R4>([1, 64, 32, 4], 0, 1, "float32", 77);
    const dup = tf.concat([one, one, one], 0) as tf.Tensor4D;
    const out = model.predictBatch(dup);
    expect(out[0]).toBe(out[2]);
    expect(out[1]).toBe(out[3]);
    expect(out[0]).toBe(out[4]);
    tf.dispose([one, dup]);
    model.dispose();
  });

  it("permuting the input rows changes the prediction", () => {
    const model = brieflyTrained(32);
    const x = tf.randomNormal<tf.Rank.R4>([1, 64, 32, 4], 0, 1, "float32", 78);
    // Reverse the leading (subcarrier-major) axis of the packed frame.
    const permuted = tf.reverse(x, [1]) as tf.Tensor4D;
    const a = model.predictBatch(x);
    const b = model.predictBatch(permuted);
    const diff = Math.abs(a[0] - b[0]) + Math.abs(a[1] - b[1]);
    expect(diff).toBeGreaterThan(1e-8);
    tf.dispose([x, permuted]);
    model.dispose();
  });
});

describe("custom spatial convolution", () => {
  it("gradients match the framework's reference implementation", async () => {
    // The reference backend carries native backward kernels for the
    // depthwise convolution; the hand-built gradient must agree with them.
    const k = 8;
    const lo = 3;
    const hi = 4;
    await tf.setBackend("cpu");
    const x = tf.randomNormal<tf.Rank.R4>([2, 8, 6, 3], 0, 1, "float32", 11);
    const w = tf.randomNormal<tf.Rank.R4>([k, k, 3, 1], 0, 0.3, "float32", 12);
    const up = tf.randomNormal<tf.Rank.R4>([2, 8, 6, 3], 0, 1, "float32", 13);
    const pads: Array<[number, number]> = [
      [0, 0],
      [lo, hi],
      [lo, hi],
      [0, 0],
    ];
    const refLoss = (xi: tf.Tensor4D, wi: tf.Tensor4D) =>
      tf.sum(tf.mul(tf.depthwiseConv2d(tf.pad(xi, pads), wi, 1, "valid"), up));
    const [dxRef, dwRef] = tf.grads(refLoss)([x, w]);

    const custom = depthwiseSame(k);
    const customLoss = (xi: tf.Tensor4D, wi: tf.Tensor4D) => tf.sum(tf.mul(custom(xi, wi), up));

    for (const backend of ["cpu", "wasm"]) {
      await tf.setBackend(backend);
      const [dx, dw] = tf.grads(customLoss)([x, w]);
      const relX = tf.div(tf.norm(tf.sub(dx, dxRef)), tf.norm(dxRef)).dataSync()[0];
      const relW = tf.div(tf.norm(tf.sub(dw, dwRef)), tf.norm(dwRef)).dataSync()[0];
      expect(relX).toBeLessThan(1e-5);
      expect(relW).toBeLessThan(1e-5);
      tf.dispose([dx, dw]);
    }
    tf.dispose([x, w, up, dxRef, dwRef]);
    await tf.setBackend("wasm");
  });

  it("forward values match the reference implementation", async () => {
    const k = 5; // odd kernel: symmetric padding path
    const x = tf.randomNormal<tf.Rank.R4>([2, 6, 6, 2], 0, 1, "float32", 21);
    const w = tf.randomNormal<tf.Rank.R4>([k, k, 2, 1], 0, 0.4, "float32", 22);
    const custom = depthwiseSame(k)(x, w);
    const ref = tf.depthwiseConv2d(x, w, 1, "same");
    const maxErr = tf.max(tf.abs(tf.sub(custom, ref))).dataSync()[0];
    expect(maxErr).toBeLessThan(1e-5);
    tf.dispose([x, w, custom, ref]);
  });
});

describe("dense spatial-convolution variant", () => {
  it("reproduces the depthwise path when its kernel embeds a depthwise pattern", () => {
    const seed = 303;
    const dwModel = Regressor.build(TINY, seed);
    const denseModel = Regressor.build({ ...TINY, denseSpatialConv: true }, seed);
    const k = TINY.blockKernel;

    // Same seed => identical weights except the spatial kernels; overwrite the
    // dense kernels with block-diagonal embeddings of the depthwise ones.
    for (const [name, v] of dwModel.namedVariables()) {
      if (!name.endsWith("/dw")) continue;
      const dense = denseModel.namedVariables().get(name.replace(/\/dw$/, "/dense"))!;
      const kernel = v.dataSync(); // [k, k, c, 1]
      const c = v.shape[2];
      const embedded = new Float32Array(k * k * c * c);
      for (let tap = 0; tap < k * k; tap++) {
        for (let ch = 0; ch < c; ch++) {
          embedded[(tap * c + ch) * c + ch] = kernel[tap * c + ch];
        }
      }
      dense.assign(tf.tensor2d(embedded, [k * k * c, c]));
    }
    const head = tf.randomNormal<tf.Rank.R2>([4, 2], 0, 1, "float32", 9);
    dwModel.namedVariables().get("head/w")!.assign(head);
    denseModel.namedVariables().get("head/w")!.assign(head);

    const x = tf.randomNormal<tf.Rank.R4>([2, 64, 32, 4], 0, 1, "float32", 41);
    const a = dwModel.predictBatch(x);
    const b = denseModel.predictBatch(x);
    for (let i = 0; i < a.length; i++) expect(Math.abs(a[i] - b[i])).toBeLessThan(1e-4);
    tf.dispose([x, head]);
    dwModel.dispose();
    denseModel.dispose();
  });
});
