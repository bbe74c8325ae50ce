import * as tf from "@tensorflow/tfjs";

import { ModelConfig, totalDownsampling, validateModelConfig } from "./config.js";

/**
 * Four-stage convolutional regressor mapping a packed beam-response tensor
 * [batch, rows, cols, channels] to two normalized outputs (range, angle).
 *
 * Layout: patchify stem + layer norm, then four stages; stages 2-4 are
 * preceded by a 2x2 stride-2 patch convolution + layer norm. Each block is
 * [k x k spatial conv -> LN] -> [1x1 conv to e*C -> GELU] -> [1x1 conv to C]
 * with a residual connection. Global average pooling feeds a linear head
 * whose weights start at zero, so a fresh model outputs (0, 0).
 *
 * All compute is expressed through ops whose forward AND backward passes are
 * available on the WASM backend; the spatial convolution, whose native
 * gradient kernels are missing there, carries a hand-built custom gradient.
 */

function gelu<T extends tf.Tensor>(x: T): T {
  return tf.mul(tf.mul(x, 0.5), tf.add(tf.erf(tf.div(x, Math.SQRT2)), 1)) as T;
}

function layerNorm(x: tf.Tensor, gamma: tf.Tensor, beta: tf.Tensor): tf.Tensor {
  const { mean, variance } = tf.moments(x, -1, true);
  return tf.add(tf.mul(tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, 1e-6))), gamma), beta);
}

/** Non-overlapping p x p patch convolution via reshape + matmul (stride = p). */
function patchConv(x: tf.Tensor4D, w: tf.Tensor2D, b: tf.Tensor1D, p: number): tf.Tensor4D {
  const [n, h, wd, c] = x.shape;
  if (h % p !== 0 || wd % p !== 0) {
    throw new Error(`spatial size ${h}x${wd} not divisible by patch size ${p}`);
  }
  const hp = h / p;
  const wp = wd / p;
  let t: tf.Tensor = tf.reshape(x, [n, hp, p, wp, p, c]);
  t = tf.transpose(t, [0, 1, 3, 2, 4, 5]);
  t = tf.matMul(tf.reshape(t, [n * hp * wp, p * p * c]), w);
  t = tf.add(t, b);
  return tf.reshape(t, [n, hp, wp, w.shape[1]]) as tf.Tensor4D;
}

function pointwise(x: tf.Tensor4D, w: tf.Tensor2D): tf.Tensor4D {
  const [n, h, wd, c] = x.shape;
  const t = tf.matMul(tf.reshape(x, [n * h * wd, c]), w);
  return tf.reshape(t, [n, h, wd, w.shape[1]]) as tf.Tensor4D;
}

type DepthwiseFn = (x: tf.Tensor4D, w: tf.Tensor4D) => tf.Tensor4D;
const depthwiseCache = new Map<number, DepthwiseFn>();

/**
 * Size-preserving depthwise k x k convolution with a custom gradient.
 *
 * Forward uses the native depthwise kernel over an explicitly padded input.
 * Backward is composed from two more depthwise passes: the input gradient
 * correlates the upstream gradient with the spatially flipped filter under
 * complementary padding, and the filter gradient correlates the padded input
 * with the upstream gradient after moving (batch, channel) into the channel
 * axis, which reduces per-tap sums to one convolution call.
 */
export function depthwiseSame(k: number): DepthwiseFn {
  let fn = depthwiseCache.get(k);
  if (fn) return fn;
  const lo = Math.floor((k - 1) / 2);
  const hi = Math.ceil((k - 1) / 2);
  const impl = (x: tf.Tensor4D, w: tf.Tensor4D, save: tf.GradSaveFunc) => {
    save([x, w]);
    const padded = tf.pad(x, [
      [0, 0],
      [lo, hi],
      [lo, hi],
      [0, 0],
    ]);
    const value = tf.depthwiseConv2d(padded, w, 1, "valid");
    const gradFunc = (dy: tf.Tensor4D, saved: tf.Tensor[]) => {
      const [xs, ws] = saved as [tf.Tensor4D, tf.Tensor4D];
      const [b, h, wd, c] = xs.shape;
      const flipped = tf.reverse(ws, [0, 1]) as tf.Tensor4D;
      const dyPad = tf.pad(dy, [
        [0, 0],
        [k - 1 - lo, k - 1 - hi],
        [k - 1 - lo, k - 1 - hi],
        [0, 0],
      ]);
      const dx = tf.depthwiseConv2d(dyPad, flipped, 1, "valid");
      const xp = tf.pad(xs, [
        [0, 0],
        [lo, hi],
        [lo, hi],
        [0, 0],
      ]);
      const xt = tf.reshape(tf.transpose(xp, [1, 2, 0, 3]), [1, h + k - 1, wd + k - 1, b * c]);
      const gt = tf.reshape(tf.transpose(dy, [1, 2, 0, 3]), [h, wd, b * c, 1]);
      const corr = tf.depthwiseConv2d(
        xt as tf.Tensor4D,
        gt as tf.Tensor4D,
        1,
        "valid",
      );
      const dW = tf.reshape(tf.sum(tf.reshape(corr, [k, k, b, c]), 2), [k, k, c, 1]);
      return [dx, dW];
    };
    return { value, gradFunc };
  };
  fn = tf.customGrad(impl as unknown as Parameters<typeof tf.customGrad>[0]) as DepthwiseFn;
  depthwiseCache.set(k, fn);
  return fn;
}

/** Size-preserving dense k x k convolution via explicit patch extraction. */
function denseSame(x: tf.Tensor4D, w: tf.Tensor2D, k: number): tf.Tensor4D {
  const lo = Math.floor((k - 1) / 2);
  const hi = Math.ceil((k - 1) / 2);
  const [n, h, wd, c] = x.shape;
  const xp = tf.pad(x, [
    [0, 0],
    [lo, hi],
    [lo, hi],
    [0, 0],
  ]);
  const slices: tf.Tensor4D[] = [];
  for (let dy = 0; dy < k; dy++) {
    for (let dx = 0; dx < k; dx++) {
      slices.push(tf.slice(xp, [0, dy, dx, 0], [n, h, wd, c]));
    }
  }
  const patches = tf.concat(slices, 3); // [n, h, wd, k*k*c]
  const t = tf.matMul(tf.reshape(patches, [n * h * wd, k * k * c]), w);
  return tf.reshape(t, [n, h, wd, w.shape[1]]) as tf.Tensor4D;
}

interface PatchVars {
  w: tf.Variable;
  b: tf.Variable;
  lnG: tf.Variable;
  lnB: tf.Variable;
}

interface BlockVars {
  spatial: tf.Variable;
  lnG: tf.Variable;
  lnB: tf.Variable;
  w1: tf.Variable;
  b1: tf.Variable;
  w2: tf.Variable;
  b2: tf.Variable;
}

let instanceCounter = 0;

export class Regressor {
  readonly config: ModelConfig;
  private readonly registry = new Map<string, tf.Variable>();
  private stem!: PatchVars;
  private downs: Array<PatchVars | null> = [];
  private blocks: BlockVars[][] = [];
  private headW!: tf.Variable;
  private headB!: tf.Variable;

  private constructor(config: ModelConfig) {
    validateModelConfig(config);
    this.config = config;
  }

  /** Build a freshly initialized model; identical seeds yield identical weights. */
  static build(config: ModelConfig, seed = 0): Regressor {
    const model = new Regressor(config);
    // Engine-level variable names must be globally unique; logical names in
    // the registry (used by checkpoints) stay instance-relative.
    const prefix = `r${instanceCounter++}:`;
    let counter = seed;
    const normal = (name: string, shape: number[], fanIn: number): tf.Variable => {
      const v = tf.variable(
        tf.randomNormal(shape, 0, Math.sqrt(2 / fanIn), "float32", counter++),
        true,
        prefix + name,
      );
      model.registry.set(name, v);
      return v;
    };
    const constant = (name: string, shape: number[], value: number): tf.Variable => {
      const init = value === 0 ? tf.zeros(shape) : tf.fill(shape, value);
      const v = tf.variable(init, true, prefix + name);
      model.registry.set(name, v);
      return v;
    };
    const patchVars = (prefix: string, patch: number, cin: number, cout: number): PatchVars => ({
      w: normal(`${prefix}/w`, [patch * patch * cin, cout], patch * patch * cin),
      b: constant(`${prefix}/b`, [cout], 0),
      lnG: constant(`${prefix}/ln/g`, [cout], 1),
      lnB: constant(`${prefix}/ln/b`, [cout], 0),
    });

    const { stageDepths, stageWidths, blockKernel: k, expansion, inputChannels } = config;
    model.stem = patchVars("stem", config.stemKernel, inputChannels, stageWidths[0]);
    for (let s = 0; s < 4; s++) {
      const c = stageWidths[s];
      model.downs.push(
        s === 0
          ? null
          : patchVars(`stage${s}/down`, config.downsampleKernel, stageWidths[s - 1], c),
      );
      const stageBlocks: BlockVars[] = [];
      for (let d = 0; d < stageDepths[s]; d++) {
        const p = `stage${s}/block${d}`;
        stageBlocks.push({
          spatial: config.denseSpatialConv
            ? normal(`${p}/dense`, [k * k * c, c], k * k * c)
            : normal(`${p}/dw`, [k, k, c, 1], k * k),
          lnG: constant(`${p}/ln/g`, [c], 1),
          lnB: constant(`${p}/ln/b`, [c], 0),
          w1: normal(`${p}/pw1/w`, [c, expansion * c], c),
          b1: constant(`${p}/pw1/b`, [expansion * c], 0),
          w2: normal(`${p}/pw2/w`, [expansion * c, c], expansion * c),
          b2: constant(`${p}/pw2/b`, [c], 0),
        });
      }
      model.blocks.push(stageBlocks);
    }
    model.headW = constant("head/w", [stageWidths[3], 2], 0);
    model.headB = constant("head/b", [2], 0);
    return model;
  }

  /** Differentiable forward pass; expects [batch, rows, cols, inputChannels]. */
  forward(x: tf.Tensor4D): tf.Tensor2D {
    const { config } = this;
    const factor = totalDownsampling(config);
    const [, rows, cols, channels] = x.shape;
    if (channels !== config.inputChannels) {
      throw new Error(`expected ${config.inputChannels} input channels, got ${channels}`);
    }
    if (rows % factor !== 0 || cols % factor !== 0) {
      throw new Error(`input spatial size ${rows}x${cols} not divisible by ${factor}`);
    }
    const dw = depthwiseSame(config.blockKernel);
    let t = patchConv(x, this.stem.w as tf.Tensor2D, this.stem.b as tf.Tensor1D, config.stemKernel);
    t = layerNorm(t, this.stem.lnG, this.stem.lnB) as tf.Tensor4D;
    for (let s = 0; s < 4; s++) {
      const down = this.downs[s];
      if (down) {
        t = patchConv(t, down.w as tf.Tensor2D, down.b as tf.Tensor1D, config.downsampleKernel);
        t = layerNorm(t, down.lnG, down.lnB) as tf.Tensor4D;
      }
      for (const bl of this.blocks[s]) {
        let u = config.denseSpatialConv
          ? denseSame(t, bl.spatial as tf.Tensor2D, config.blockKernel)
          : dw(t, bl.spatial as tf.Tensor4D);
        u = layerNorm(u, bl.lnG, bl.lnB) as tf.Tensor4D;
        u = tf.add(pointwise(u, bl.w1 as tf.Tensor2D), bl.b1) as tf.Tensor4D;
        u = gelu(u);
        u = tf.add(pointwise(u, bl.w2 as tf.Tensor2D), bl.b2) as tf.Tensor4D;
        t = tf.add(t, u);
      }
    }
    const pooled = tf.mean(t, [1, 2]) as tf.Tensor2D;
    return tf.add(tf.matMul(pooled, this.headW as tf.Tensor2D), this.headB) as tf.Tensor2D;
  }

  /** Non-differentiable forward pass returning a flat [batch, 2] buffer. */
  predictBatch(x: tf.Tensor4D): Float32Array {
    return tf.tidy(() => this.forward(x)).dataSync() as Float32Array;
  }

  /** Trainable variables in stable registration order. */
  variables(): tf.Variable[] {
    return [...this.registry.values()];
  }

  namedVariables(): ReadonlyMap<string, tf.Variable> {
    return this.registry;
  }

  dispose(): void {
    for (const v of this.registry.values()) v.dispose();
    this.registry.clear();
  }
}

/** Spatial (rows, cols) entering each of the four stages. */
export function stageSpatialSizes(
  mc: ModelConfig,
  rows: number,
  cols: number,
): Array<[number, number]> {
  const sizes: Array<[number, number]> = [];
  let h = rows / mc.stemKernel;
  let w = cols / mc.stemKernel;
  for (let s = 0; s < 4; s++) {
    if (s > 0) {
      h /= mc.downsampleKernel;
      w /= mc.downsampleKernel;
    }
    sizes.push([h, w]);
  }
  return sizes;
}

/**
 * Analytic per-stage operation count: sum over stages of
 * depth * width^2 * kernel^2 * F^2, where F is the stage's leading spatial
 * size. This follows a dense-convolution cost structure; it is a comparative
 * measure, not a MAC census.
 */
export function flopsEstimate(mc: ModelConfig, rows = 64, cols = 32): number {
  validateModelConfig(mc);
  const sizes = stageSpatialSizes(mc, rows, cols);
  let total = 0;
  for (let s = 0; s < 4; s++) {
    const f = sizes[s][0];
    total += mc.stageDepths[s] * mc.stageWidths[s] ** 2 * mc.blockKernel ** 2 * f * f;
  }
  return total;
}

/** Mean over the batch of |r error| + |theta error| in normalized units. */
export function regressionLoss(pred: tf.Tensor2D, target: tf.Tensor2D): tf.Scalar {
  return tf.mean(tf.sum(tf.abs(tf.sub(pred, target)), 1)) as tf.Scalar;
}
