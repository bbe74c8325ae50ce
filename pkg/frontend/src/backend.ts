import { createRequire } from "node:module";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";

let pending: Promise<void> | undefined;

/**
 * Activate the WASM backend, locating the bundled .wasm binaries on disk.
 *
 * The plain-JS CPU backend is far too slow for training, and the native
 * binding cannot be installed in offline environments, so WASM is the
 * supported compute backend for this package. Safe to call more than once.
 */
export async function readyBackend(): Promise<void> {
  if (!pending) {
    pending = (async () => {
      const require = createRequire(import.meta.url);
      const wasmDir = path.dirname(
        require.resolve("@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm"),
      );
      setWasmPaths(wasmDir + path.sep);
      await tf.setBackend("wasm");
      await tf.ready();
    })();
  }
  return pending;
}
