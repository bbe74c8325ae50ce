import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
    testTimeout: 120_000,
    hookTimeout: 300_000,
    // The training-heavy suites share one process so the WASM backend is
    // initialized once and its heap is reused.
    fileParallelism: false,
  },
});
