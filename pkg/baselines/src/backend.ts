/**
 * Backend selection: prefer wasm (SIMD, ~20x faster than the plain JS
 * backend here) with the training-kernel shims registered; fall back to
 * the cpu backend if wasm fails to initialize.
 */

import { createRequire } from "node:module";
import { dirname, join } from "node:path";

import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";

import { registerWasmTrainingKernels } from "./wasm-kernels.js";

let initialized: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  initialized ??= (async () => {
    try {
      const require = createRequire(import.meta.url);
      const entry = require.resolve("@tensorflow/tfjs-backend-wasm");
      setWasmPaths(join(dirname(entry), "..", "wasm-out") + "/");
      if (!(await tf.setBackend("wasm"))) throw new Error("wasm backend rejected");
      await tf.ready();
      registerWasmTrainingKernels();
    } catch {
      await tf.setBackend("cpu");
      await tf.ready();
    }
    return tf.getBackend();
  })();
  return initialized;
}
