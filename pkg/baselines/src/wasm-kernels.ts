/**
 * The wasm backend ships inference kernels only for a few ops; training
 * the CNN needs the convolution filter gradient. This registers a
 * Conv2DBackpropFilter implementation composed from ops the wasm backend
 * does provide (pad, strided slice, matMul), which keeps the whole
 * training step on the fast backend.
 */

import * as tf from "@tensorflow/tfjs";

interface Conv2DBackpropFilterAttrs {
  strides: [number, number] | number;
  pad: "same" | "valid" | number;
  dataFormat: "NHWC" | "NCHW";
  dimRoundingMode?: string;
  filterShape: [number, number, number, number];
}

function padAmounts(
  inputSize: number,
  outputSize: number,
  stride: number,
  kernel: number,
  pad: "same" | "valid" | number,
): [number, number] {
  if (pad === "valid") return [0, 0];
  if (typeof pad === "number") return [pad, pad];
  const total = Math.max((outputSize - 1) * stride + kernel - inputSize, 0);
  const before = Math.floor(total / 2);
  return [before, total - before];
}

function conv2dBackpropFilter(args: {
  inputs: Record<string, tf.TensorInfo>;
  attrs: Record<string, unknown>;
}): tf.TensorInfo {
  const x = args.inputs.x as tf.Tensor4D;
  const dy = args.inputs.dy as tf.Tensor4D;
  const attrs = args.attrs as unknown as Conv2DBackpropFilterAttrs;
  if (attrs.dataFormat !== "NHWC") {
    throw new Error(`Conv2DBackpropFilter fallback supports NHWC only, got ${attrs.dataFormat}`);
  }
  const [kernelH, kernelW, inChannels, outChannels] = attrs.filterShape;
  const [strideH, strideW] = Array.isArray(attrs.strides)
    ? attrs.strides
    : [attrs.strides, attrs.strides];
  const [batch, height, width] = x.shape;
  const [, outH, outW] = dy.shape;

  return tf.tidy(() => {
    const [padTop, padBottom] = padAmounts(height, outH, strideH, kernelH, attrs.pad);
    const [padLeft, padRight] = padAmounts(width, outW, strideW, kernelW, attrs.pad);
    const padded = tf.pad(x, [
      [0, 0],
      [padTop, padBottom],
      [padLeft, padRight],
      [0, 0],
    ]);

    // im2col: one strided slice per kernel offset, kh-major then kw
    const patches: tf.Tensor4D[] = [];
    for (let kh = 0; kh < kernelH; kh++) {
      for (let kw = 0; kw < kernelW; kw++) {
        patches.push(
          tf.stridedSlice(
            padded,
            [0, kh, kw, 0],
            [batch, kh + (outH - 1) * strideH + 1, kw + (outW - 1) * strideW + 1, inChannels],
            [1, strideH, strideW, 1],
          ) as tf.Tensor4D,
        );
      }
    }
    const stacked = tf.stack(patches); // [KH*KW, B, OH, OW, CI]
    const columns = tf
      .transpose(stacked, [1, 2, 3, 0, 4]) // [B, OH, OW, KH*KW, CI]
      .reshape([batch * outH * outW, kernelH * kernelW * inChannels]);
    const dyMatrix = tf.reshape(dy, [batch * outH * outW, outChannels]);
    // dW = columns^T . dy, laid out (kh, kw, ci) x co
    return tf
      .matMul(columns, dyMatrix, true, false)
      .reshape([kernelH, kernelW, inChannels, outChannels]);
  });
}

let registered = false;

/** Idempotently register the training kernels the wasm backend lacks. */
export function registerWasmTrainingKernels(): void {
  if (registered) return;
  registered = true;
  if (tf.getKernel("Conv2DBackpropFilter", "wasm") == null) {
    tf.registerKernel({
      kernelName: "Conv2DBackpropFilter",
      backendName: "wasm",
      kernelFunc: conv2dBackpropFilter as never,
    });
  }
}
