/**
 * Minimal ambient types for the optional onnxruntime-node dependency.
 * The real package ships its own types; this stub only covers the
 * surface used here so the build does not require the native module.
 */
declare module "onnxruntime-node" {
  export class Tensor {
    constructor(type: "float32", data: Float32Array, dims: readonly number[])
    readonly data: Float32Array | Int32Array | Uint8Array
    readonly dims: readonly number[]
  }

  export class InferenceSession {
    static create(
      path: string,
      options?: { executionProviders?: readonly string[] },
    ): Promise<InferenceSession>
    run(feeds: Record<string, Tensor>): Promise<Record<string, Tensor>>
  }
}
