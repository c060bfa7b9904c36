/**
 * Checkpoint-backed segmenter via ONNX Runtime (loaded dynamically).
 *
 * Expected model contract (a point-promptable mask predictor exported to
 * ONNX, Segment-Anything style):
 *   inputs : image  float32 [1, 3, H, W], values in [0, 1]
 *            points float32 [1, N, 2]  (x, y) pixel coordinates
 *            labels float32 [1, N]     1 = foreground, 0 = background
 *   outputs: masks  float32 [1, M, H, W] logits
 *            scores float32 [1, M]     (optional; highest-scoring mask wins)
 *
 * The highest-scoring mask's sigmoid is returned, matching the protocol's
 * one-probability-map-per-request rule.
 */

import type { PromptPoint, RgbImage, Segmenter } from "./model.js"

type OrtModule = typeof import("onnxruntime-node")

export class OnnxSegmenter implements Segmenter {
  readonly name: string

  private constructor(
    private readonly ort: OrtModule,
    private readonly session: import("onnxruntime-node").InferenceSession,
    checkpoint: string,
  ) {
    this.name = `onnx:${checkpoint}`
  }

  static async load(checkpoint: string, device = "cpu"): Promise<OnnxSegmenter> {
    let ort: OrtModule
    try {
      ort = await import("onnxruntime-node")
    } catch {
      throw new Error(
        "onnxruntime-node is not installed; run `npm install onnxruntime-node` " +
          "or use --stub for the checkpoint-free mode",
      )
    }
    const providers = device === "cpu" ? ["cpu"] : [device, "cpu"]
    const session = await ort.InferenceSession.create(checkpoint, {
      executionProviders: providers as never,
    })
    return new OnnxSegmenter(ort, session, checkpoint)
  }

  async predict(image: RgbImage, prompts: PromptPoint[]): Promise<Float32Array> {
    const { width, height, pixels } = image
    const chw = new Float32Array(3 * height * width)
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        for (let c = 0; c < 3; c++) {
          chw[c * height * width + y * width + x] = pixels[(y * width + x) * 3 + c] / 255
        }
      }
    }
    const pts = new Float32Array(prompts.length * 2)
    const labels = new Float32Array(prompts.length)
    prompts.forEach((p, i) => {
      pts[i * 2] = p.x
      pts[i * 2 + 1] = p.y
      labels[i] = p.label === "fg" ? 1 : 0
    })
    const feeds: Record<string, import("onnxruntime-node").Tensor> = {
      image: new this.ort.Tensor("float32", chw, [1, 3, height, width]),
      points: new this.ort.Tensor("float32", pts, [1, prompts.length, 2]),
      labels: new this.ort.Tensor("float32", labels, [1, prompts.length]),
    }
    const results = await this.session.run(feeds)
    const masks = results["masks"]
    if (!masks) {
      throw new Error("model produced no 'masks' output")
    }
    const [, m, h, w] = masks.dims
    if (h !== height || w !== width) {
      throw new Error(`model mask ${w}x${h} does not match image ${width}x${height}`)
    }
    const scores = results["scores"]
    let best = 0
    if (scores && m > 1) {
      const s = scores.data as Float32Array
      for (let i = 1; i < m; i++) {
        if (s[i] > s[best]) best = i
      }
    }
    const logits = masks.data as Float32Array
    const out = new Float32Array(height * width)
    const base = best * height * width
    for (let i = 0; i < out.length; i++) {
      out[i] = 1 / (1 + Math.exp(-logits[base + i]))
    }
    return out
  }
}
