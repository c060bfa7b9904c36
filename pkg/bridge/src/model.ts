/**
 * Segmenter interface plus the checkpoint-free stub.
 *
 * A segmenter turns an RGB image and labeled point prompts into one
 * per-pixel probability map in [0,1]; the spool server quantizes it to
 * the 16-bit response PNG.
 */

export interface PromptPoint {
  x: number
  y: number
  label: "fg" | "bg"
}

export interface RgbImage {
  width: number
  height: number
  /** row-major RGB triples */
  pixels: Uint8Array
}

export interface Segmenter {
  readonly name: string
  predict(image: RgbImage, prompts: PromptPoint[]): Promise<Float32Array>
}

/**
 * Deterministic conformance model: a Gaussian bump of radius ~min(w,h)/6
 * around each foreground prompt, carved down near background prompts.
 * No weights, no I/O; exists so protocol tests run without a checkpoint.
 */
export class StubSegmenter implements Segmenter {
  readonly name = "stub"

  async predict(image: RgbImage, prompts: PromptPoint[]): Promise<Float32Array> {
    const { width, height } = image
    const rho = Math.max(8, Math.min(width, height) / 6)
    const inv = 1 / (2 * rho * rho)
    const fg = prompts.filter((p) => p.label === "fg")
    const bg = prompts.filter((p) => p.label === "bg")
    const out = new Float32Array(width * height)
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let conf = 0
        for (const p of fg) {
          const d2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)
          conf = Math.max(conf, Math.exp(-d2 * inv))
        }
        for (const p of bg) {
          const d2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)
          conf *= 1 - Math.exp(-d2 * inv)
        }
        out[y * width + x] = conf
      }
    }
    return out
  }
}
