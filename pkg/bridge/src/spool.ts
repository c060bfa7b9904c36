/**
 * Spool-directory server: watches <spool>/req for request JSONs, answers
 * in <spool>/resp.
 *
 * Response discipline: the 16-bit PNG is written to a temp name, fsynced
 * and renamed into place, and only then is the .done marker created, so
 * a .done can never precede a complete response. Any failure produces
 * <id>.err with a message instead. Requests are handled one at a time.
 */

import { watch } from "node:fs"
import { mkdir, readFile, readdir, rename, rm, writeFile, open } from "node:fs/promises"
import { join, basename } from "node:path"
import { PNG } from "pngjs"

import type { PromptPoint, RgbImage, Segmenter } from "./model.js"
import { encodeGray16 } from "./png16.js"

export interface BridgeConfig {
  spool: string
  pollMs: number
}

interface SpoolRequest {
  request_id: string
  image_path: string
  prompts: PromptPoint[]
}

function parseRequest(text: string): SpoolRequest {
  const data = JSON.parse(text)
  if (typeof data.request_id !== "string" || typeof data.image_path !== "string") {
    throw new Error("request needs string request_id and image_path")
  }
  if (!Array.isArray(data.prompts) || data.prompts.length === 0) {
    throw new Error("request needs a non-empty prompts array")
  }
  for (const p of data.prompts) {
    if (!Number.isFinite(p.x) || !Number.isFinite(p.y) || (p.label !== "fg" && p.label !== "bg")) {
      throw new Error(`bad prompt ${JSON.stringify(p)}`)
    }
  }
  return data as SpoolRequest
}

async function loadRgb(path: string): Promise<RgbImage> {
  const png = PNG.sync.read(await readFile(path))
  const pixels = new Uint8Array(png.width * png.height * 3)
  for (let i = 0; i < png.width * png.height; i++) {
    pixels[i * 3] = png.data[i * 4]
    pixels[i * 3 + 1] = png.data[i * 4 + 1]
    pixels[i * 3 + 2] = png.data[i * 4 + 2]
  }
  return { width: png.width, height: png.height, pixels }
}

async function writeAtomic(path: string, data: Buffer | string): Promise<void> {
  const tmp = join(
    path.substring(0, path.length - basename(path).length),
    `.${basename(path)}.tmp`,
  )
  const handle = await open(tmp, "w")
  try {
    await handle.writeFile(data)
    await handle.sync()
  } finally {
    await handle.close()
  }
  await rename(tmp, path)
}

export class SpoolServer {
  private readonly reqDir: string
  private readonly respDir: string
  private readonly handled = new Set<string>()
  private requestsServed = 0

  constructor(
    private readonly config: BridgeConfig,
    private readonly segmenter: Segmenter,
    private readonly log: (msg: string) => void = () => {},
  ) {
    this.reqDir = join(config.spool, "req")
    this.respDir = join(config.spool, "resp")
  }

  get served(): number {
    return this.requestsServed
  }

  /** Run until the signal aborts; resolves after the final sweep. */
  async serve(signal?: AbortSignal): Promise<void> {
    await mkdir(this.reqDir, { recursive: true })
    await mkdir(this.respDir, { recursive: true })
    this.log(`watching ${this.reqDir} (model: ${this.segmenter.name})`)

    let kick: (() => void) | null = null
    const watcher = watch(this.reqDir, () => kick?.())
    try {
      while (!signal?.aborted) {
        await this.sweep()
        await new Promise<void>((resolve) => {
          const timer = setTimeout(done, this.config.pollMs)
          function done() {
            clearTimeout(timer)
            signal?.removeEventListener("abort", done)
            kick = null
            resolve()
          }
          kick = done
          signal?.addEventListener("abort", done, { once: true })
        })
      }
      await this.sweep()
    } finally {
      watcher.close()
    }
  }

  private async sweep(): Promise<void> {
    let names: string[]
    try {
      names = await readdir(this.reqDir)
    } catch {
      return
    }
    for (const name of names.sort()) {
      if (!name.endsWith(".json") || name.startsWith(".")) {
        continue
      }
      const id = name.slice(0, -".json".length)
      if (this.handled.has(id)) {
        continue
      }
      this.handled.add(id)
      await this.handle(id)
    }
  }

  private async handle(id: string): Promise<void> {
    const jsonPath = join(this.reqDir, `${id}.json`)
    try {
      const request = parseRequest(await readFile(jsonPath, "utf-8"))
      const image = await loadRgb(request.image_path)
      for (const p of request.prompts) {
        if (p.x < 0 || p.x >= image.width || p.y < 0 || p.y >= image.height) {
          throw new Error(`prompt (${p.x}, ${p.y}) outside ${image.width}x${image.height}`)
        }
      }
      const conf = await this.segmenter.predict(image, request.prompts)
      if (conf.length !== image.width * image.height) {
        throw new Error("model returned a map of the wrong size")
      }
      const quantized = new Uint16Array(conf.length)
      for (let i = 0; i < conf.length; i++) {
        const v = Math.round(Math.min(Math.max(conf[i], 0), 1) * 65535)
        quantized[i] = v
      }
      const png = encodeGray16(image.width, image.height, quantized)
      await writeAtomic(join(this.respDir, `${id}.png`), png)
      await writeAtomic(join(this.respDir, `${id}.done`), "")
      this.requestsServed += 1
      this.log(`answered ${id} (${image.width}x${image.height})`)
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err)
      await writeAtomic(join(this.respDir, `${id}.err`), message)
      this.log(`failed ${id}: ${message}`)
    } finally {
      await rm(jsonPath, { force: true })
      await rm(join(this.reqDir, `${id}.png`), { force: true })
    }
  }
}
