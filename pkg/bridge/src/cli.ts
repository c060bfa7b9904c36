#!/usr/bin/env node
/**
 * seg-spool-bridge: serve segmentation requests from a spool directory.
 *
 *   node dist/cli.js --spool DIR --stub
 *   node dist/cli.js --spool DIR --checkpoint model.onnx [--device cpu]
 *
 * --stub needs no checkpoint and exists for protocol conformance runs;
 * a checkpoint that fails to load aborts startup with exit code 1.
 */

import { parseArgs } from "node:util"

import { StubSegmenter, type Segmenter } from "./model.js"
import { SpoolServer } from "./spool.js"

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      spool: { type: "string" },
      stub: { type: "boolean", default: false },
      checkpoint: { type: "string" },
      device: { type: "string", default: "cpu" },
      "poll-ms": { type: "string", default: "50" },
    },
  })

  if (!values.spool) {
    console.error("error: --spool DIR is required")
    return 2
  }
  if (!values.stub && !values.checkpoint) {
    console.error("error: pass --stub or --checkpoint FILE")
    return 2
  }

  let segmenter: Segmenter
  if (values.stub) {
    segmenter = new StubSegmenter()
  } else {
    const { OnnxSegmenter } = await import("./onnx.js")
    try {
      segmenter = await OnnxSegmenter.load(values.checkpoint!, values.device)
    } catch (err) {
      console.error(`error: cannot load checkpoint: ${(err as Error).message}`)
      return 1
    }
  }

  const controller = new AbortController()
  process.on("SIGINT", () => controller.abort())
  process.on("SIGTERM", () => controller.abort())

  const server = new SpoolServer(
    { spool: values.spool, pollMs: Number(values["poll-ms"]) },
    segmenter,
    (msg) => console.log(`[bridge] ${msg}`),
  )
  await server.serve(controller.signal)
  console.log(`[bridge] stopped after ${server.served} requests`)
  return 0
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`fatal: ${err?.stack ?? err}`)
    process.exit(1)
  },
)
