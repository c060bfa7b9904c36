/**
 * Minimal 16-bit grayscale PNG codec for spool responses.
 *
 * Encoding always emits bit depth 16 / color type 0 / no interlace with
 * filter 0 scanlines, which is exactly what the spool protocol requires.
 * Decoding accepts only that same family (any standard filter), enough
 * to verify our own output in tests.
 */

import { deflateSync, inflateSync } from "node:zlib"

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])

const CRC_TABLE = (() => {
  const table = new Uint32Array(256)
  for (let n = 0; n < 256; n++) {
    let c = n
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
    }
    table[n] = c >>> 0
  }
  return table
})()

function crc32(buf: Buffer): number {
  let c = 0xffffffff
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8)
  }
  return (c ^ 0xffffffff) >>> 0
}

function chunk(type: string, data: Buffer): Buffer {
  const head = Buffer.alloc(8)
  head.writeUInt32BE(data.length, 0)
  head.write(type, 4, "ascii")
  const crcBuf = Buffer.alloc(4)
  crcBuf.writeUInt32BE(crc32(Buffer.concat([head.subarray(4), data])), 0)
  return Buffer.concat([head, data, crcBuf])
}

export function encodeGray16(width: number, height: number, values: Uint16Array): Buffer {
  if (values.length !== width * height) {
    throw new Error(`expected ${width * height} samples, got ${values.length}`)
  }
  const ihdr = Buffer.alloc(13)
  ihdr.writeUInt32BE(width, 0)
  ihdr.writeUInt32BE(height, 4)
  ihdr[8] = 16 // bit depth
  ihdr[9] = 0 // color type: grayscale
  // compression, filter, interlace all zero

  const stride = width * 2
  const raw = Buffer.alloc(height * (stride + 1))
  for (let y = 0; y < height; y++) {
    const row = y * (stride + 1)
    raw[row] = 0 // filter type none
    for (let x = 0; x < width; x++) {
      raw.writeUInt16BE(values[y * width + x], row + 1 + x * 2)
    }
  }
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ])
}

export interface Gray16Image {
  width: number
  height: number
  values: Uint16Array
}

export function decodeGray16(buf: Buffer): Gray16Image {
  if (!buf.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not a PNG file")
  }
  let offset = 8
  let width = 0
  let height = 0
  const idat: Buffer[] = []
  while (offset < buf.length) {
    const length = buf.readUInt32BE(offset)
    const type = buf.toString("ascii", offset + 4, offset + 8)
    const data = buf.subarray(offset + 8, offset + 8 + length)
    if (type === "IHDR") {
      width = data.readUInt32BE(0)
      height = data.readUInt32BE(4)
      if (data[8] !== 16 || data[9] !== 0 || data[12] !== 0) {
        throw new Error("decodeGray16 handles only 16-bit grayscale, non-interlaced")
      }
    } else if (type === "IDAT") {
      idat.push(data)
    } else if (type === "IEND") {
      break
    }
    offset += 12 + length
  }
  const raw = inflateSync(Buffer.concat(idat))
  const bpp = 2
  const stride = width * bpp
  const values = new Uint16Array(width * height)
  const prev = Buffer.alloc(stride)
  const cur = Buffer.alloc(stride)
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)]
    raw.copy(cur, 0, y * (stride + 1) + 1, (y + 1) * (stride + 1))
    for (let i = 0; i < stride; i++) {
      const a = i >= bpp ? cur[i - bpp] : 0
      const b = prev[i]
      const c = i >= bpp ? prev[i - bpp] : 0
      let x = cur[i]
      switch (filter) {
        case 0:
          break
        case 1:
          x = (x + a) & 0xff
          break
        case 2:
          x = (x + b) & 0xff
          break
        case 3:
          x = (x + Math.floor((a + b) / 2)) & 0xff
          break
        case 4: {
          const p = a + b - c
          const pa = Math.abs(p - a)
          const pb = Math.abs(p - b)
          const pc = Math.abs(p - c)
          const paeth = pa <= pb && pa <= pc ? a : pb <= pc ? b : c
          x = (x + paeth) & 0xff
          break
        }
        default:
          throw new Error(`unknown filter ${filter}`)
      }
      cur[i] = x
    }
    for (let xpx = 0; xpx < width; xpx++) {
      values[y * width + xpx] = cur.readUInt16BE(xpx * 2)
    }
    cur.copy(prev)
  }
  return { width, height, values }
}
