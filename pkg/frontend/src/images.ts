/**
 * Image loading and resizing for the extractor. PNG via pngjs, plus binary
 * PPM (P6) since these are the formats the sandbox can round-trip offline.
 */

import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** channel-major RGB, values in [0, 1] */
  data: Float64Array
}

export class DecodeError extends Error {}

function fromRgba(width: number, height: number, rgba: Uint8Array): RgbImage {
  const data = new Float64Array(3 * width * height)
  const plane = width * height
  for (let p = 0; p < plane; p++) {
    data[p] = rgba[4 * p] / 255
    data[plane + p] = rgba[4 * p + 1] / 255
    data[2 * plane + p] = rgba[4 * p + 2] / 255
  }
  return { width, height, data }
}

function decodePpm(buf: Buffer): RgbImage {
  // header: "P6" <ws> width <ws> height <ws> maxval <single ws> raw RGB
  const header = buf.toString('latin1', 0, Math.min(buf.length, 64))
  const match = /^P6\s+(\d+)\s+(\d+)\s+(\d+)\s/.exec(header)
  if (!match) throw new DecodeError('not a binary PPM')
  const [, w, h, maxval] = match
  const width = parseInt(w, 10)
  const height = parseInt(h, 10)
  if (parseInt(maxval, 10) !== 255) throw new DecodeError('PPM maxval must be 255')
  const offset = match[0].length
  const expected = 3 * width * height
  if (buf.length - offset !== expected) {
    throw new DecodeError(`PPM payload has ${buf.length - offset} bytes, expected ${expected}`)
  }
  const data = new Float64Array(expected)
  const plane = width * height
  for (let p = 0; p < plane; p++) {
    data[p] = buf[offset + 3 * p] / 255
    data[plane + p] = buf[offset + 3 * p + 1] / 255
    data[2 * plane + p] = buf[offset + 3 * p + 2] / 255
  }
  return { width, height, data }
}

export function decodeImage(buf: Buffer, filename: string): RgbImage {
  if (buf.length >= 8 && buf.readUInt32BE(0) === 0x89504e47) {
    try {
      const png = PNG.sync.read(buf)
      return fromRgba(png.width, png.height, png.data)
    } catch (err) {
      throw new DecodeError(`broken PNG ${filename}: ${(err as Error).message}`)
    }
  }
  if (buf.length >= 2 && buf[0] === 0x50 && buf[1] === 0x36) {
    return decodePpm(buf)
  }
  throw new DecodeError(`unsupported image format: ${filename}`)
}

export function encodePng(image: RgbImage): Buffer {
  const png = new PNG({ width: image.width, height: image.height })
  const plane = image.width * image.height
  for (let p = 0; p < plane; p++) {
    png.data[4 * p] = Math.round(image.data[p] * 255)
    png.data[4 * p + 1] = Math.round(image.data[plane + p] * 255)
    png.data[4 * p + 2] = Math.round(image.data[2 * plane + p] * 255)
    png.data[4 * p + 3] = 255
  }
  return PNG.sync.write(png)
}

/** Bilinear resize with half-pixel sample centers and border clamping. */
export function resizeBilinear(image: RgbImage, outSize: number): RgbImage {
  const { width, height, data } = image
  const out = new Float64Array(3 * outSize * outSize)
  const plane = width * height
  const outPlane = outSize * outSize
  for (let r = 0; r < outSize; r++) {
    const fy = Math.min(Math.max(((r + 0.5) / outSize) * height - 0.5, 0), height - 1)
    const y0 = Math.min(Math.floor(fy), Math.max(height - 2, 0))
    const ty = height === 1 ? 0 : fy - y0
    const y1 = Math.min(y0 + 1, height - 1)
    for (let s = 0; s < outSize; s++) {
      const fx = Math.min(Math.max(((s + 0.5) / outSize) * width - 0.5, 0), width - 1)
      const x0 = Math.min(Math.floor(fx), Math.max(width - 2, 0))
      const tx = width === 1 ? 0 : fx - x0
      const x1 = Math.min(x0 + 1, width - 1)
      for (let c = 0; c < 3; c++) {
        const base = c * plane
        const value =
          (1 - ty) * (1 - tx) * data[base + y0 * width + x0] +
          (1 - ty) * tx * data[base + y0 * width + x1] +
          ty * (1 - tx) * data[base + y1 * width + x0] +
          ty * tx * data[base + y1 * width + x1]
        out[c * outPlane + r * outSize + s] = value
      }
    }
  }
  return { width: outSize, height: outSize, data: out }
}
