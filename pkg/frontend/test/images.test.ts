import { describe, expect, it } from 'vitest'
import { DecodeError, decodeImage, encodePng, resizeBilinear, type RgbImage } from '../src/images.js'

function solid(width: number, height: number, rgb: [number, number, number]): RgbImage {
  const plane = width * height
  const data = new Float64Array(3 * plane)
  for (let c = 0; c < 3; c++) data.fill(rgb[c], c * plane, (c + 1) * plane)
  return { width, height, data }
}

describe('image decoding', () => {
  it('round-trips PNG through encode/decode', () => {
    const image = solid(6, 4, [0.2, 0.6, 1.0])
    image.data[0] = 1.0 // single red pixel top-left
    const decoded = decodeImage(encodePng(image), 'x.png')
    expect(decoded.width).toBe(6)
    expect(decoded.height).toBe(4)
    expect(decoded.data[0]).toBeCloseTo(1.0, 6)
    expect(decoded.data[1]).toBeCloseTo(0.2, 2)
  })

  it('decodes binary PPM', () => {
    const header = Buffer.from('P6\n2 1\n255\n', 'latin1')
    const pixels = Buffer.from([255, 0, 0, 0, 0, 255])
    const image = decodeImage(Buffer.concat([header, pixels]), 'x.ppm')
    expect(image.width).toBe(2)
    expect(image.data[0]).toBe(1)        // red channel, first pixel
    expect(image.data[2 * 2 + 1]).toBe(1) // blue channel, second pixel
  })

  it('raises DecodeError on garbage', () => {
    expect(() => decodeImage(Buffer.from('not an image'), 'junk.png')).toThrow(DecodeError)
    expect(() => decodeImage(Buffer.from([0x89, 0x50, 0x4e, 0x47, 0, 0, 0, 0]), 'trunc.png')).toThrow(
      DecodeError,
    )
  })
})

describe('bilinear resize', () => {
  it('is the identity at the same size', () => {
    const image = solid(5, 5, [0.3, 0.4, 0.5])
    image.data[7] = 0.9
    const out = resizeBilinear(image, 5)
    for (let i = 0; i < out.data.length; i++) {
      expect(out.data[i]).toBeCloseTo(image.data[i], 9)
    }
  })

  it('keeps constants constant at any scale', () => {
    const out = resizeBilinear(solid(7, 7, [0.25, 0.5, 0.75]), 16)
    expect(out.width).toBe(16)
    expect(Math.min(...out.data)).toBeCloseTo(0.25, 9)
    expect(out.data[0]).toBeCloseTo(0.25, 9)
    expect(out.data[16 * 16]).toBeCloseTo(0.5, 9)
  })

  it('averages a two-pixel image at the midpoint', () => {
    const image: RgbImage = {
      width: 2,
      height: 1,
      data: new Float64Array([1.0, 3.0, 0, 0, 0, 0]),
    }
    const out = resizeBilinear(image, 1)
    expect(out.data[0]).toBeCloseTo(2.0, 9)
  })
})
