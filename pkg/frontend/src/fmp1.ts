/**
 * FMP1 feature-map container: magic "FMP1", then channels/height/width as
 * u32 little-endian, then c*h*w float32 little-endian values, channel-major.
 */

const MAGIC = 'FMP1'

export interface FeatureMap {
  channels: number
  height: number
  width: number
  /** channel-major (channel, row, column) */
  data: Float32Array
}

export function encodeFmp1(map: FeatureMap): Buffer {
  const { channels, height, width, data } = map
  if (channels < 1 || height < 1 || width < 1) {
    throw new Error(`dims must be positive, got c=${channels} h=${height} w=${width}`)
  }
  if (data.length !== channels * height * width) {
    throw new Error(`payload has ${data.length} values, expected ${channels * height * width}`)
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) throw new Error(`non-finite value at flat index ${i}`)
  }
  const buf = Buffer.alloc(16 + 4 * data.length)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt32LE(channels, 4)
  buf.writeUInt32LE(height, 8)
  buf.writeUInt32LE(width, 12)
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], 16 + 4 * i)
  }
  return buf
}

export function decodeFmp1(buf: Buffer): FeatureMap {
  if (buf.length < 16 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('not an FMP1 payload')
  }
  const channels = buf.readUInt32LE(4)
  const height = buf.readUInt32LE(8)
  const width = buf.readUInt32LE(12)
  const n = channels * height * width
  if (buf.length !== 16 + 4 * n) {
    throw new Error(`expected ${16 + 4 * n} bytes for c=${channels} h=${height} w=${width}, got ${buf.length}`)
  }
  const data = new Float32Array(n)
  for (let i = 0; i < n; i++) data[i] = buf.readFloatLE(16 + 4 * i)
  return { channels, height, width, data }
}
