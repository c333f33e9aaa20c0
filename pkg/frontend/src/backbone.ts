/**
 * Vision backbones producing dense patch-feature grids.
 *
 * Two sources: a tfjs GraphModel checkpoint loaded from disk (the bridge's
 * real purpose), and a deterministic seeded convolutional fallback so the
 * pipeline runs in environments where no published checkpoint is
 * reachable. Published checkpoints were unobtainable in this sandbox, so
 * the fallback is the default model.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'
import * as tf from '@tensorflow/tfjs'
import type { RgbImage } from './images.js'

export const SEEDED_MODEL_ID = 'seeded-patch/16'
export const DEFAULT_PATCH_SIZE = 16

export interface PatchFeatures {
  channels: number
  grid: number
  /** channel-major (channel, row, column) */
  data: Float32Array
}

export interface Backbone {
  id: string
  patchSize: number
  run(image: RgbImage): Promise<PatchFeatures>
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededGaussians(count: number, scale: number, seed: number): Float32Array {
  const next = mulberry32(seed)
  const out = new Float32Array(count)
  for (let i = 0; i < count; i += 2) {
    const u = Math.max(next(), 1e-12)
    const v = next()
    const radius = Math.sqrt(-2 * Math.log(u))
    out[i] = radius * Math.cos(2 * Math.PI * v) * scale
    if (i + 1 < count) out[i + 1] = radius * Math.sin(2 * Math.PI * v) * scale
  }
  return out
}

function toNhwc(image: RgbImage): tf.Tensor4D {
  const plane = image.width * image.height
  const hwc = new Float32Array(plane * 3)
  for (let p = 0; p < plane; p++) {
    hwc[3 * p] = image.data[p]
    hwc[3 * p + 1] = image.data[plane + p]
    hwc[3 * p + 2] = image.data[2 * plane + p]
  }
  return tf.tensor4d(hwc, [1, image.height, image.width, 3])
}

/** [1, g, g, c] activations to channel-major (c, g, g). */
async function gridToChannelMajor(grid: tf.Tensor): Promise<PatchFeatures> {
  const [, g, g2, c] = grid.shape as [number, number, number, number]
  if (g !== g2) throw new Error(`expected a square grid, got ${g}x${g2}`)
  const chw = tf.transpose(grid, [0, 3, 1, 2])
  const data = new Float32Array(await chw.data())
  chw.dispose()
  return { channels: c, grid: g, data }
}

/**
 * Deterministic stand-in backbone: non-overlapping patch embedding followed
 * by two pointwise mixing layers, weights drawn from a fixed-seed PRNG.
 */
export function seededBackbone(
  patchSize: number = DEFAULT_PATCH_SIZE,
  channels: number = 64,
  hidden: number = 48,
  seed: number = 0x5eed,
): Backbone {
  const patchIn = 3 * patchSize * patchSize
  const k1 = tf.tensor4d(
    seededGaussians(patchIn * hidden, Math.sqrt(2 / patchIn), seed),
    [patchSize, patchSize, 3, hidden],
  )
  const k2 = tf.tensor4d(
    seededGaussians(hidden * channels, Math.sqrt(2 / hidden), seed ^ 0xa5a5a5),
    [1, 1, hidden, channels],
  )
  return {
    id: SEEDED_MODEL_ID,
    patchSize,
    async run(image: RgbImage): Promise<PatchFeatures> {
      const grid = tf.tidy(() => {
        const input = toNhwc(image)
        const embedded = tf.tanh(tf.conv2d(input, k1, patchSize, 'valid'))
        return tf.tanh(tf.conv2d(embedded, k2, 1, 'same'))
      })
      const features = await gridToChannelMajor(grid)
      grid.dispose()
      return features
    },
  }
}

function diskIoHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath)
      const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8'))
      const manifest = modelJson.weightsManifest ?? []
      const weightSpecs = manifest.flatMap((group: any) => group.weights)
      const shards: Buffer[] = manifest.flatMap((group: any) =>
        group.paths.map((p: string) => fs.readFileSync(path.join(dir, p))),
      )
      const weightData = Buffer.concat(shards)
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        weightSpecs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      }
    },
  }
}

/**
 * Backbone over a tfjs checkpoint on disk (model.json plus weight shards;
 * both graph-model and layers-model formats). The configured layer names
 * the output node holding patch tokens (graph models only); a leading
 * class token is dropped when the token count is one above the patch grid.
 */
export async function checkpointBackbone(
  modelId: string,
  checkpointPath: string,
  patchSize: number,
  layer: string,
): Promise<Backbone> {
  const format = JSON.parse(fs.readFileSync(checkpointPath, 'utf8')).format
  const handler = diskIoHandler(checkpointPath)
  const model =
    format === 'layers-model'
      ? await tf.loadLayersModel(handler)
      : await tf.loadGraphModel(handler)

  return {
    id: modelId,
    patchSize,
    async run(image: RgbImage): Promise<PatchFeatures> {
      const input = toNhwc(image)
      let raw: tf.Tensor
      if (model instanceof tf.GraphModel) {
        raw = (layer === 'last' ? model.execute(input) : model.execute(input, layer)) as tf.Tensor
      } else {
        raw = model.predict(input) as tf.Tensor
      }
      input.dispose()
      const g = image.width / patchSize
      let grid: tf.Tensor
      if (raw.shape.length === 4) {
        grid = raw
      } else if (raw.shape.length === 3) {
        const tokens = raw.shape[1] as number
        const c = raw.shape[2] as number
        const spatial = tokens === g * g + 1 ? tf.slice(raw, [0, 1, 0], [1, g * g, c]) : raw
        grid = tf.reshape(spatial, [1, g, g, c])
        if (spatial !== raw) spatial.dispose()
        raw.dispose()
      } else {
        throw new Error(`cannot interpret backbone output of shape [${raw.shape}]`)
      }
      const features = await gridToChannelMajor(grid)
      grid.dispose()
      return features
    },
  }
}

export interface BackboneSpec {
  modelId: string
  checkpoint?: string
  patchSize: number
  layer: string
}

export async function loadBackbone(spec: BackboneSpec): Promise<Backbone> {
  if (spec.checkpoint) {
    if (!fs.existsSync(spec.checkpoint)) {
      throw new Error(`checkpoint not obtainable: ${spec.checkpoint}`)
    }
    return checkpointBackbone(spec.modelId, spec.checkpoint, spec.patchSize, spec.layer)
  }
  if (spec.modelId === SEEDED_MODEL_ID) {
    return seededBackbone(spec.patchSize)
  }
  throw new Error(
    `checkpoint not obtainable for model '${spec.modelId}': no checkpoint path given ` +
    `and no model hub is reachable from this environment`,
  )
}
