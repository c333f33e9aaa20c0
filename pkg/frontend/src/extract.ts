/**
 * Batch feature extraction: images in, one FMP1 feature map per image out.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'
import { loadBackbone, DEFAULT_PATCH_SIZE, SEEDED_MODEL_ID } from './backbone.js'
import { encodeFmp1 } from './fmp1.js'
import { DecodeError, decodeImage, resizeBilinear } from './images.js'

export interface ExtractorConfig {
  modelId: string
  inputDir: string
  outputDir: string
  resize: number
  layer: string
  patchSize: number
  checkpoint?: string
}

export const DEFAULTS: ExtractorConfig = {
  modelId: SEEDED_MODEL_ID,
  inputDir: '',
  outputDir: '',
  resize: 224,
  layer: 'last',
  patchSize: DEFAULT_PATCH_SIZE,
}

export interface ExtractSummary {
  written: number
  skipped: string[]
}

const IMAGE_SUFFIXES = new Set(['.png', '.ppm'])

export async function extract(config: ExtractorConfig): Promise<ExtractSummary> {
  if (config.resize % config.patchSize !== 0) {
    throw new Error(
      `resize ${config.resize} must be divisible by the backbone patch size ${config.patchSize}`,
    )
  }
  const backbone = await loadBackbone(config)
  const entries = fs
    .readdirSync(config.inputDir)
    .filter((name) => IMAGE_SUFFIXES.has(path.extname(name).toLowerCase()))
    .sort()
  if (entries.length === 0) {
    throw new Error(`no .png/.ppm images found in ${config.inputDir}`)
  }
  fs.mkdirSync(config.outputDir, { recursive: true })

  const summary: ExtractSummary = { written: 0, skipped: [] }
  for (const name of entries) {
    const sourcePath = path.join(config.inputDir, name)
    let image
    try {
      image = decodeImage(fs.readFileSync(sourcePath), name)
    } catch (err) {
      if (err instanceof DecodeError) {
        console.warn(`warning: skipping ${name}: ${err.message}`)
        summary.skipped.push(name)
        continue
      }
      throw err
    }
    const resized = resizeBilinear(image, config.resize)
    const features = await backbone.run(resized)
    const stem = path.basename(name, path.extname(name))
    fs.writeFileSync(
      path.join(config.outputDir, `${stem}.fmp1`),
      encodeFmp1({
        channels: features.channels,
        height: features.grid,
        width: features.grid,
        data: features.data,
      }),
    )
    summary.written += 1
  }
  return summary
}
