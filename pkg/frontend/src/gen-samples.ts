/**
 * Writes a handful of sample PNGs (one colored shape over a smooth
 * background gradient) for exercising the extractor end to end.
 *
 *   node dist/gen-samples.js <output-dir> [count]
 */

import * as fs from 'node:fs'
import * as path from 'node:path'
import { encodePng, type RgbImage } from './images.js'

const SIZE = 224

const PALETTE: Array<[number, number, number]> = [
  [0.85, 0.2, 0.15],
  [0.2, 0.8, 0.2],
  [0.15, 0.3, 0.85],
  [0.85, 0.8, 0.2],
]

export function sampleScene(index: number): RgbImage {
  const data = new Float64Array(3 * SIZE * SIZE)
  const plane = SIZE * SIZE
  const phase = index * 1.7
  for (let y = 0; y < SIZE; y++) {
    for (let x = 0; x < SIZE; x++) {
      const p = y * SIZE + x
      data[p] = 0.45 + 0.25 * Math.sin(phase + (2.1 * x) / SIZE)
      data[plane + p] = 0.45 + 0.25 * Math.cos(phase + (1.7 * y) / SIZE)
      data[2 * plane + p] = 0.45 + 0.25 * Math.sin(phase + (1.3 * (x + y)) / SIZE)
    }
  }
  const color = PALETTE[index % PALETTE.length]
  const cx = 60 + 25 * (index % 4)
  const cy = 70 + 18 * (index % 3)
  const radius = 38 + 6 * (index % 3)
  for (let y = 0; y < SIZE; y++) {
    for (let x = 0; x < SIZE; x++) {
      const inside =
        index % 2 === 0
          ? (x - cx) ** 2 + (y - cy) ** 2 <= radius ** 2
          : Math.abs(x - cx) <= radius && Math.abs(y - cy) <= radius
      if (inside) {
        const p = y * SIZE + x
        data[p] = color[0]
        data[plane + p] = color[1]
        data[2 * plane + p] = color[2]
      }
    }
  }
  return { width: SIZE, height: SIZE, data }
}

function main() {
  const outDir = process.argv[2]
  const count = parseInt(process.argv[3] ?? '5', 10)
  if (!outDir) {
    console.error('usage: gen-samples <output-dir> [count]')
    process.exit(1)
  }
  fs.mkdirSync(outDir, { recursive: true })
  for (let i = 0; i < count; i++) {
    fs.writeFileSync(path.join(outDir, `sample_${i}.png`), encodePng(sampleScene(i)))
  }
  console.log(`gen-samples: wrote ${count} image(s) to ${outDir}`)
}

const entry = process.argv[1] ?? ''
if (entry.endsWith('gen-samples.js') || entry.endsWith('gen-samples.ts')) {
  main()
}
