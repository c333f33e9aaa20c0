/**
 * Extractor command line. Flags mirror the extractor configuration:
 *
 *   --input-dir <dir>    images to process (.png / .ppm)
 *   --output-dir <dir>   where FMP1 files go
 *   --model <id>         backbone id (default seeded-patch/16)
 *   --checkpoint <path>  tfjs GraphModel model.json for a real backbone
 *   --resize <n>         square input resolution (default 224)
 *   --layer <name>       output node holding patch tokens (default last)
 *   --patch-size <n>     backbone patch size (default 16)
 */

import { DEFAULTS, extract, type ExtractorConfig } from './extract.js'

function parseArgs(argv: string[]): ExtractorConfig {
  const config: ExtractorConfig = { ...DEFAULTS }
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i]
    const value = argv[i + 1]
    if (value === undefined) throw new Error(`missing value for ${flag}`)
    switch (flag) {
      case '--input-dir':
        config.inputDir = value
        break
      case '--output-dir':
        config.outputDir = value
        break
      case '--model':
        config.modelId = value
        break
      case '--checkpoint':
        config.checkpoint = value
        break
      case '--resize':
        config.resize = parseInt(value, 10)
        break
      case '--layer':
        config.layer = value
        break
      case '--patch-size':
        config.patchSize = parseInt(value, 10)
        break
      default:
        throw new Error(`unknown flag ${flag}`)
    }
  }
  if (!config.inputDir || !config.outputDir) {
    throw new Error('both --input-dir and --output-dir are required')
  }
  if (!Number.isInteger(config.resize) || config.resize < config.patchSize) {
    throw new Error(`bad --resize value`)
  }
  return config
}

async function main() {
  let config: ExtractorConfig
  try {
    config = parseArgs(process.argv.slice(2))
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`)
    process.exit(1)
  }
  try {
    const summary = await extract(config)
    console.log(
      `extract: wrote ${summary.written} feature map(s) to ${config.outputDir}` +
      (summary.skipped.length ? `, skipped ${summary.skipped.length}` : ''),
    )
    process.exit(summary.written > 0 ? 0 : 1)
  } catch (err) {
    console.error(`fatal: ${(err as Error).message}`)
    process.exit(1)
  }
}

main()
