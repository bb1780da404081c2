#!/usr/bin/env node
/**
 * export --model <name> --images <dir> --out <file.embd> --batch <n>
 *
 * Exit codes: 0 success, 1 bad arguments or an invalid image tree,
 * 2 filesystem failures (missing directory, unwritable output).
 */

import { parseArgs } from "node:util";

import { exportEmbeddings, UsageError } from "./exporter.js";

const USAGE =
  "usage: export --model <name> --images <dir> --out <file.embd> [--batch <n>]";

async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        model: { type: "string" },
        images: { type: "string" },
        out: { type: "string" },
        batch: { type: "string", default: "16" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    console.error(USAGE);
    return 1;
  }
  const { model, images, out, batch } = parsed.values;
  if (!model || !images || !out) {
    console.error("error: --model, --images, and --out are required");
    console.error(USAGE);
    return 1;
  }
  const batchSize = Number(batch);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    console.error(`error: --batch must be a positive integer, got '${batch}'`);
    return 1;
  }

  let summary;
  try {
    summary = await exportEmbeddings({
      model,
      imagesDir: images,
      outPath: out,
      batchSize,
    });
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  console.log(
    `wrote ${summary.written} vectors (dim ${summary.dim}) to ${out}, ` +
      `skipped ${summary.skipped.length}`,
  );
  return 0;
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
