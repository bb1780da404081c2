/**
 * Walk a class-folder image tree, embed every image, and write one .embd
 * file. Class ids follow the sorted subfolder names; sample ids are
 * assigned sequentially in (class, sorted filename) order, so a fixed tree
 * always produces the same bytes. Batches bound decode memory; the file is
 * written in a single pass at the end.
 */

import { readdir, stat, writeFile } from "node:fs/promises";
import * as path from "node:path";

import { loadBackbone } from "./backbone.js";
import { EmbdRecord, encodeEmbd } from "./format.js";
import { PREPROCESS_TAG, preprocessImage } from "./preprocess.js";

export class UsageError extends Error {}

export interface ExportSpec {
  model: string;
  imagesDir: string;
  outPath: string;
  batchSize: number;
}

export interface ExportSummary {
  written: number;
  skipped: string[];
  classNames: string[];
  dim: number;
}

async function listClassFolders(imagesDir: string): Promise<string[]> {
  let entries;
  try {
    entries = await readdir(imagesDir, { withFileTypes: true });
  } catch (err) {
    throw err; // I/O error: surface as-is
  }
  const folders = entries
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (folders.length === 0) {
    throw new UsageError(`${imagesDir}: no class subfolders`);
  }
  return folders;
}

export async function exportEmbeddings(spec: ExportSpec): Promise<ExportSummary> {
  if (!Number.isInteger(spec.batchSize) || spec.batchSize < 1) {
    throw new UsageError(`batch size must be a positive integer, got ${spec.batchSize}`);
  }
  let backbone;
  try {
    backbone = loadBackbone(spec.model);
  } catch (err) {
    throw new UsageError((err as Error).message);
  }

  const classNames = await listClassFolders(spec.imagesDir);
  const jobs: { file: string; classId: number }[] = [];
  for (let classId = 0; classId < classNames.length; classId++) {
    const folder = path.join(spec.imagesDir, classNames[classId]);
    const files = (await readdir(folder)).sort();
    const regular = [];
    for (const name of files) {
      const full = path.join(folder, name);
      if ((await stat(full)).isFile()) {
        regular.push(full);
      }
    }
    if (regular.length === 0) {
      throw new UsageError(`class folder '${classNames[classId]}' holds no files`);
    }
    for (const file of regular) {
      jobs.push({ file, classId });
    }
  }

  const records: EmbdRecord[] = [];
  const skipped: string[] = [];
  let nextId = 0n;
  for (let lo = 0; lo < jobs.length; lo += spec.batchSize) {
    const batch = jobs.slice(lo, lo + spec.batchSize);
    for (const job of batch) {
      let pooled: Float64Array;
      try {
        pooled = await preprocessImage(job.file);
      } catch (err) {
        console.error(`warning: skipping ${job.file}: ${(err as Error).message}`);
        skipped.push(job.file);
        continue;
      }
      records.push({
        sampleId: nextId++,
        classId: job.classId,
        vector: backbone.embed(pooled),
      });
    }
  }

  const payload = encodeEmbd(backbone.width, records, {
    dataset: path.basename(path.resolve(spec.imagesDir)),
    model: spec.model,
    checkpoint: "seeded-1",
    preprocess: PREPROCESS_TAG,
  });
  await writeFile(spec.outPath, payload);
  return {
    written: records.length,
    skipped,
    classNames,
    dim: backbone.width,
  };
}
