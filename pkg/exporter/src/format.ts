/**
 * Binary embedding file (.embd) writer.
 *
 * Layout, all little-endian:
 *   magic   4 bytes  "EMBD"
 *   version u32      1
 *   dim     u32      vector width
 *   count   u64      number of records
 *   mlen    u32      metadata byte length
 *   meta    mlen bytes of UTF-8 JSON
 *   records count times: sample_id u64, class_id u32, dim x f32
 */

export const MAGIC = "EMBD";
export const VERSION = 1;

export interface EmbdMeta {
  dataset: string;
  model: string;
  checkpoint: string;
  /** Readers ignore unknown keys, so the preprocessing recipe rides along. */
  preprocess?: string;
}

export interface EmbdRecord {
  sampleId: bigint;
  classId: number;
  vector: Float32Array;
}

export function encodeEmbd(
  dim: number,
  records: EmbdRecord[],
  meta: EmbdMeta,
): Buffer {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new RangeError(`dim must be a positive integer, got ${dim}`);
  }
  const metaBytes = Buffer.from(JSON.stringify(meta), "utf-8");
  const headerSize = 4 + 4 + 4 + 8 + 4;
  const recordSize = 8 + 4 + 4 * dim;
  const out = Buffer.alloc(
    headerSize + metaBytes.length + recordSize * records.length,
  );

  out.write(MAGIC, 0, "ascii");
  out.writeUInt32LE(VERSION, 4);
  out.writeUInt32LE(dim, 8);
  out.writeBigUInt64LE(BigInt(records.length), 12);
  out.writeUInt32LE(metaBytes.length, 20);
  metaBytes.copy(out, headerSize);

  let off = headerSize + metaBytes.length;
  for (const rec of records) {
    if (rec.vector.length !== dim) {
      throw new RangeError(
        `record ${rec.sampleId}: vector length ${rec.vector.length} != dim ${dim}`,
      );
    }
    out.writeBigUInt64LE(rec.sampleId, off);
    out.writeUInt32LE(rec.classId >>> 0, off + 8);
    off += 12;
    for (let i = 0; i < dim; i++) {
      out.writeFloatLE(rec.vector[i], off);
      off += 4;
    }
  }
  return out;
}
