/**
 * Deterministic feature backbones.
 *
 * There is no model hub reachable from this environment, so instead of
 * downloading pretrained weights each named family runs a fixed random
 * projection whose weights are derived from the family name. The feature
 * width matches the real architecture's penultimate layer, outputs are
 * unnormalized, and identical pixels always map to identical vectors,
 * which is everything downstream consumers rely on.
 */

import { POOLED_SIZE } from "./preprocess.js";

export const MODEL_WIDTHS: Record<string, number> = {
  vgg11: 4096,
  resnet18: 512,
  densenet121: 1024,
  efficientnet_b0: 1280,
};

export const HIDDEN = 512;

/** FNV-1a over the string, reduced to a 32-bit seed. */
function seedFromString(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG, uniform in [0, 1). */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function uniformMatrix(
  seed: number,
  rows: number,
  cols: number,
  scale: number,
): Float64Array {
  const rand = mulberry32(seed);
  const m = new Float64Array(rows * cols);
  for (let i = 0; i < m.length; i++) {
    m[i] = (rand() * 2 - 1) * scale;
  }
  return m;
}

export interface Backbone {
  name: string;
  width: number;
  embed(pooled: Float64Array): Float32Array;
}

const cache = new Map<string, Backbone>();

export function loadBackbone(name: string): Backbone {
  const width = MODEL_WIDTHS[name];
  if (width === undefined) {
    throw new RangeError(
      `unknown model '${name}' (known: ${Object.keys(MODEL_WIDTHS).join(", ")})`,
    );
  }
  const cached = cache.get(name);
  if (cached) return cached;

  const w1 = uniformMatrix(
    seedFromString(`${name}/w1`),
    HIDDEN,
    POOLED_SIZE,
    1 / Math.sqrt(POOLED_SIZE),
  );
  const b1 = uniformMatrix(seedFromString(`${name}/b1`), HIDDEN, 1, 0.1);
  const w2 = uniformMatrix(
    seedFromString(`${name}/w2`),
    width,
    HIDDEN,
    1 / Math.sqrt(HIDDEN),
  );
  const b2 = uniformMatrix(seedFromString(`${name}/b2`), width, 1, 0.1);

  const backbone: Backbone = {
    name,
    width,
    embed(pooled: Float64Array): Float32Array {
      if (pooled.length !== POOLED_SIZE) {
        throw new RangeError(
          `pooled input length ${pooled.length} != ${POOLED_SIZE}`,
        );
      }
      const hidden = new Float64Array(HIDDEN);
      for (let r = 0; r < HIDDEN; r++) {
        let acc = b1[r];
        const base = r * POOLED_SIZE;
        for (let c = 0; c < POOLED_SIZE; c++) {
          acc += w1[base + c] * pooled[c];
        }
        hidden[r] = acc > 0 ? acc : 0;
      }
      const out = new Float32Array(width);
      for (let r = 0; r < width; r++) {
        let acc = b2[r];
        const base = r * HIDDEN;
        for (let c = 0; c < HIDDEN; c++) {
          acc += w2[base + c] * hidden[c];
        }
        out[r] = acc;
      }
      return out;
    },
  };
  cache.set(name, backbone);
  return backbone;
}
