/**
 * Evaluation-mode image preprocessing, pinned so exports are reproducible:
 * resize the short side to 256, center-crop 224x224, scale to [0, 1],
 * normalize per channel with the usual ImageNet mean/std, then average-pool
 * into a 14x14 grid per channel. The recipe string is recorded in the
 * output file's metadata.
 */

import sharp from "sharp";

export const RESIZE_SHORT = 256;
export const CROP = 224;
export const GRID = 14;
export const POOLED_SIZE = GRID * GRID * 3;

export const PREPROCESS_TAG = "resize256-centercrop224-rgbnorm-pool14";

const MEAN = [0.485, 0.456, 0.406];
const STD = [0.229, 0.224, 0.225];

/**
 * Decode one image file into the pooled feature stem.
 * Throws on undecodable input (callers decide whether to skip).
 */
export async function preprocessImage(path: string): Promise<Float64Array> {
  const resized = sharp(path)
    .resize(RESIZE_SHORT, RESIZE_SHORT, { fit: "outside" })
    .removeAlpha()
    .toColorspace("srgb");
  const { data, info } = await resized.raw().toBuffer({ resolveWithObject: true });
  if (info.channels !== 3) {
    throw new Error(`expected 3 channels after decode, got ${info.channels}`);
  }

  const left = Math.floor((info.width - CROP) / 2);
  const top = Math.floor((info.height - CROP) / 2);
  const cell = CROP / GRID; // 16
  const pooled = new Float64Array(POOLED_SIZE);

  for (let y = 0; y < CROP; y++) {
    const row = (top + y) * info.width;
    const gy = Math.floor(y / cell);
    for (let x = 0; x < CROP; x++) {
      const px = (row + left + x) * 3;
      const gcell = (gy * GRID + Math.floor(x / cell)) * 3;
      for (let c = 0; c < 3; c++) {
        pooled[gcell + c] += (data[px + c] / 255 - MEAN[c]) / STD[c];
      }
    }
  }
  const perCell = cell * cell;
  for (let i = 0; i < pooled.length; i++) {
    pooled[i] /= perCell;
  }
  return pooled;
}
