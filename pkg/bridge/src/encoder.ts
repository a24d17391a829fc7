/**
 * Deterministic 768-dimensional partition encoders.
 *
 * These stand in for the CLIP ViT-L/14 image and text encoders: each
 * partition maps to a fixed pseudo-random unit-scale vector derived from a
 * SHA-256 counter stream, so re-exports are bitwise identical. A real
 * encoder adapter replaces these two functions and keeps the same export
 * path and file format.
 */

import { createHash } from 'node:crypto';

export const EMBED_DIM = 768;

function streamFloats(key: string, n: number): Float32Array {
  const out = new Float32Array(n);
  let produced = 0;
  let block = 0;
  while (produced < n) {
    const digest = createHash('sha256').update(`${key}${block}`).digest();
    for (let off = 0; off + 4 <= digest.length && produced < n; off += 4) {
      const unit = digest.readUInt32BE(off) / 2 ** 32;
      out[produced] = Math.fround(2 * unit - 1);
      produced += 1;
    }
    block += 1;
  }
  return out;
}

export function encodeText(text: string): Float32Array {
  return streamFloats(`text${text}`, EMBED_DIM);
}

export function encodeImageRegion(
  imageDigest: string,
  bbox: [number, number, number, number] | null,
): Float32Array {
  const key = bbox === null
    ? `image-full${imageDigest}`
    : `image-crop${imageDigest}${bbox.join(',')}`;
  return streamFloats(key, EMBED_DIM);
}

export function digestFile(bytes: Buffer): string {
  return createHash('sha256').update(bytes).digest('hex');
}
