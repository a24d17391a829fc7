/**
 * Binary embedding file reader/writer.
 *
 * Layout (all little-endian): magic "DBDE" | version u16 | dim u32 |
 * count u32, then count * dim float32 values, row-major. This matches the
 * primary toolkit's reader bit for bit.
 */

import { readFileSync, writeFileSync } from 'node:fs';

export const MAGIC = 'DBDE';
export const VERSION = 1;
const HEADER_SIZE = 14;

export function writeEmbeddingFile(path: string, rows: Float32Array[], dim: number): void {
  for (const row of rows) {
    if (row.length !== dim) {
      throw new Error(`row has ${row.length} values, expected dim ${dim}`);
    }
  }
  const header = Buffer.alloc(HEADER_SIZE);
  header.write(MAGIC, 0, 'ascii');
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt32LE(dim, 6);
  header.writeUInt32LE(rows.length, 10);

  const payload = Buffer.alloc(4 * dim * rows.length);
  rows.forEach((row, r) => {
    row.forEach((value, c) => {
      payload.writeFloatLE(value, 4 * (r * dim + c));
    });
  });
  writeFileSync(path, Buffer.concat([header, payload]));
}

export interface EmbeddingFile {
  dim: number;
  count: number;
  rows: Float32Array[];
}

export function readEmbeddingFile(path: string): EmbeddingFile {
  const raw = readFileSync(path);
  if (raw.length < HEADER_SIZE) {
    throw new Error(`${path}: shorter than the ${HEADER_SIZE}-byte header`);
  }
  if (raw.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = raw.readUInt16LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const dim = raw.readUInt32LE(6);
  const count = raw.readUInt32LE(10);
  if (raw.length !== HEADER_SIZE + 4 * dim * count) {
    throw new Error(`${path}: payload size disagrees with header`);
  }
  const rows: Float32Array[] = [];
  for (let r = 0; r < count; r++) {
    const row = new Float32Array(dim);
    for (let c = 0; c < dim; c++) {
      row[c] = raw.readFloatLE(HEADER_SIZE + 4 * (r * dim + c));
    }
    rows.push(row);
  }
  return { dim, count, rows };
}
