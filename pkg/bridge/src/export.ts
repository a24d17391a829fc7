/**
 * Embedding export: encode every partition named in a manifest and write the
 * binary embedding file plus a sidecar manifest declaring dim 768.
 */

import { readFileSync, writeFileSync } from 'node:fs';

import { EMBED_DIM, digestFile, encodeImageRegion, encodeText } from './encoder.js';
import { writeEmbeddingFile } from './embeddingFile.js';

export interface ManifestEntry {
  id: string;
  modality: 'image' | 'caption';
  kind: string;
  embedding_index: number;
  bbox?: [number, number, number, number];
  span?: [number, number];
}

export interface Manifest {
  entries: ManifestEntry[];
  dim?: number;
  image_width?: number;
  image_height?: number;
  item?: string;
}

export function loadManifest(path: string): Manifest {
  return JSON.parse(readFileSync(path, 'utf-8')) as Manifest;
}

function orderedEntries(manifest: Manifest, modality: 'image' | 'caption'): ManifestEntry[] {
  if (manifest.dim !== undefined && manifest.dim !== EMBED_DIM) {
    throw new Error(`manifest declares dim ${manifest.dim}, this encoder emits ${EMBED_DIM}`);
  }
  const entries = manifest.entries
    .filter((e) => e.modality === modality)
    .sort((a, b) => a.embedding_index - b.embedding_index);
  if (entries.length === 0) {
    throw new Error(`manifest has no ${modality} entries`);
  }
  entries.forEach((e, i) => {
    if (e.embedding_index !== i) {
      throw new Error(
        `${modality} embedding indexes must be 0..${entries.length - 1} without gaps`,
      );
    }
  });
  return entries;
}

function writeSidecar(manifest: Manifest, outPath: string): void {
  const sidecar = { ...manifest, dim: EMBED_DIM };
  writeFileSync(`${outPath}.manifest.json`, JSON.stringify(sidecar, null, 2) + '\n');
}

export function exportImageEmbeddings(
  imagePath: string,
  manifestPath: string,
  outPath: string,
): number {
  const manifest = loadManifest(manifestPath);
  const entries = orderedEntries(manifest, 'image');
  const digest = digestFile(readFileSync(imagePath));
  const rows = entries.map((e) => {
    if (e.kind === 'full') {
      return encodeImageRegion(digest, null); // full image stays uncropped
    }
    if (!e.bbox) throw new Error(`image entry ${e.id} has no bbox`);
    return encodeImageRegion(digest, e.bbox);
  });
  writeEmbeddingFile(outPath, rows, EMBED_DIM);
  writeSidecar(manifest, outPath);
  return rows.length;
}

export function exportCaptionEmbeddings(
  captionPath: string,
  manifestPath: string,
  outPath: string,
): number {
  const manifest = loadManifest(manifestPath);
  const entries = orderedEntries(manifest, 'caption');
  const text = readFileSync(captionPath, 'utf-8');
  const rows = entries.map((e) => {
    if (!e.span) throw new Error(`caption entry ${e.id} has no span`);
    const [start, end] = e.span;
    if (start < 0 || end > text.length || end <= start) {
      throw new Error(`caption entry ${e.id} span [${start}, ${end}) is out of range`);
    }
    return encodeText(text.slice(start, end));
  });
  writeEmbeddingFile(outPath, rows, EMBED_DIM);
  writeSidecar(manifest, outPath);
  return rows.length;
}
