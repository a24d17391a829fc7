/**
 * Entry point.
 *
 *   node dist/main.js serve
 *   node dist/main.js export-image   --image img.jpg --manifest m.json --out img.dbde
 *   node dist/main.js export-caption --caption cap.txt --manifest m.json --out cap.dbde
 */

import { DeterministicBackend } from './backend.js';
import { exportCaptionEmbeddings, exportImageEmbeddings } from './export.js';
import { serve } from './server.js';

function flag(args: string[], name: string): string {
  const i = args.indexOf(`--${name}`);
  if (i === -1 || i + 1 >= args.length) {
    throw new Error(`missing required flag --${name}`);
  }
  return args[i + 1];
}

async function main(): Promise<number> {
  const [command = 'serve', ...rest] = process.argv.slice(2);
  switch (command) {
    case 'serve':
      await serve(new DeterministicBackend());
      return 0;
    case 'export-image': {
      const n = exportImageEmbeddings(flag(rest, 'image'), flag(rest, 'manifest'), flag(rest, 'out'));
      console.error(`exported ${n} image partition embeddings`);
      return 0;
    }
    case 'export-caption': {
      const n = exportCaptionEmbeddings(flag(rest, 'caption'), flag(rest, 'manifest'), flag(rest, 'out'));
      console.error(`exported ${n} caption partition embeddings`);
      return 0;
    }
    default:
      console.error(`unknown command ${command}; expected serve | export-image | export-caption`);
      return 1;
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(1);
  },
);
