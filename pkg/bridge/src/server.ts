/**
 * Stdio server loop: one JSON request per stdin line, one JSON response per
 * stdout line, strictly FIFO (the init response declares concurrent: false).
 * Errors are structured responses, never a silent exit.
 */

import { createInterface } from 'node:readline';

import { ModelBackend } from './backend.js';
import { BridgeError, Request, wireFloat } from './protocol.js';

interface ServerState {
  contexts: Map<string, string>; // context_id -> backend seed
  nextContext: number;
}

export function handleRequest(
  request: Request,
  backend: ModelBackend,
  state: ServerState,
): Record<string, unknown> {
  switch (request.kind) {
    case 'init': {
      const contextId = `ctx-${state.nextContext++}`;
      const seed = backend.contextSeed(
        request.model_id ?? 'default',
        request.prompt ?? '',
        request.image_path ?? null,
      );
      state.contexts.set(contextId, seed);
      return {
        context_id: contextId,
        d_h: backend.dH,
        vocab: backend.vocab,
        eos: backend.eos,
        concurrent: false,
      };
    }
    case 'expand': {
      const seed = state.contexts.get(request.context_id);
      if (seed === undefined) {
        throw new BridgeError('context-mismatch', `unknown context ${request.context_id}`);
      }
      if (!Array.isArray(request.tokens)) {
        throw new BridgeError('bad-request', 'expand needs a tokens array');
      }
      const result = backend.expand(seed, request.tokens, request.K);
      return {
        tokens: result.tokens,
        logprobs: result.logprobs.map(wireFloat),
        hiddens: result.hiddens.map((row) => row.map(wireFloat)),
      };
    }
    case 'detokenize': {
      if (!Array.isArray(request.tokens)) {
        throw new BridgeError('bad-request', 'detokenize needs a tokens array');
      }
      return { text: backend.detokenize(request.tokens) };
    }
    case 'shutdown':
      return {};
    default:
      throw new BridgeError('bad-request', `unknown kind ${(request as { kind?: string }).kind}`);
  }
}

export async function serve(
  backend: ModelBackend,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
): Promise<void> {
  const state: ServerState = { contexts: new Map(), nextContext: 1 };
  const rl = createInterface({ input });
  for await (const line of rl) {
    if (!line.trim()) continue;
    let request: Request;
    try {
      request = JSON.parse(line) as Request;
    } catch {
      output.write(
        JSON.stringify({
          id: null,
          ok: false,
          error: { kind: 'bad-request', message: 'request line is not valid JSON' },
        }) + '\n',
      );
      continue;
    }
    const id = request.id ?? null;
    try {
      const reply = handleRequest(request, backend, state);
      output.write(JSON.stringify({ id, ok: true, ...reply }) + '\n');
      if (request.kind === 'shutdown') {
        rl.close();
        return;
      }
    } catch (err) {
      const kind = err instanceof BridgeError ? err.kind : 'internal';
      const message = err instanceof Error ? err.message : String(err);
      output.write(JSON.stringify({ id, ok: false, error: { kind, message } }) + '\n');
    }
  }
}
