/**
 * Model backends served over the bridge protocol.
 *
 * `DeterministicBackend` is a self-contained stand-in: next-token scores and
 * hidden states are derived from a SHA-256 stream keyed by the context
 * (model id, prompt, image path) and the generated tokens, so every response
 * is a pure function of its inputs. A real vision-language model adapter
 * implements the same interface and dispatches on `model_id`.
 */

import { createHash } from 'node:crypto';

import { BridgeError } from './protocol.js';

export interface ExpandResult {
  tokens: number[];
  logprobs: number[];
  hiddens: number[][];
}

export interface ModelBackend {
  readonly vocab: number;
  readonly eos: number;
  readonly dH: number;
  contextSeed(modelId: string, prompt: string, imagePath: string | null): string;
  expand(seed: string, tokens: number[], k: number): ExpandResult;
  detokenize(tokens: number[]): string;
}

/** Uniform value in [0, 1) derived from the SHA-256 of the joined parts. */
export function hashUnit(...parts: Array<string | number>): number {
  const digest = createHash('sha256').update(parts.join('')).digest();
  return digest.readUIntBE(0, 6) / 2 ** 48;
}

function logSumExp(values: number[]): number {
  const top = Math.max(...values);
  let total = 0;
  for (const v of values) total += Math.exp(v - top);
  return top + Math.log(total);
}

export class DeterministicBackend implements ModelBackend {
  readonly vocab = 32;
  readonly eos = 0;
  readonly dH = 16;

  contextSeed(modelId: string, prompt: string, imagePath: string | null): string {
    return createHash('sha256')
      .update([modelId, prompt, imagePath ?? ''].join(''))
      .digest('hex');
  }

  expand(seed: string, tokens: number[], k: number): ExpandResult {
    if (!Number.isInteger(k) || k < 1) {
      throw new BridgeError('bad-request', `K must be a positive integer, got ${k}`);
    }
    for (const t of tokens) {
      if (!Number.isInteger(t) || t < 0 || t >= this.vocab) {
        throw new BridgeError('token-out-of-vocab', `token ${t} outside vocabulary of ${this.vocab}`);
      }
    }
    const history = tokens.join(',');
    const logits: number[] = [];
    for (let t = 0; t < this.vocab; t++) {
      let logit = 3.0 * hashUnit(seed, history, t);
      // nudge sequences toward termination as they grow
      if (t === this.eos) logit += 0.2 * tokens.length;
      logits.push(logit);
    }
    const logZ = logSumExp(logits);
    const order = Array.from({ length: this.vocab }, (_, t) => t).sort((a, b) => {
      if (logits[a] !== logits[b]) return logits[b] - logits[a];
      return a - b;
    });
    const chosen = order.slice(0, Math.min(k, this.vocab));
    return {
      tokens: chosen,
      logprobs: chosen.map((t) => logits[t] - logZ),
      hiddens: chosen.map((t) => this.hidden(t)),
    };
  }

  hidden(token: number): number[] {
    const values: number[] = [];
    for (let j = 0; j < this.dH; j++) {
      values.push(2 * hashUnit('hidden', token, j) - 1);
    }
    return values;
  }

  detokenize(tokens: number[]): string {
    return tokens
      .filter((t) => t !== this.eos)
      .map((t) => `t${t}`)
      .join(' ');
  }
}
