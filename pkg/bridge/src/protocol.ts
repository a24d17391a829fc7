/**
 * Wire protocol types for the line-delimited JSON bridge.
 *
 * One request per line on stdin, one response per line on stdout. Every
 * response echoes the request's correlation `id`. Floats cross the wire in
 * decimal with 9 significant digits; bulk embedding payloads go through the
 * binary embedding file instead.
 */

export type ErrorKind =
  | 'bad-request'
  | 'context-mismatch'
  | 'token-out-of-vocab'
  | 'internal';

export class BridgeError extends Error {
  constructor(public readonly kind: ErrorKind, message: string) {
    super(message);
  }
}

export interface InitRequest {
  id: number;
  kind: 'init';
  model_id?: string;
  prompt?: string;
  image_path?: string | null;
}

export interface ExpandRequest {
  id: number;
  kind: 'expand';
  context_id: string;
  tokens: number[];
  K: number;
}

export interface DetokenizeRequest {
  id: number;
  kind: 'detokenize';
  tokens: number[];
}

export interface ShutdownRequest {
  id: number;
  kind: 'shutdown';
}

export type Request = InitRequest | ExpandRequest | DetokenizeRequest | ShutdownRequest;

/** Round a float to 9 significant decimal digits for the wire. */
export function wireFloat(x: number): number {
  return Number(x.toPrecision(9));
}
