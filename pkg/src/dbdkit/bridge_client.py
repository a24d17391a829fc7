"""Client for an out-of-process model bridge speaking line-delimited JSON.

The bridge is any executable that reads one JSON request per line on stdin
and writes one JSON response per line on stdout. Requests carry a
correlation ``id`` the response must echo. Request kinds:

    {"id": 1, "kind": "init", "model_id": "...", "prompt": "...", "image_path": null}
        -> {"id": 1, "ok": true, "context_id": "...", "d_h": 16,
            "vocab": 32, "eos": 0, "concurrent": false}
    {"id": 2, "kind": "expand", "context_id": "...", "tokens": [..], "K": 4}
        -> {"id": 2, "ok": true, "tokens": [..], "logprobs": [..], "hiddens": [[..], ..]}
    {"id": 3, "kind": "detokenize", "tokens": [..]}
        -> {"id": 3, "ok": true, "text": "..."}
    {"id": 4, "kind": "shutdown"} -> {"id": 4, "ok": true}

Failures come back as {"ok": false, "error": {"kind": ..., "message": ...}}.
Expand responses must be sorted by logprob descending with ties broken by
ascending token id; the client re-validates this. Calls are strictly
serialized unless the bridge declares ``concurrent: true`` at init.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
from typing import Sequence

from .core import Candidate, TokenId
from .errors import (
    BridgeProtocolError,
    ContextMismatchError,
    ModelError,
    ModelUnavailableError,
    OutOfVocabError,
)
from .models import Expansion, ExpansionItem, GenerativeModel, ModelContext

BRIDGE_CMD_ENV = "DBD_BRIDGE_CMD"

_ERROR_KINDS = {
    "context-mismatch": ContextMismatchError,
    "token-out-of-vocab": OutOfVocabError,
    "model-unavailable": ModelUnavailableError,
}


def bridge_command_from_env() -> list[str]:
    cmd = os.environ.get(BRIDGE_CMD_ENV, "").strip()
    if not cmd:
        raise ModelUnavailableError(
            f"no bridge command: set {BRIDGE_CMD_ENV} or pass one explicitly"
        )
    return shlex.split(cmd)


class BridgeContext(ModelContext):
    def __init__(self, owner, prompt, image, context_id: str):
        super().__init__(owner, prompt, image)
        self.context_id = context_id


class BridgeModel(GenerativeModel):
    """Generative model served by a bridge subprocess."""

    allows_concurrent_expand = False
    accepts_long_prompts = True

    def __init__(self, command: Sequence[str] | None = None, model_id: str = "default"):
        self.command = list(command) if command is not None else bridge_command_from_env()
        self.model_id = model_id
        self._next_id = 1
        self._vocab: int | None = None
        self._eos: int | None = None
        self._d_h: int | None = None
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ModelUnavailableError(f"cannot spawn bridge {self.command!r}: {exc}") from exc

    # -- wire plumbing ------------------------------------------------------

    def _request(self, payload: dict) -> dict:
        if self._proc.poll() is not None:
            raise ModelUnavailableError(f"bridge exited with code {self._proc.returncode}")
        request_id = self._next_id
        self._next_id += 1
        payload = {"id": request_id, **payload}
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ModelUnavailableError(f"bridge pipe broke: {exc}") from exc
        if not line:
            raise ModelUnavailableError("bridge closed its stdout (process died?)")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"bridge sent invalid JSON: {line!r}") from exc
        if response.get("id") != request_id:
            raise BridgeProtocolError(
                f"correlation id mismatch: sent {request_id}, got {response.get('id')!r}"
            )
        if not response.get("ok"):
            err = response.get("error") or {}
            kind = err.get("kind", "unknown")
            message = err.get("message", "no message")
            raise _ERROR_KINDS.get(kind, ModelError)(f"bridge error [{kind}]: {message}")
        return response

    # -- model surface ------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        if self._vocab is None:
            raise ModelError("bridge properties unknown before the first open_context")
        return self._vocab

    @property
    def eos_token(self) -> TokenId:
        if self._eos is None:
            raise ModelError("bridge properties unknown before the first open_context")
        return self._eos

    @property
    def hidden_dim(self) -> int:
        if self._d_h is None:
            raise ModelError("bridge properties unknown before the first open_context")
        return self._d_h

    def open_context(self, prompt: str, image: str | None = None) -> BridgeContext:
        response = self._request({
            "kind": "init",
            "model_id": self.model_id,
            "prompt": prompt,
            "image_path": image,
        })
        for field in ("context_id", "d_h", "vocab", "eos"):
            if field not in response:
                raise BridgeProtocolError(f"init response missing {field!r}")
        vocab, eos, d_h = int(response["vocab"]), int(response["eos"]), int(response["d_h"])
        if self._vocab is not None and (vocab, eos, d_h) != (self._vocab, self._eos, self._d_h):
            raise BridgeProtocolError("bridge changed vocab/eos/d_h between contexts")
        self._vocab, self._eos, self._d_h = vocab, eos, d_h
        return BridgeContext(self, prompt, image, str(response["context_id"]))

    def expand(self, context: ModelContext, candidate: Candidate, k: int) -> Expansion:
        self._check_context(context)
        if not isinstance(context, BridgeContext):
            raise ContextMismatchError("expected a bridge context")
        if candidate.finished:
            raise ModelError("cannot expand a finished candidate")
        response = self._request({
            "kind": "expand",
            "context_id": context.context_id,
            "tokens": list(candidate.tokens),
            "K": int(k),
        })
        tokens = response.get("tokens")
        logprobs = response.get("logprobs")
        hiddens = response.get("hiddens")
        if not (isinstance(tokens, list) and isinstance(logprobs, list) and isinstance(hiddens, list)):
            raise BridgeProtocolError("expand response missing tokens/logprobs/hiddens")
        if not (len(tokens) == len(logprobs) == len(hiddens)):
            raise BridgeProtocolError("expand response arrays disagree in length")
        try:
            items = tuple(
                ExpansionItem(token=int(t), logprob=float(lp), hidden=tuple(h))
                for t, lp, h in zip(tokens, logprobs, hiddens)
            )
            expansion = Expansion(items=items)
        except Exception as exc:
            raise BridgeProtocolError(f"expand response violates ordering or value rules: {exc}") from exc
        if any(len(item.hidden) != self.hidden_dim for item in expansion):
            raise BridgeProtocolError("expand hidden width disagrees with declared d_h")
        return expansion

    def detokenize(self, tokens: Sequence[TokenId]) -> str:
        response = self._request({"kind": "detokenize", "tokens": [int(t) for t in tokens]})
        if "text" not in response:
            raise BridgeProtocolError("detokenize response missing text")
        return str(response["text"])

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._request({"kind": "shutdown"})
            except ModelError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._proc.stdin:
            self._proc.stdin.close()
        if self._proc.stdout:
            self._proc.stdout.close()
