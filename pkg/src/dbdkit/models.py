"""Generative-model contract plus a deterministic toy model for exact testing.

A model maps (image, prompt, generated tokens) to a ranked expansion of next
tokens. Each expansion item already carries the hidden-state vector the model
would assign to the appended token, so the search never needs a second pass
to score diversity. Implementations declare whether concurrent ``expand``
calls are allowed; the toy model is a pure function of its inputs and permits
them.
"""

from __future__ import annotations

import itertools
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import Candidate, TokenId, Vector, as_vector, vnorm
from .errors import ContextMismatchError, OutOfVocabError, ValidationError

DIST_TOL = 1e-9  # conditional distributions must sum to 1 within this


@dataclass(frozen=True)
class ExpansionItem:
    token: TokenId
    logprob: float
    hidden: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", as_vector(self.hidden))
        if not (math.isfinite(self.logprob) and self.logprob <= 0.0):
            raise ValidationError(f"expansion logprob must be finite and <= 0, got {self.logprob!r}")


@dataclass(frozen=True)
class Expansion:
    """Top-K next tokens, sorted by logprob descending, ties by ascending id."""

    items: tuple[ExpansionItem, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        for a, b in zip(self.items, self.items[1:]):
            if b.logprob > a.logprob or (b.logprob == a.logprob and b.token <= a.token):
                raise ValidationError("expansion items must be sorted by (logprob desc, token asc)")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


class ModelContext:
    """Handle for one (prompt, image) conditioning; issued by a model."""

    _ids = itertools.count(1)

    def __init__(self, owner: "GenerativeModel", prompt: str, image: str | None = None):
        self.owner = owner
        self.prompt = prompt
        self.image = image
        self.context_id = f"ctx-{next(self._ids)}"


class GenerativeModel(ABC):
    """Abstract next-token model used by the decoding engine."""

    #: whether expand() may be called from multiple threads at once
    allows_concurrent_expand: bool = False
    #: whether open_context accepts arbitrarily long rendered prompts
    #: (the toy model does not; summarization then falls back to concatenation)
    accepts_long_prompts: bool = False

    @property
    @abstractmethod
    def vocab_size(self) -> int: ...

    @property
    @abstractmethod
    def eos_token(self) -> TokenId: ...

    @property
    @abstractmethod
    def hidden_dim(self) -> int: ...

    @abstractmethod
    def open_context(self, prompt: str, image: str | None = None) -> ModelContext: ...

    @abstractmethod
    def expand(self, context: ModelContext, candidate: Candidate, k: int) -> Expansion:
        """Top-k next tokens for ``candidate`` under ``context``; deterministic."""

    @abstractmethod
    def detokenize(self, tokens: Sequence[TokenId]) -> str: ...

    def close(self) -> None:  # pragma: no cover - default no-op
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _check_context(self, context: ModelContext) -> None:
        if context.owner is not self:
            raise ContextMismatchError("context was opened by a different model instance")


def sequence_logprob(candidate: Candidate) -> float:
    """Sentence-level log-likelihood: the sum accumulated during construction."""
    return candidate.logprob


# --------------------------------------------------------------------------
# Toy model


@dataclass(frozen=True)
class ToyModelSpec:
    """A desk-scale Markov stand-in for a vision-language model.

    ``transitions`` maps a context (the last ``order`` generated tokens, or a
    shorter suffix near the start) to a probability distribution over the
    vocabulary. Lookup backs off to shorter suffixes, so the empty context
    ``()`` is always required. ``hiddens`` assigns one fixed nonzero vector
    per token id.
    """

    vocab_size: int
    eos: TokenId
    order: int
    hidden_dim: int
    transitions: Mapping[tuple[TokenId, ...], tuple[float, ...]]
    hiddens: tuple[Vector, ...]
    token_text: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", {
            tuple(int(t) for t in ctx): tuple(float(p) for p in dist)
            for ctx, dist in self.transitions.items()
        })
        object.__setattr__(self, "hiddens", tuple(as_vector(h) for h in self.hiddens))
        if self.token_text is not None:
            object.__setattr__(self, "token_text", tuple(str(s) for s in self.token_text))

        if self.vocab_size < 1:
            raise ValidationError("vocab_size must be >= 1")
        if not (0 <= self.eos < self.vocab_size):
            raise ValidationError("eos must be a valid token id")
        if self.order not in (0, 1, 2):
            raise ValidationError("order must be 0, 1 or 2")
        if () not in self.transitions:
            raise ValidationError("transitions must include the empty context ()")
        for ctx, dist in self.transitions.items():
            if len(ctx) > self.order:
                raise ValidationError(f"context {ctx} longer than order {self.order}")
            if any(not (0 <= t < self.vocab_size) for t in ctx):
                raise ValidationError(f"context {ctx} contains out-of-vocab tokens")
            if len(dist) != self.vocab_size:
                raise ValidationError(f"distribution for {ctx} has {len(dist)} entries, want {self.vocab_size}")
            if any(p < 0 or not math.isfinite(p) for p in dist):
                raise ValidationError(f"distribution for {ctx} has negative or non-finite mass")
            if abs(sum(dist) - 1.0) > DIST_TOL:
                raise ValidationError(f"distribution for {ctx} sums to {sum(dist)!r}, not 1")
        if len(self.hiddens) != self.vocab_size:
            raise ValidationError("need one hidden vector per token")
        for t, h in enumerate(self.hiddens):
            if len(h) != self.hidden_dim:
                raise ValidationError(f"hidden for token {t} has length {len(h)}, want {self.hidden_dim}")
            if vnorm(h) == 0.0:
                raise ValidationError(f"hidden for token {t} is the zero vector")
        if self.token_text is not None and len(self.token_text) != self.vocab_size:
            raise ValidationError("token_text must cover the whole vocabulary")

    def text_of(self, token: TokenId) -> str:
        if self.token_text is not None:
            return self.token_text[token]
        return str(token)

    def distribution(self, history: Sequence[TokenId]) -> tuple[float, ...]:
        """Conditional distribution after ``history``, with suffix backoff."""
        history = tuple(int(t) for t in history)
        if any(not (0 <= t < self.vocab_size) for t in history):
            raise OutOfVocabError(f"history {history} contains out-of-vocab tokens")
        depth = min(self.order, len(history))
        for take in range(depth, -1, -1):
            ctx = history[len(history) - take:]
            if ctx in self.transitions:
                return self.transitions[ctx]
        raise AssertionError("unreachable: empty context is always present")

    def to_dict(self) -> dict:
        out: dict = {
            "vocab_size": self.vocab_size,
            "eos": self.eos,
            "order": self.order,
            "hidden_dim": self.hidden_dim,
            "transitions": {
                ",".join(str(t) for t in ctx): list(dist)
                for ctx, dist in sorted(self.transitions.items())
            },
            "hiddens": [list(h) for h in self.hiddens],
        }
        if self.token_text is not None:
            out["token_text"] = list(self.token_text)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ToyModelSpec":
        transitions = {}
        for key, dist in data["transitions"].items():
            ctx = tuple(int(t) for t in key.split(",")) if key else ()
            transitions[ctx] = tuple(dist)
        return cls(
            vocab_size=int(data["vocab_size"]),
            eos=int(data["eos"]),
            order=int(data["order"]),
            hidden_dim=int(data["hidden_dim"]),
            transitions=transitions,
            hiddens=tuple(tuple(h) for h in data["hiddens"]),
            token_text=tuple(data["token_text"]) if data.get("token_text") else None,
        )


def load_toy_spec(path: str | Path) -> ToyModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return ToyModelSpec.from_dict(json.load(fh))


def save_toy_spec(spec: ToyModelSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def toy_expand(spec: ToyModelSpec, candidate: Candidate, k: int) -> Expansion:
    """Top-k expansion against the transition table.

    Ties between equal log probabilities break by ascending token id.
    Zero-probability tokens never appear (their log likelihood is -inf).
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if candidate.finished:
        raise ValidationError("cannot expand a finished candidate")
    dist = spec.distribution(candidate.tokens)
    ranked = sorted(
        (t for t in range(spec.vocab_size) if dist[t] > 0.0),
        key=lambda t: (-dist[t], t),
    )
    items = tuple(
        ExpansionItem(token=t, logprob=min(math.log(dist[t]), 0.0), hidden=spec.hiddens[t])
        for t in ranked[:k]
    )
    return Expansion(items=items)


class ToyModel(GenerativeModel):
    """In-process deterministic model backed by a :class:`ToyModelSpec`."""

    allows_concurrent_expand = True
    accepts_long_prompts = False

    def __init__(self, spec: ToyModelSpec):
        self.spec = spec

    @property
    def vocab_size(self) -> int:
        return self.spec.vocab_size

    @property
    def eos_token(self) -> TokenId:
        return self.spec.eos

    @property
    def hidden_dim(self) -> int:
        return self.spec.hidden_dim

    def open_context(self, prompt: str, image: str | None = None) -> ModelContext:
        return ModelContext(self, prompt, image)

    def expand(self, context: ModelContext, candidate: Candidate, k: int) -> Expansion:
        self._check_context(context)
        return toy_expand(self.spec, candidate, k)

    def detokenize(self, tokens: Sequence[TokenId]) -> str:
        words = [self.spec.text_of(t) for t in tokens if t != self.spec.eos]
        return " ".join(w for w in words if w)


def random_toy_spec(
    vocab_size: int = 8,
    hidden_dim: int = 4,
    order: int = 1,
    seed: int = 0,
    eos_floor: float = 0.1,
    rng: np.random.Generator | None = None,
) -> ToyModelSpec:
    """Sample a valid toy spec; used by the selfcheck suite and tests.

    ``eos_floor`` mixes a minimum amount of end-of-sequence mass into every
    distribution so that greedy chains terminate quickly.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    eos = int(rng.integers(0, vocab_size))

    def sample_dist() -> tuple[float, ...]:
        p = rng.dirichlet(np.ones(vocab_size))
        p = (1.0 - eos_floor) * p
        p[eos] += eos_floor
        p = p / p.sum()
        return tuple(float(x) for x in p)

    contexts: list[tuple[int, ...]] = [()]
    if order >= 1:
        contexts += [(t,) for t in range(vocab_size)]
    if order >= 2:
        contexts += [(a, b) for a in range(vocab_size) for b in range(vocab_size)]
    transitions = {ctx: sample_dist() for ctx in contexts}

    hiddens = []
    for _ in range(vocab_size):
        h = rng.normal(size=hidden_dim)
        while float(np.linalg.norm(h)) < 1e-3:
            h = rng.normal(size=hidden_dim)
        hiddens.append(tuple(float(x) for x in h))

    return ToyModelSpec(
        vocab_size=vocab_size,
        eos=eos,
        order=order,
        hidden_dim=hidden_dim,
        transitions=transitions,
        hiddens=tuple(hiddens),
    )


def greedy_decode(model: GenerativeModel, context: ModelContext, max_steps: int) -> Candidate:
    """Follow the single highest-probability token until EOS or ``max_steps``."""
    cand = Candidate()
    for _ in range(max_steps):
        item = model.expand(context, cand, 1).items[0]
        cand = cand.extend(item.token, item.logprob, item.hidden, model.eos_token)
        if cand.finished:
            break
    return cand
