"""Shared value types: candidates, fact sets, partition manifests, configs.

Everything here is an immutable value object; instances can be shared freely
across threads. Algorithms live in :mod:`dbdkit.search`, :mod:`dbdkit.diffscore`
and :mod:`dbdkit.metrics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import ValidationError, ZeroNormError

# A token is an opaque non-negative index into a model vocabulary.
TokenId = int

# Hidden states and embeddings are plain tuples of floats; numpy enters only
# inside the numeric modules.
Vector = tuple[float, ...]

IMAGE_KINDS = ("full", "region", "object")
CAPTION_KINDS = ("full", "sentence")


def as_vector(values: Sequence[float]) -> Vector:
    return tuple(float(v) for v in values)


def vdot(a: Vector, b: Vector) -> float:
    return sum(x * y for x, y in zip(a, b))


def vnorm(a: Vector) -> float:
    return math.sqrt(sum(x * x for x in a))


def unit(a: Vector) -> Vector:
    """Scale to unit L2 norm; rejects zero-norm and non-finite input."""
    n = vnorm(a)
    if not math.isfinite(n):
        raise ValidationError("hidden vector has non-finite entries")
    if n == 0.0:
        raise ZeroNormError("cannot normalize a zero-norm vector")
    return tuple(x / n for x in a)


@dataclass(frozen=True)
class Candidate:
    """An in-progress token sequence tracked by the search.

    ``logprob`` is the cumulative natural-log likelihood of ``tokens``.
    ``hiddens`` holds one hidden-state vector per generated token (prompt
    tokens excluded) and ``norm_mean`` is the running mean of the
    unit-normalized hiddens, maintained incrementally so differential scores
    need one dot product per pair.
    """

    tokens: tuple[TokenId, ...] = ()
    logprob: float = 0.0
    hiddens: tuple[Vector, ...] = ()
    norm_mean: Vector = ()
    finished: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "hiddens", tuple(as_vector(h) for h in self.hiddens))
        object.__setattr__(self, "norm_mean", as_vector(self.norm_mean))
        if any(t < 0 for t in self.tokens):
            raise ValidationError("token ids must be non-negative")
        if len(self.hiddens) != len(self.tokens):
            raise ValidationError("need exactly one hidden vector per token")
        if not (math.isfinite(self.logprob) and self.logprob <= 0.0):
            raise ValidationError(f"logprob must be finite and <= 0, got {self.logprob!r}")
        if self.tokens and not self.norm_mean:
            raise ValidationError("non-empty candidate requires norm_mean")
        if not self.tokens and (self.norm_mean or self.finished):
            raise ValidationError("empty candidate cannot be finished or carry norm_mean")

    def __len__(self) -> int:
        return len(self.tokens)

    def extend(self, token: TokenId, logprob: float, hidden: Sequence[float], eos: TokenId) -> "Candidate":
        """Return a new candidate with one more generated token.

        ``logprob`` is the per-token log probability (<= 0); ``eos`` decides
        whether the extended candidate is finished.
        """
        if self.finished:
            raise ValidationError("cannot extend a finished candidate")
        if logprob > 0.0 or not math.isfinite(logprob):
            raise ValidationError(f"per-token logprob must be finite and <= 0, got {logprob!r}")
        hidden_t = as_vector(hidden)
        normalized = unit(hidden_t)
        n = len(self.tokens)
        if n == 0:
            mean = normalized
        else:
            mean = tuple((n * m + u) / (n + 1) for m, u in zip(self.norm_mean, normalized))
        return Candidate(
            tokens=self.tokens + (int(token),),
            logprob=self.logprob + logprob,
            hiddens=self.hiddens + (hidden_t,),
            norm_mean=mean,
            finished=int(token) == int(eos),
        )

    def recompute_norm_mean(self) -> Vector:
        """Mean of unit-normalized hiddens from scratch (audit path)."""
        if not self.hiddens:
            return ()
        units = [unit(h) for h in self.hiddens]
        n = len(units)
        return tuple(sum(col) / n for col in zip(*units))

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "logprob": self.logprob,
            "hiddens": [list(h) for h in self.hiddens],
            "norm_mean": list(self.norm_mean),
            "finished": self.finished,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Candidate":
        return cls(
            tokens=tuple(data["tokens"]),
            logprob=float(data["logprob"]),
            hiddens=tuple(tuple(h) for h in data["hiddens"]),
            norm_mean=tuple(data["norm_mean"]),
            finished=bool(data["finished"]),
        )


EMPTY_CANDIDATE = Candidate()


@dataclass(frozen=True)
class FactSet:
    """Completed unit facts, in completion order (pick order within a step)."""

    facts: tuple[Candidate, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "facts", tuple(self.facts))
        for f in self.facts:
            if not f.finished:
                raise ValidationError("fact sets hold finished candidates only")

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.facts)

    def __getitem__(self, i: int) -> Candidate:
        return self.facts[i]

    def to_dict(self) -> dict:
        return {"facts": [f.to_dict() for f in self.facts]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "FactSet":
        return cls(facts=tuple(Candidate.from_dict(f) for f in data["facts"]))


# --------------------------------------------------------------------------
# Search and selection configuration


@dataclass(frozen=True)
class SearchConfig:
    """Parallel-search parameters.

    ``alpha_schedule`` is a piecewise-constant weight for the differential
    term: a sequence of ``(threshold, value)`` pairs where ``value`` applies
    to steps ``t <= threshold`` and the final pair uses ``None`` as an
    unbounded threshold. Values must be non-negative and non-increasing.
    """

    beams: int
    top_k: int
    alpha_schedule: tuple[tuple[int | None, float], ...] = ((None, 5.0),)
    max_steps: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "alpha_schedule",
            tuple((None if thr is None else int(thr), float(val)) for thr, val in self.alpha_schedule),
        )
        if self.beams < 1 or self.top_k < 1 or self.max_steps < 1:
            raise ValidationError("beams, top_k and max_steps must all be >= 1")
        sched = self.alpha_schedule
        if not sched:
            raise ValidationError("alpha schedule cannot be empty")
        if sched[-1][0] is not None:
            raise ValidationError("alpha schedule must end with an unbounded (None) threshold")
        thresholds = [thr for thr, _ in sched[:-1]]
        if any(thr is None for thr in thresholds):
            raise ValidationError("only the final alpha threshold may be unbounded")
        if any(t2 <= t1 for t1, t2 in zip(thresholds, thresholds[1:])):
            raise ValidationError("alpha thresholds must be strictly increasing")
        if any(thr < 1 for thr in thresholds):
            raise ValidationError("alpha thresholds must be >= 1")
        values = [val for _, val in sched]
        if any(v < 0 for v in values):
            raise ValidationError("alpha values must be >= 0")
        if any(v2 > v1 for v1, v2 in zip(values, values[1:])):
            raise ValidationError("alpha values must be non-increasing over steps")

    def to_dict(self) -> dict:
        return {
            "beams": self.beams,
            "top_k": self.top_k,
            "alpha_schedule": [[thr, val] for thr, val in self.alpha_schedule],
            "max_steps": self.max_steps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SearchConfig":
        return cls(
            beams=int(data["beams"]),
            top_k=int(data["top_k"]),
            alpha_schedule=tuple((thr, val) for thr, val in data["alpha_schedule"]),
            max_steps=int(data["max_steps"]),
            seed=int(data["seed"]),
        )


@dataclass(frozen=True)
class SelectionConfig:
    """Post-search selection parameters: differential weight and fact budget."""

    alpha: float = 5.0
    max_facts: int = 10

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValidationError("selection alpha must be >= 0")
        if self.max_facts < 1:
            raise ValidationError("max_facts must be >= 1")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "max_facts": self.max_facts}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SelectionConfig":
        return cls(alpha=float(data["alpha"]), max_facts=int(data["max_facts"]))


# --------------------------------------------------------------------------
# Partition manifests


@dataclass(frozen=True)
class PartitionEntry:
    """One image or caption partition with its embedding row."""

    id: str
    modality: str  # "image" | "caption"
    kind: str  # image: full|region|object; caption: full|sentence
    embedding_index: int
    bbox: tuple[float, float, float, float] | None = None  # x, y, w, h in pixels
    span: tuple[int, int] | None = None  # [start, end) character span

    def __post_init__(self) -> None:
        if self.modality not in ("image", "caption"):
            raise ValidationError(f"unknown modality {self.modality!r}")
        if self.bbox is not None:
            object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        if self.span is not None:
            object.__setattr__(self, "span", tuple(int(v) for v in self.span))

    def to_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "modality": self.modality,
            "kind": self.kind,
            "embedding_index": self.embedding_index,
        }
        if self.bbox is not None:
            out["bbox"] = list(self.bbox)
        if self.span is not None:
            out["span"] = list(self.span)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "PartitionEntry":
        return cls(
            id=str(data["id"]),
            modality=str(data["modality"]),
            kind=str(data["kind"]),
            embedding_index=int(data["embedding_index"]),
            bbox=tuple(data["bbox"]) if data.get("bbox") is not None else None,
            span=tuple(data["span"]) if data.get("span") is not None else None,
        )


@dataclass(frozen=True)
class PartitionManifest:
    """Partition entries plus optional declared dim and image dimensions."""

    entries: tuple[PartitionEntry, ...]
    dim: int | None = None
    image_dims: tuple[int, int] | None = None
    item: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.image_dims is not None:
            object.__setattr__(self, "image_dims", tuple(int(v) for v in self.image_dims))

    def by_modality(self, modality: str) -> tuple[PartitionEntry, ...]:
        return tuple(e for e in self.entries if e.modality == modality)

    def to_dict(self) -> dict:
        out: dict = {"entries": [e.to_dict() for e in self.entries]}
        if self.dim is not None:
            out["dim"] = self.dim
        if self.image_dims is not None:
            out["image_width"], out["image_height"] = self.image_dims
        if self.item is not None:
            out["item"] = self.item
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "PartitionManifest":
        dims = None
        if data.get("image_width") is not None and data.get("image_height") is not None:
            dims = (int(data["image_width"]), int(data["image_height"]))
        return cls(
            entries=tuple(PartitionEntry.from_dict(e) for e in data["entries"]),
            dim=int(data["dim"]) if data.get("dim") is not None else None,
            image_dims=dims,
            item=data.get("item"),
        )


def merge_manifests(*manifests: PartitionManifest) -> PartitionManifest:
    """Concatenate per-side manifests (e.g. image side + caption side)."""
    entries: list[PartitionEntry] = []
    dim = None
    image_dims = None
    item = None
    for m in manifests:
        entries.extend(m.entries)
        dim = dim if dim is not None else m.dim
        image_dims = image_dims if image_dims is not None else m.image_dims
        item = item if item is not None else m.item
        if m.dim is not None and dim is not None and m.dim != dim:
            raise ValidationError(f"manifests declare conflicting dims {dim} and {m.dim}")
    return PartitionManifest(entries=tuple(entries), dim=dim, image_dims=image_dims, item=item)


@dataclass(frozen=True)
class Violation:
    """A manifest rule breach. Violations are data, not exceptions."""

    rule: str
    entries: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        where = ", ".join(self.entries) if self.entries else "<manifest>"
        return f"[{self.rule}] {where}: {self.message}"


def validate_manifest(
    manifest: PartitionManifest,
    image_dims: tuple[int, int] | None = None,
    embedding_counts: Mapping[str, int] | None = None,
) -> list[Violation]:
    """Check every manifest invariant; returns an empty list iff all hold.

    ``image_dims`` falls back to the manifest's own declaration; bbox bound
    checks are skipped when neither is available. ``embedding_counts`` maps
    modality to the row count of the corresponding embedding set.
    """
    violations: list[Violation] = []
    dims = image_dims if image_dims is not None else manifest.image_dims

    seen_index: dict[tuple[str, int], list[str]] = {}
    full_entries: dict[str, list[str]] = {}
    for e in manifest.entries:
        seen_index.setdefault((e.modality, e.embedding_index), []).append(e.id)
        if e.kind == "full":
            full_entries.setdefault(e.modality, []).append(e.id)

        allowed = IMAGE_KINDS if e.modality == "image" else CAPTION_KINDS
        if e.kind not in allowed:
            violations.append(Violation(
                "kind-modality", (e.id,),
                f"kind {e.kind!r} is not valid for modality {e.modality!r}",
            ))
            continue

        if e.modality == "image":
            if e.bbox is None:
                violations.append(Violation("missing-source", (e.id,), "image entry has no bbox"))
            else:
                x, y, w, h = e.bbox
                if w <= 0 or h <= 0:
                    violations.append(Violation("bad-bbox", (e.id,), f"non-positive bbox size {e.bbox}"))
                elif dims is not None:
                    iw, ih = dims
                    if x < 0 or y < 0 or x + w > iw or y + h > ih:
                        violations.append(Violation(
                            "bbox-bounds", (e.id,),
                            f"bbox {e.bbox} exceeds image dimensions {iw}x{ih}",
                        ))
        else:
            if e.span is None:
                violations.append(Violation("missing-source", (e.id,), "caption entry has no char span"))
            else:
                start, end = e.span
                if start < 0 or end <= start:
                    violations.append(Violation("bad-span", (e.id,), f"invalid char span {e.span}"))

        if embedding_counts is not None and e.modality in embedding_counts:
            count = embedding_counts[e.modality]
            if not (0 <= e.embedding_index < count):
                violations.append(Violation(
                    "embedding-index-bounds", (e.id,),
                    f"embedding_index {e.embedding_index} outside [0, {count})",
                ))

    for (modality, index), ids in seen_index.items():
        if len(ids) > 1:
            violations.append(Violation(
                "duplicate-embedding-index", tuple(ids),
                f"embedding_index {index} reused within modality {modality!r}",
            ))

    for modality in ("image", "caption"):
        present = [e for e in manifest.entries if e.modality == modality]
        if not present:
            continue
        fulls = full_entries.get(modality, [])
        if not fulls:
            violations.append(Violation(
                "missing-full", (), f"modality {modality!r} has no kind=full entry",
            ))
        elif len(fulls) > 1:
            violations.append(Violation(
                "multiple-full", tuple(fulls), f"modality {modality!r} has {len(fulls)} kind=full entries",
            ))

    return violations
