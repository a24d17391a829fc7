"""Partition-based caption metrics: PLR and CLIP-Recall / -Precision / -F1.

The proportion of linear representation (PLR) of an embedding ``a`` by a set
``B`` at parameter ``k`` is

    PLR_k(a; B) = |B_k w*| / |a|,   w* = argmin_w |B_k w - a|

where the columns of ``B_k`` are the min(k, |B|) members of ``B`` most
cosine-similar to ``a``. The returned value equals the norm ratio of the
orthogonal projection of ``a`` onto span(B_k), so it lies in [0, 1], is
invariant to positive rescaling of ``a`` or any member of ``B``, and at
k = 1 reduces to |cos(a, b_top)|.

CLIP-Recall averages PLR of every image partition over the caption
partitions (how much of the image the caption explains); CLIP-Precision is
the mirror image, averaged over the caption partitions; CLIP-F1 is their
harmonic mean. Embeddings arrive precomputed; no encoder runs here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import PartitionManifest, validate_manifest
from .errors import ManifestError, ValidationError, ZeroNormError

DEFAULT_KS = (3, 5, 10)

_RANGE_TOL = 1e-9


def _as_matrix(vectors) -> np.ndarray:
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("embedding set must be a non-empty 2-d array")
    return m


def top_k_similar(a: Sequence[float], B, k: int) -> list[int]:
    """Indices of the min(k, |B|) rows of B most cosine-similar to ``a``.

    Sorted by similarity descending, ties by ascending index, so the result
    for ``k`` is always a prefix of the result for ``k + 1``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    a = np.asarray(a, dtype=np.float64)
    m = _as_matrix(B)
    a_norm = np.linalg.norm(a)
    row_norms = np.linalg.norm(m, axis=1)
    if a_norm == 0.0 or np.any(row_norms == 0.0):
        raise ZeroNormError("cosine similarity undefined for zero-norm vectors")
    cos = (m @ a) / (row_norms * a_norm)
    order = sorted(range(len(m)), key=lambda i: (-cos[i], i))
    return order[: min(k, len(m))]


def plr(a: Sequence[float], B, k: int) -> float:
    """Proportion of top-k-similar linear representation of ``a`` by ``B``."""
    a = np.asarray(a, dtype=np.float64)
    m = _as_matrix(B)
    idx = top_k_similar(a, m, k)
    bk = m[idx].T  # one column per selected embedding
    # SVD-backed least squares: rank-revealing, minimum-norm w on deficiency.
    w, *_ = np.linalg.lstsq(bk, a, rcond=None)
    return float(np.linalg.norm(bk @ w) / np.linalg.norm(a))


def clip_recall(image_set, caption_set, k: int) -> float:
    """Mean PLR of each image partition over the caption partitions."""
    v = _as_matrix(image_set)
    y = _as_matrix(caption_set)
    return float(sum(plr(row, y, k) for row in v) / len(v))


def clip_precision(image_set, caption_set, k: int) -> float:
    """Mean PLR of each caption partition over the image partitions."""
    v = _as_matrix(image_set)
    y = _as_matrix(caption_set)
    return float(sum(plr(row, v, k) for row in y) / len(y))


def clip_f1(recall: float, precision: float) -> float:
    """Harmonic mean of recall and precision; 0 when both are 0."""
    if recall + precision == 0.0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)


@dataclass(frozen=True)
class KScores:
    recall: float
    precision: float
    f1: float

    def __post_init__(self) -> None:
        for name, v in (("recall", self.recall), ("precision", self.precision), ("f1", self.f1)):
            if not (-_RANGE_TOL <= v <= 1.0 + _RANGE_TOL):
                raise ValidationError(f"{name} value {v!r} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"recall": self.recall, "precision": self.precision, "f1": self.f1}


@dataclass(frozen=True)
class MetricReport:
    """Per-k metric triples plus the per-partition PLR values behind them."""

    per_k: Mapping[int, KScores]
    per_partition: Mapping[tuple[int, str], float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_k", dict(self.per_k))
        object.__setattr__(self, "per_partition", dict(self.per_partition))
        for (_, pid), v in self.per_partition.items():
            if not (-_RANGE_TOL <= v <= 1.0 + _RANGE_TOL):
                raise ValidationError(f"PLR for partition {pid!r} is {v!r}, outside [0, 1]")

    def ks(self) -> list[int]:
        return list(self.per_k)

    def to_dict(self) -> dict:
        per_part: dict[str, dict[str, float]] = {}
        for (k, pid), v in self.per_partition.items():
            per_part.setdefault(str(k), {})[pid] = v
        return {
            "per_k": {str(k): s.to_dict() for k, s in self.per_k.items()},
            "per_partition": per_part,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricReport":
        per_k = {
            int(k): KScores(recall=s["recall"], precision=s["precision"], f1=s["f1"])
            for k, s in data["per_k"].items()
        }
        per_partition = {
            (int(k), pid): float(v)
            for k, parts in data["per_partition"].items()
            for pid, v in parts.items()
        }
        return cls(per_k=per_k, per_partition=per_partition)


def evaluate(
    image_set,
    caption_set,
    manifest: PartitionManifest,
    ks: Sequence[int] = DEFAULT_KS,
) -> MetricReport:
    """Score a caption against an image over every requested ``k``.

    The manifest must validate against both embedding sets; its entries tie
    partition ids to embedding rows. Summation follows the manifest's entry
    order, so results do not depend on any scheduling.
    """
    v = _as_matrix(image_set)
    y = _as_matrix(caption_set)
    if v.shape[1] != y.shape[1]:
        raise ValidationError(f"embedding dims differ: image {v.shape[1]} vs caption {y.shape[1]}")
    violations = validate_manifest(
        manifest, embedding_counts={"image": len(v), "caption": len(y)}
    )
    if manifest.dim is not None and manifest.dim != v.shape[1]:
        raise ValidationError(
            f"manifest declares dim {manifest.dim} but embeddings have dim {v.shape[1]}"
        )
    if violations:
        raise ManifestError(violations)

    image_entries = manifest.by_modality("image")
    caption_entries = manifest.by_modality("caption")
    if not image_entries or not caption_entries:
        raise ValidationError("manifest must cover both an image side and a caption side")

    # Partition pools in embedding-row order, restricted to referenced rows.
    v_pool = v[sorted(e.embedding_index for e in image_entries)]
    y_pool = y[sorted(e.embedding_index for e in caption_entries)]

    ks = list(dict.fromkeys(int(k) for k in ks))
    per_k: dict[int, KScores] = {}
    per_partition: dict[tuple[int, str], float] = {}
    for k in ks:
        recall_vals = []
        for e in image_entries:
            val = plr(v[e.embedding_index], y_pool, k)
            per_partition[(k, e.id)] = val
            recall_vals.append(val)
        precision_vals = []
        for e in caption_entries:
            val = plr(y[e.embedding_index], v_pool, k)
            per_partition[(k, e.id)] = val
            precision_vals.append(val)
        recall = sum(recall_vals) / len(recall_vals)
        precision = sum(precision_vals) / len(precision_vals)
        per_k[k] = KScores(recall=recall, precision=precision, f1=clip_f1(recall, precision))
    return MetricReport(per_k=per_k, per_partition=per_partition)
