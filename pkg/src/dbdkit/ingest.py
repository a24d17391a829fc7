"""Embedding file I/O, partition construction, and the position/size profile.

Embedding files are binary: a 14-byte little-endian header
``magic "DBDE" | version u16 | dim u32 | count u32`` followed by
``count * dim`` little-endian float32 values, row-major. Round trips are
bit-exact. Each file travels with a JSON sidecar manifest describing the
partitions (see :class:`dbdkit.core.PartitionManifest`).

Region annotations follow a small JSON schema mirroring dense-region
datasets: per image, a list of region boxes and a list of object boxes, each
with a bbox ``[x, y, w, h]`` in pixels and one or more object names. A
best-effort converter from the Visual Genome export lives in
``scripts/convert_vg_annotations.py``.
"""

from __future__ import annotations

import json
import string
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import PartitionEntry, PartitionManifest
from .errors import EmbeddingFileError, ValidationError

MAGIC = b"DBDE"
VERSION = 1
_HEADER = struct.Struct("<4sHII")

Span = tuple[int, int]


# --------------------------------------------------------------------------
# Embedding files


def write_embeddings(vectors, path: str | Path) -> None:
    """Write a (count, dim) array as an embedding file; values stored float32."""
    m = np.ascontiguousarray(vectors, dtype="<f4")
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {m.shape}")
    count, dim = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, count))
        fh.write(m.tobytes())


def read_embeddings(path: str | Path) -> np.ndarray:
    """Read an embedding file back into a float32 (count, dim) array.

    Any header/payload inconsistency is rejected before data is returned.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFileError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, dim, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise EmbeddingFileError(f"{path}: unsupported version {version}")
    payload = raw[_HEADER.size:]
    expected = 4 * dim * count
    if len(payload) != expected:
        raise EmbeddingFileError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(count, dim).copy()


def write_manifest(manifest: PartitionManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str | Path) -> PartitionManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return PartitionManifest.from_dict(json.load(fh))


def sidecar_path(embedding_path: str | Path) -> Path:
    """Conventional manifest location next to an embedding file."""
    p = Path(embedding_path)
    return p.with_suffix(p.suffix + ".manifest.json")


# --------------------------------------------------------------------------
# Caption segmentation


def _trimmed_span(text: str, start: int, end: int) -> Span | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start == end:
        return None
    return (start, end)


def segment_caption(text: str) -> list[tuple[Span, str]]:
    """Split a caption into sentences plus the full caption as final element.

    Sentences end at '.', '?' or '!' followed by whitespace or end-of-text;
    segments are trimmed and empty ones dropped. Spans index the original
    string.
    """
    if not text:
        raise ValueError("caption text must be non-empty")
    pieces: list[tuple[Span, str]] = []
    start = 0
    for i, ch in enumerate(text):
        if ch in ".?!" and (i + 1 == len(text) or text[i + 1].isspace()):
            span = _trimmed_span(text, start, i + 1)
            if span is not None:
                pieces.append((span, text[span[0]:span[1]]))
            start = i + 1
    tail = _trimmed_span(text, start, len(text))
    if tail is not None:
        pieces.append((tail, text[tail[0]:tail[1]]))
    pieces.append(((0, len(text)), text))
    return pieces


def caption_partitions(text: str, item: str | None = None) -> PartitionManifest:
    """Manifest for a caption: one sentence entry per segment, then the full text."""
    segments = segment_caption(text)
    entries = []
    for i, (span, _) in enumerate(segments[:-1]):
        entries.append(PartitionEntry(
            id=f"sentence:{i}", modality="caption", kind="sentence",
            embedding_index=i, span=span,
        ))
    entries.append(PartitionEntry(
        id="caption:full", modality="caption", kind="full",
        embedding_index=len(segments) - 1, span=(0, len(text)),
    ))
    return PartitionManifest(entries=tuple(entries), item=item)


# --------------------------------------------------------------------------
# Region annotations


@dataclass(frozen=True)
class BoxAnnotation:
    """One annotated bounding box with the object names it contains."""

    box_id: str
    bbox: tuple[float, float, float, float]  # x, y, w, h in pixels
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if not self.names:
            raise ValidationError(f"box {self.box_id!r} has no object names")
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValidationError(f"box {self.box_id!r} has non-positive size {self.bbox}")

    def to_dict(self) -> dict:
        return {"id": self.box_id, "bbox": list(self.bbox), "names": list(self.names)}

    @classmethod
    def from_dict(cls, data) -> "BoxAnnotation":
        return cls(box_id=str(data["id"]), bbox=tuple(data["bbox"]), names=tuple(data["names"]))


@dataclass(frozen=True)
class RegionAnnotation:
    """Dense annotations of one image: region boxes and object boxes."""

    image_id: str
    width: int
    height: int
    regions: tuple[BoxAnnotation, ...] = ()
    objects: tuple[BoxAnnotation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image {self.image_id!r} has non-positive dimensions")
        for box in self.regions + self.objects:
            x, y, w, h = box.bbox
            if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise ValidationError(
                    f"box {box.box_id!r} {box.bbox} exceeds image "
                    f"{self.width}x{self.height}"
                )

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "regions": [b.to_dict() for b in self.regions],
            "objects": [b.to_dict() for b in self.objects],
        }

    @classmethod
    def from_dict(cls, data) -> "RegionAnnotation":
        return cls(
            image_id=str(data["image_id"]),
            width=int(data["width"]),
            height=int(data["height"]),
            regions=tuple(BoxAnnotation.from_dict(b) for b in data.get("regions", ())),
            objects=tuple(BoxAnnotation.from_dict(b) for b in data.get("objects", ())),
        )


def load_annotations(path: str | Path) -> list[RegionAnnotation]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [RegionAnnotation.from_dict(rec) for rec in data]


def save_annotations(annotations: Sequence[RegionAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([a.to_dict() for a in annotations], fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_partitions(annotation: RegionAnnotation) -> PartitionManifest:
    """Image-side manifest: regions in annotation order, then objects, then full."""
    entries: list[PartitionEntry] = []
    index = 0
    for box in annotation.regions:
        entries.append(PartitionEntry(
            id=f"region:{box.box_id}", modality="image", kind="region",
            embedding_index=index, bbox=box.bbox,
        ))
        index += 1
    for box in annotation.objects:
        entries.append(PartitionEntry(
            id=f"object:{box.box_id}", modality="image", kind="object",
            embedding_index=index, bbox=box.bbox,
        ))
        index += 1
    entries.append(PartitionEntry(
        id="image:full", modality="image", kind="full",
        embedding_index=index, bbox=(0.0, 0.0, float(annotation.width), float(annotation.height)),
    ))
    return PartitionManifest(
        entries=tuple(entries),
        image_dims=(annotation.width, annotation.height),
        item=annotation.image_id,
    )


# --------------------------------------------------------------------------
# Position / size profile


@dataclass(frozen=True)
class ProfileBin:
    """Aggregate for one relative-position bin of the caption."""

    bin_index: int
    mean_area: float | None  # None when the bin collected no samples
    count: int


def _normalize_word(word: str) -> str:
    return word.strip(string.punctuation).lower()


def position_size_profile(
    captions: Sequence[str],
    annotations: Sequence[RegionAnnotation],
    bins: int = 10,
) -> list[ProfileBin]:
    """Relate where an object is mentioned in a caption to its size.

    Caption words are matched case-insensitively against annotated object
    names (region and object boxes alike), with a trailing 's' stripped from
    the caption word as a naive plural fallback. Each match contributes one
    sample: the word's relative position (word index / word count) binned
    into ``bins`` equal intervals, and the bbox area as a proportion of the
    image, averaged over all boxes sharing the matched name.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if len(captions) != len(annotations):
        raise ValidationError(
            f"{len(captions)} captions but {len(annotations)} annotations"
        )
    buckets: list[list[float]] = [[] for _ in range(bins)]
    for caption, ann in zip(captions, annotations):
        words = caption.split()
        if not words:
            continue
        name_boxes: dict[str, list[BoxAnnotation]] = {}
        for box in ann.regions + ann.objects:
            for name in box.names:
                name_boxes.setdefault(name.lower(), []).append(box)
        image_area = float(ann.width * ann.height)
        for i, raw in enumerate(words):
            word = _normalize_word(raw)
            boxes = name_boxes.get(word)
            if boxes is None and word.endswith("s"):
                boxes = name_boxes.get(word[:-1])
            if not boxes:
                continue
            proportion = sum(b.bbox[2] * b.bbox[3] for b in boxes) / len(boxes) / image_area
            rel = i / len(words)
            buckets[min(int(rel * bins), bins - 1)].append(proportion)
    return [
        ProfileBin(
            bin_index=i,
            mean_area=(sum(vals) / len(vals)) if vals else None,
            count=len(vals),
        )
        for i, vals in enumerate(buckets)
    ]


def load_captions(path: str | Path) -> list[str]:
    """Captions file: JSON list for .json paths, otherwise one per line."""
    p = Path(path)
    if p.suffix == ".json":
        with open(p, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return [str(c) for c in data]
    return [line for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]
