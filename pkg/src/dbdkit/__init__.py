"""Differentiated beam decoding and the partition-based CLIP metric set."""

from .core import (
    Candidate,
    FactSet,
    PartitionEntry,
    PartitionManifest,
    SearchConfig,
    SelectionConfig,
    Violation,
    validate_manifest,
)
from .diffscore import pairwise_diff, set_diff
from .metrics import (
    MetricReport,
    clip_f1,
    clip_precision,
    clip_recall,
    evaluate,
    plr,
    top_k_similar,
)
from .models import (
    Expansion,
    ExpansionItem,
    GenerativeModel,
    ToyModel,
    ToyModelSpec,
    greedy_decode,
    load_toy_spec,
    random_toy_spec,
    save_toy_spec,
    sequence_logprob,
    toy_expand,
)
from .search import alpha_at, pick_step, search, select_facts, summarize

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "Expansion",
    "ExpansionItem",
    "FactSet",
    "GenerativeModel",
    "MetricReport",
    "PartitionEntry",
    "PartitionManifest",
    "SearchConfig",
    "SelectionConfig",
    "ToyModel",
    "ToyModelSpec",
    "Violation",
    "alpha_at",
    "clip_f1",
    "clip_precision",
    "clip_recall",
    "evaluate",
    "greedy_decode",
    "load_toy_spec",
    "pairwise_diff",
    "pick_step",
    "plr",
    "random_toy_spec",
    "save_toy_spec",
    "search",
    "select_facts",
    "sequence_logprob",
    "set_diff",
    "summarize",
    "top_k_similar",
    "toy_expand",
    "validate_manifest",
]
