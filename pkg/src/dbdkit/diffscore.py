"""Sequence-level and set-level differential scores.

The differential score between two candidates is the negative mean pairwise
cosine similarity of their token hidden states:

    d(y1, y2) = -(1 / (L1 * L2)) * sum_i sum_j cos(h1_i, h2_j)

Because cos(h, g) = <h/|h|, g/|g|>, the double sum collapses to the dot
product of the mean unit-normalized hidden vectors, which every candidate
maintains incrementally. Higher values mean more distinct content; the range
is [-1, 1]. All functions here are pure and safe to call in parallel.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

from .core import Candidate, vdot
from .errors import ZeroNormError


def pairwise_diff(y1: Candidate, y2: Candidate) -> float:
    """Differential score of two candidates with at least one token each."""
    if not y1.tokens or not y2.tokens:
        raise ValueError("differential score requires candidates with >= 1 generated token")
    if not y1.norm_mean or not y2.norm_mean:
        # norm_mean is only absent when a hidden had zero norm upstream
        raise ZeroNormError("candidate carries no normalized-mean hidden vector")
    return -vdot(y1.norm_mean, y2.norm_mean)


def set_diff(facts: Sequence[Candidate]) -> float:
    """Sum of pairwise differential scores over all unordered distinct pairs."""
    return sum(pairwise_diff(a, b) for a, b in combinations(facts, 2))
