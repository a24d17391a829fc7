import math

import numpy as np
import pytest

from dbdkit.core import Candidate
from dbdkit.models import ToyModelSpec


@pytest.fixture
def uniform4_spec():
    """Order-0 spec: four tokens, uniform next-token distribution."""
    return ToyModelSpec(
        vocab_size=4,
        eos=3,
        order=0,
        hidden_dim=2,
        transitions={(): (0.25, 0.25, 0.25, 0.25)},
        hiddens=((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, -0.5)),
        token_text=("a", "b", "c", "<eos>"),
    )


@pytest.fixture
def chain4_spec():
    """Order-1 spec with a unique greedy path 0 -> 1 -> eos."""
    return ToyModelSpec(
        vocab_size=4,
        eos=3,
        order=1,
        hidden_dim=2,
        transitions={
            (): (0.6, 0.3, 0.05, 0.05),
            (0,): (0.1, 0.5, 0.1, 0.3),
            (1,): (0.2, 0.2, 0.1, 0.5),
            (2,): (0.25, 0.25, 0.25, 0.25),
        },
        hiddens=((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, -0.5)),
        token_text=("a", "b", "c", "<eos>"),
    )


@pytest.fixture
def eos_after_two_spec():
    """Order-2 spec where EOS has log-probability -0.01 after any 2 tokens."""
    eos_p = math.exp(-0.01)
    rest = (1.0 - eos_p) / 3.0
    transitions = {
        (): (0.5, 0.3, 0.2, 0.0),
    }
    for a in range(3):
        transitions[(a,)] = (0.4, 0.35, 0.25, 0.0)
    for a in range(3):
        for b in range(3):
            transitions[(a, b)] = (rest, rest, rest, eos_p)
    return ToyModelSpec(
        vocab_size=4,
        eos=3,
        order=2,
        hidden_dim=2,
        transitions=transitions,
        hiddens=((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, -0.5)),
    )


def make_candidate(hiddens, logprobs=None, tokens=None, eos=-1, finish=False):
    """Build a candidate through the normal extend path.

    With ``finish`` the last extension uses the last token as EOS, producing
    a finished candidate.
    """
    hiddens = [tuple(float(x) for x in h) for h in hiddens]
    n = len(hiddens)
    if logprobs is None:
        logprobs = [-0.1] * n
    if tokens is None:
        tokens = list(range(n))
    cand = Candidate()
    for i, (t, lp, h) in enumerate(zip(tokens, logprobs, hiddens)):
        last = finish and i == n - 1
        cand = cand.extend(t, lp, h, eos=t if last else eos)
    return cand


def random_unit_avoiding_zero(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    while float(np.linalg.norm(v)) < 1e-6:
        v = rng.normal(size=dim)
    return v
