"""Built-in oracle suite, runnable from the CLI on a fresh checkout.

Each check pits a production code path against a deliberately independent
re-computation: PLR against a pseudo-inverse projection, the differential
score against the brute-force cosine double sum, and the parallel search in
its degenerate configuration against a standalone greedy decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Candidate, SearchConfig
from .diffscore import pairwise_diff
from .errors import DBDError
from .metrics import plr
from .models import ToyModel, greedy_decode, load_toy_spec, random_toy_spec
from .search import search


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.detail})"


def _random_candidate(rng: np.random.Generator, dim: int, max_len: int = 6) -> Candidate:
    cand = Candidate()
    for _ in range(int(rng.integers(1, max_len + 1))):
        h = rng.normal(size=dim)
        while float(np.linalg.norm(h)) < 1e-6:
            h = rng.normal(size=dim)
        cand = cand.extend(0, float(-rng.exponential(0.5)), tuple(h), eos=-1)
    return cand


def check_plr_pseudoinverse(trials: int = 100, seed: int = 7) -> CheckResult:
    """PLR must match the projection norm computed via a pseudo-inverse."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        dim = int(rng.integers(2, 9))
        nb = int(rng.integers(1, 7))
        a = rng.normal(size=dim)
        b = rng.normal(size=(nb, dim))
        k = int(rng.integers(1, nb + 1))
        got = plr(a, b, k)
        # independent route: project onto the same top-k columns via pinv
        cos = (b @ a) / (np.linalg.norm(b, axis=1) * np.linalg.norm(a))
        idx = sorted(range(nb), key=lambda i: (-cos[i], i))[:k]
        bk = b[idx].T
        proj = bk @ (np.linalg.pinv(bk) @ a)
        want = float(np.linalg.norm(proj) / np.linalg.norm(a))
        worst = max(worst, abs(got - want))
    return CheckResult("plr-pseudoinverse", worst <= 1e-8, f"max deviation {worst:.3e} over {trials} trials")


def check_diffscore_identity(trials: int = 100, seed: int = 11) -> CheckResult:
    """Fast dot-product path must match the brute-force cosine double sum."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    symmetric = True
    for _ in range(trials):
        dim = int(rng.integers(2, 6))
        y1 = _random_candidate(rng, dim)
        y2 = _random_candidate(rng, dim)
        got = pairwise_diff(y1, y2)
        total = 0.0
        for h in y1.hiddens:
            for g in y2.hiddens:
                hv, gv = np.asarray(h), np.asarray(g)
                total += float(hv @ gv / (np.linalg.norm(hv) * np.linalg.norm(gv)))
        want = -total / (len(y1.hiddens) * len(y2.hiddens))
        worst = max(worst, abs(got - want))
        symmetric = symmetric and pairwise_diff(y1, y2) == pairwise_diff(y2, y1)
    passed = worst <= 1e-9 and symmetric
    return CheckResult("diffscore-identity", passed,
                       f"max deviation {worst:.3e}, symmetry {'exact' if symmetric else 'broken'}")


def terminating_toy_spec(rng: np.random.Generator, max_steps: int = 48, **kwargs):
    """Sample toy specs until the greedy chain reaches EOS within max_steps."""
    while True:
        spec = random_toy_spec(rng=rng, **kwargs)
        model = ToyModel(spec)
        if greedy_decode(model, model.open_context("probe"), max_steps).finished:
            return spec


def check_greedy_reduction(trials: int = 10, seed: int = 13) -> CheckResult:
    """One beam with zero differential weight must reproduce greedy decoding."""
    rng = np.random.default_rng(seed)
    for i in range(trials):
        spec = terminating_toy_spec(
            rng,
            vocab_size=int(rng.integers(4, 10)),
            hidden_dim=3,
            order=int(rng.integers(0, 3)),
            eos_floor=0.3,
        )
        model = ToyModel(spec)
        config = SearchConfig(beams=1, top_k=3, alpha_schedule=((None, 0.0),), max_steps=48)
        greedy = greedy_decode(model, model.open_context("probe"), config.max_steps)
        facts = search(model, config, prompt="probe")
        if not len(facts) or facts[0].tokens != greedy.tokens:
            return CheckResult("greedy-reduction", False, f"trial {i}: first fact differs from greedy output")
    return CheckResult("greedy-reduction", True, f"{trials} random toy models")


def check_toy_spec(path: str | Path) -> CheckResult:
    """Load and fully validate a toy model spec file."""
    try:
        spec = load_toy_spec(path)
    except (DBDError, OSError, ValueError, KeyError) as exc:
        return CheckResult("toy-spec", False, f"{path}: {exc}")
    total = math.fsum(spec.transitions[()])
    return CheckResult("toy-spec", True, f"{path}: vocab {spec.vocab_size}, root mass {total:.9f}")


def run_selfcheck(spec_path: str | Path | None = None, seed: int = 0) -> list[CheckResult]:
    results = [
        check_plr_pseudoinverse(seed=seed + 7),
        check_diffscore_identity(seed=seed + 11),
        check_greedy_reduction(seed=seed + 13),
    ]
    if spec_path is not None:
        results.append(check_toy_spec(spec_path))
    return results
