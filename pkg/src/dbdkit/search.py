"""Differentiated beam decoding: parallel search, selection, summarization.

The engine maintains ``beams`` parallel candidates. Each step expands every
active candidate by its top-k next tokens and re-picks the next generation
from the pooled sub-candidates: the first pick maximizes sentence
log-likelihood, every later pick maximizes the hybrid score

    logprob(y) + alpha_t * sum_k d(y, picked_k)

where d is the pairwise differential score and the sum runs over everything
picked earlier in the same step, finished picks included. A pick ending in
the end-of-sequence token becomes a completed unit fact and a replacement is
picked by the same rule. Ties break by pool order (beam order, then expansion
rank), which makes the whole search deterministic for a deterministic model.

Post-search selection re-ranks the completed facts by length-normalized
log-likelihood plus a differential term, and summarization renders the
selected facts into a prompt for a final greedy pass (or concatenates them
when the model cannot take long prompts).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .core import Candidate, FactSet, SearchConfig, SelectionConfig
from .diffscore import pairwise_diff
from .errors import ValidationError
from .models import GenerativeModel, greedy_decode
from .presets import SEARCH_PROMPT, SUMMARY_PROMPT


@dataclass(frozen=True)
class StepState:
    """Snapshot of the search after one step."""

    active: tuple[Candidate, ...]
    completed: FactSet
    step: int

    def __post_init__(self) -> None:
        if any(c.finished for c in self.active):
            raise ValidationError("active candidates must be unfinished")


@dataclass(frozen=True)
class StepRecord:
    """One step's pool and picks, recorded for argmax audits."""

    step: int
    alpha: float
    pool: tuple[Candidate, ...]
    picks: tuple[Candidate, ...]  # overall pick order, finished picks included
    state: StepState


def alpha_at(config: SearchConfig, t: int) -> float:
    """Differential weight for step ``t`` (1-based); piecewise constant."""
    if t < 1:
        raise ValueError(f"step must be >= 1, got {t}")
    for threshold, value in config.alpha_schedule:
        if threshold is None or t <= threshold:
            return value
    raise AssertionError("unreachable: schedule ends with an unbounded threshold")


def _pick_full(
    pool: Sequence[Candidate], n: int, alpha: float
) -> tuple[list[Candidate], list[Candidate], list[Candidate]]:
    """Pick loop returning (unfinished picks, completed picks, overall order)."""
    if not pool:
        raise ValueError("cannot pick from an empty sub-candidate pool")
    remaining = list(pool)
    order: list[Candidate] = []
    picked: list[Candidate] = []
    completed: list[Candidate] = []
    while remaining and len(picked) < n:
        if not order or alpha == 0.0:
            best = max(range(len(remaining)), key=lambda i: remaining[i].logprob)
        else:
            def hybrid(i: int) -> float:
                c = remaining[i]
                return c.logprob + alpha * sum(pairwise_diff(c, ref) for ref in order)
            best = max(range(len(remaining)), key=hybrid)
        choice = remaining.pop(best)
        order.append(choice)
        if choice.finished:
            completed.append(choice)
        else:
            picked.append(choice)
    return picked, completed, order


def pick_step(
    pool: Sequence[Candidate], n: int, alpha: float
) -> tuple[list[Candidate], list[Candidate]]:
    """Select up to ``n`` unfinished candidates from the pooled expansions.

    Finished picks are diverted to the completed list; they stay in the
    differential reference set for the picks that follow them.
    """
    picked, completed, _ = _pick_full(pool, n, alpha)
    return picked, completed


def search(
    model: GenerativeModel,
    config: SearchConfig,
    prompt: str = SEARCH_PROMPT,
    image: str | None = None,
    trace: list[StepRecord] | None = None,
) -> FactSet:
    """Run the differentiated parallel search and return the completed facts.

    Unfinished candidates at ``max_steps`` are discarded; sub-candidates that
    duplicate an already-completed fact token-for-token are dropped from the
    pool before picking. Pass a list as ``trace`` to record every step for
    later auditing.
    """
    context = model.open_context(prompt, image)
    eos = model.eos_token
    facts: list[Candidate] = []
    seen: set[tuple[int, ...]] = set()
    active: list[Candidate] = [Candidate()]

    for t in range(1, config.max_steps + 1):
        pool: list[Candidate] = []
        for cand in active:
            for item in model.expand(context, cand, config.top_k):
                pool.append(cand.extend(item.token, item.logprob, item.hidden, eos))
        pool = [c for c in pool if not (c.finished and c.tokens in seen)]
        if not pool:
            break

        alpha = alpha_at(config, t)
        picked, completed, order = _pick_full(pool, config.beams, alpha)
        facts.extend(completed)
        seen.update(c.tokens for c in completed)

        if trace is not None:
            state = StepState(active=tuple(picked), completed=FactSet(tuple(facts)), step=t)
            trace.append(StepRecord(step=t, alpha=alpha, pool=tuple(pool),
                                    picks=tuple(order), state=state))
        active = picked
        if not active:
            break

    return FactSet(tuple(facts))


def select_facts(facts: FactSet, config: SelectionConfig) -> FactSet:
    """Pick the most representative facts, without replacement.

    The first pick maximizes the length-normalized log-likelihood
    ``logprob / len(tokens)``; later picks add ``alpha`` times the summed
    differential score against everything already selected.
    """
    if not len(facts):
        raise ValueError("cannot select from an empty fact set")
    remaining = list(facts)
    selected: list[Candidate] = []
    while remaining and len(selected) < config.max_facts:
        def score(i: int) -> float:
            c = remaining[i]
            s = c.logprob / len(c.tokens)
            if selected and config.alpha != 0.0:
                s += config.alpha * sum(pairwise_diff(c, ref) for ref in selected)
            return s
        best = max(range(len(remaining)), key=score)
        selected.append(remaining.pop(best))
    return FactSet(tuple(selected))


def render_summary_prompt(template: str, fact_texts: Sequence[str]) -> str:
    """Insert the facts, one per line in selection order, into the template."""
    block = "\n".join(fact_texts)
    if "{facts}" in template:
        return template.replace("{facts}", block)
    return template + "\n" + block


@dataclass(frozen=True)
class Summary:
    text: str
    tokens: tuple[int, ...] | None
    used_fallback: bool


def summarize(
    model: GenerativeModel,
    facts: FactSet,
    template: str = SUMMARY_PROMPT,
    image: str | None = None,
    max_tokens: int = 256,
    fallback: Callable[[Sequence[str]], str] | None = None,
) -> Summary:
    """Synthesize the selected facts into one final caption.

    Models that accept long prompts get the rendered summarization prompt and
    a greedy decode until EOS or ``max_tokens``. Otherwise the configurable
    ``fallback`` joins the fact texts verbatim (default: space-separated).
    """
    if not len(facts):
        raise ValueError("cannot summarize an empty fact set")
    texts = [model.detokenize(f.tokens) for f in facts]
    if not model.accepts_long_prompts:
        join = fallback if fallback is not None else " ".join
        return Summary(text=join(texts), tokens=None, used_fallback=True)
    prompt = render_summary_prompt(template, texts)
    context = model.open_context(prompt, image)
    caption = greedy_decode(model, context, max_tokens)
    return Summary(text=model.detokenize(caption.tokens), tokens=caption.tokens, used_fallback=False)
