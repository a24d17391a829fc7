"""Default prompts and published decoding presets."""

from __future__ import annotations

from dataclasses import dataclass

from .core import SearchConfig, SelectionConfig

SEARCH_PROMPT = (
    "Please generate a random fact of the image. You can describe the main "
    "object, the background, the environment, or any other detail. Please "
    "make sure the choice of the fact is random. Do not only focus on the "
    "people or the main object."
)

SUMMARY_PROMPT = (
    "These are the image and the facts of the image. Please summarize them "
    "and generate a detailed description of the image based on the facts "
    "and the image"
)

# Some chatty model families need this appended to keep answers terse.
DIRECT_SUFFIX = "Give me the fact directly without other words"


@dataclass(frozen=True)
class DecodePreset:
    name: str
    search: SearchConfig
    selection: SelectionConfig
    direct_suffix: bool = False


PRESETS = {
    # 5 beams, expansion width 6, differential weight 10 for the first
    # 3 steps and 5 afterwards.
    "standard": DecodePreset(
        name="standard",
        search=SearchConfig(
            beams=5,
            top_k=6,
            alpha_schedule=((3, 10.0), (None, 5.0)),
            max_steps=20,
            seed=0,
        ),
        selection=SelectionConfig(alpha=5.0, max_facts=10),
    ),
    # 7 beams, expansion width 7, constant differential weight 4.
    "wide": DecodePreset(
        name="wide",
        search=SearchConfig(
            beams=7,
            top_k=7,
            alpha_schedule=((None, 4.0),),
            max_steps=20,
            seed=0,
        ),
        selection=SelectionConfig(alpha=5.0, max_facts=10),
        direct_suffix=True,
    ),
}
