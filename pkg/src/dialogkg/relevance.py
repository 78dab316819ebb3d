"""Local relevance of a response to its prompt and optional reference."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .embedding import EmbeddingProvider, cosine

_BOUNDARY_RE = re.compile(r"(?<=[.!?])(?=\s|$)")


@dataclass(frozen=True)
class RelevanceConfig:
    w_prompt: float = 0.4
    w_reference: float = 0.6
    min_prompt_words: int = 10
    short_words: int = 12

    def __post_init__(self):
        if self.w_prompt < 0 or self.w_reference < 0 or abs(self.w_prompt + self.w_reference - 1.0) > 1e-9:
            raise ValueError("relevance weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class RelevanceResult:
    score: float
    gate: bool
    m_q: float
    m_r: float | None
    glued: bool


def word_count(text: str) -> int:
    return len(text.split())


def glue(prompt: str, response: str) -> str:
    return f"Prompt: {prompt} Response: {response}"


def segment_sentences(text: str) -> list[str]:
    """Split after ``.``, ``!`` or ``?`` that precede whitespace or end of text.

    A period between digits (``3.5``) is never followed by whitespace, so
    decimals stay intact.
    """
    parts = _BOUNDARY_RE.split(text)
    return [p.strip() for p in parts if p.strip()]


def local_relevance(
    prompt: str,
    response: str,
    reference: str | None,
    embedder: EmbeddingProvider,
    config: RelevanceConfig = RelevanceConfig(),
) -> RelevanceResult:
    if not prompt.strip() or not response.strip():
        raise ValueError("prompt and response must be non-empty")
    glued = word_count(response) < config.short_words
    if glued:
        # the glue string is one unit; segmenting it would match the prompt to itself
        sentences = [glue(prompt, response)]
    else:
        sentences = segment_sentences(response) or [response.strip()]
    vectors = [embedder.embed(s) for s in sentences]

    q_vec = embedder.embed(prompt)
    m_q = max(0.0, max(cosine(q_vec, v) for v in vectors))

    gate = bool(reference and reference.strip()) and word_count(prompt) >= config.min_prompt_words
    if not gate:
        return RelevanceResult(min(m_q, 1.0), False, m_q, None, glued)
    ref_vec = embedder.embed(reference)
    m_r = max(0.0, max(cosine(ref_vec, v) for v in vectors))
    score = config.w_prompt * m_q + config.w_reference * m_r
    return RelevanceResult(min(max(score, 0.0), 1.0), True, m_q, m_r, glued)
