"""Location-aware term-frequency snippet scoring.

A snippet s scores F(c, s) = tf/|s| * (1 - first_pos/|s|) for concept c,
where tf is the number of annotations of c in s, |s| the snippet token
count, and first_pos the 0-based token index of the first annotation.
Earlier first mentions score higher; snippets that never mention the
concept score 0 and never reach a page.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .annotate import Annotation
from .corpus import Snippet


@dataclass(frozen=True)
class SnippetScore:
    doc_id: str
    snippet_index: int
    tf: int
    length: int  # token count, >= 1
    first_pos: int  # 0-based token index; == length when tf == 0
    score: float


def _token_index(snippet: Snippet, char_pos: int) -> int:
    """0-based index, over the whole snippet, of the token covering or
    following char_pos."""
    index = 0
    for sentence in snippet.sentences:
        for token in sentence.tokens:
            if token.end > char_pos:
                return index
            index += 1
    return index


def score_snippet(
    concept_id: str, snippet: Snippet, annotations: Sequence[Annotation]
) -> SnippetScore:
    """Score one snippet for a concept from its annotations.

    ``annotations`` may span the whole corpus; only those of this concept
    in this snippet count. Raises ValueError on a snippet with no tokens.
    """
    length = snippet.token_count
    if length < 1:
        raise ValueError(
            f"snippet {snippet.snippet_id} has no tokens and cannot be scored"
        )
    spans = sorted(
        a.span
        for a in annotations
        if a.concept_id == concept_id
        and a.doc_id == snippet.doc_id
        and a.snippet_index == snippet.index
    )
    tf = len(spans)
    if tf == 0:
        return SnippetScore(snippet.doc_id, snippet.index, 0, length, length, 0.0)
    first_pos = _token_index(snippet, spans[0][0])
    score = (tf / length) * (1.0 - first_pos / length)
    return SnippetScore(snippet.doc_id, snippet.index, tf, length, first_pos, score)


DEFAULT_SNIPPETS_K = 10


def rank_snippets(
    scored: Sequence[SnippetScore], k: int = DEFAULT_SNIPPETS_K
) -> list[SnippetScore]:
    """Top-k by descending score; ties broken by smaller first_pos, then
    doc_id, then snippet_index. Zero-score snippets are excluded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    positive = [s for s in scored if s.score > 0.0]
    positive.sort(key=lambda s: (-s.score, s.first_pos, s.doc_id, s.snippet_index))
    return positive[:k]
