"""Related concepts by snippet-level co-occurrence counting.

Two concepts co-occur when the same snippet holds annotations of both;
repeated mentions within one snippet still count once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .annotate import Annotation


@dataclass(frozen=True)
class CooccurrenceTable:
    target: str
    counts: dict[str, int]  # other concept_id -> number of shared snippets


def group_by_snippet(
    annotations: Iterable[Annotation],
) -> dict[tuple[str, int], set[str]]:
    """Concept-id presence sets keyed by (doc_id, snippet_index)."""
    groups: dict[tuple[str, int], set[str]] = {}
    for a in annotations:
        groups.setdefault((a.doc_id, a.snippet_index), set()).add(a.concept_id)
    return groups


def cooccurrence_counts(
    concept_id: str, snippet_groups: Mapping[tuple[str, int], set[str]]
) -> CooccurrenceTable:
    counts: dict[str, int] = {}
    for present in snippet_groups.values():
        if concept_id not in present:
            continue
        for other in present:
            if other != concept_id:
                counts[other] = counts.get(other, 0) + 1
    return CooccurrenceTable(concept_id, counts)


DEFAULT_RELATED_K = 5


def top_related(table: CooccurrenceTable, k: int = DEFAULT_RELATED_K) -> list[str]:
    """Concept ids by descending count, ties by ascending id, at most k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(table.counts.items(), key=lambda item: (-item[1], item[0]))
    return [concept_id for concept_id, _ in ordered[:k]]
