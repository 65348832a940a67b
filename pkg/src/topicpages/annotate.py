"""Concept mention annotation.

Dictionary lookup over normalized token streams (matches start and end on
token boundaries), document-local abbreviation aliasing via the
Schwartz-Hearst character alignment, and longest-match overlap
resolution. Matching is case-insensitive except for short all-uppercase
aliases (<= 4 chars, e.g. "ML"), which must match exactly to avoid false
hits on common words.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Document, Snippet
from .tagging import Token, tokenize
from .taxonomy import Taxonomy, normalize

SHORT_FORM_MIN_CHARS = 2
SHORT_FORM_MAX_CHARS = 10
SHORT_FORM_MAX_WORDS = 2


@dataclass(frozen=True)
class AbbreviationPair:
    short_form: str
    long_form: str
    definition_span: tuple[int, int]  # the parenthetical site, snippet coords


@dataclass(frozen=True)
class Annotation:
    concept_id: str
    doc_id: str
    snippet_index: int
    sentence_index: int
    span: tuple[int, int]  # char interval in snippet text
    surface: str
    via_abbreviation: bool = False


# ---------------------------------------------------------------------------
# Schwartz-Hearst abbreviation detection
# ---------------------------------------------------------------------------


def _valid_short_form(candidate: str) -> bool:
    if not SHORT_FORM_MIN_CHARS <= len(candidate) <= SHORT_FORM_MAX_CHARS:
        return False
    if len(candidate.split()) > SHORT_FORM_MAX_WORDS:
        return False
    if not any(c.isalpha() for c in candidate):
        return False
    return candidate[0].isalnum()


def _best_long_form(short: str, window: str) -> str | None:
    """Right-to-left character alignment of the short form against the
    candidate window; returns the shortest word-aligned suffix of the
    window containing all short-form alphanumerics in order."""
    s = len(short) - 1
    l = len(window) - 1
    while s >= 0:
        ch = short[s].lower()
        if not ch.isalnum():
            s -= 1
            continue
        # The first short-form char must start a word in the long form.
        while l >= 0 and (
            window[l].lower() != ch
            or (s == 0 and l > 0 and window[l - 1].isalnum())
        ):
            l -= 1
        if l < 0:
            return None
        l -= 1
        s -= 1
    start = window.rfind(" ", 0, l + 1) + 1
    return window[start:]


def detect_abbreviations(snippet: Snippet) -> list[AbbreviationPair]:
    """Find (short form, long form) pairs defined in the snippet.

    For each parenthesized candidate, the long form is sought in the words
    of the same sentence preceding the parenthesis, capped at
    min(|short| + 5, |short| * 2) words.
    """
    pairs: list[AbbreviationPair] = []
    text = snippet.text
    for sentence in snippet.sentences:
        i = sentence.start
        while i < sentence.end:
            open_pos = text.find("(", i, sentence.end)
            if open_pos == -1:
                break
            close_pos = text.find(")", open_pos + 1, sentence.end)
            if close_pos == -1:
                break
            candidate = text[open_pos + 1 : close_pos].strip()
            i = close_pos + 1
            if not _valid_short_form(candidate):
                continue
            preceding = text[sentence.start : open_pos].split()
            max_words = min(len(candidate) + 5, len(candidate) * 2)
            window = " ".join(preceding[-max_words:]) if preceding else ""
            if not window:
                continue
            long_form = _best_long_form(candidate, window)
            if long_form is None or not long_form.strip():
                continue
            long_form = long_form.strip()
            if len(candidate) > len(long_form):
                continue
            if normalize(long_form) == normalize(candidate):
                continue
            pairs.append(
                AbbreviationPair(candidate, long_form, (open_pos, close_pos + 1))
            )
    return pairs


# ---------------------------------------------------------------------------
# Dictionary matching
# ---------------------------------------------------------------------------


def _alias_key(alias: str) -> tuple[str, ...]:
    return tuple(normalize(t.text) for t in tokenize(alias))


def is_case_sensitive_alias(alias: str) -> bool:
    """Short all-uppercase aliases match case-sensitively."""
    return len(alias) <= 4 and alias.isupper()


@dataclass
class _TrieNode:
    children: dict[str, "_TrieNode"] = field(default_factory=dict)
    # (concept_id, exact surface tokens or None, normalized alias)
    entries: list[tuple[str, tuple[str, ...] | None, str]] = field(
        default_factory=list
    )


class _TokenTrie:
    """Multi-pattern matcher over normalized token sequences."""

    def __init__(self) -> None:
        self.root = _TrieNode()

    def add(self, alias: str, concept_id: str) -> None:
        key = _alias_key(alias)
        if not key:
            return
        node = self.root
        for part in key:
            node = node.children.setdefault(part, _TrieNode())
        exact = (
            tuple(t.text for t in tokenize(alias))
            if is_case_sensitive_alias(alias)
            else None
        )
        entry = (concept_id, exact, normalize(alias))
        if entry not in node.entries:
            node.entries.append(entry)

    def matches_at(
        self, tokens: Sequence[Token], start: int
    ) -> Iterable[tuple[int, str, str]]:
        """Yield (end_token_exclusive, concept_id, normalized_alias) for
        every alias whose token path starts at token ``start``. Callers
        still verify surface constraints (normalized-string equality and
        the case rule for short uppercase aliases)."""
        node = self.root
        i = start
        while i < len(tokens):
            node = node.children.get(normalize(tokens[i].text))
            if node is None:
                return
            i += 1
            for concept_id, exact, norm_alias in node.entries:
                if exact is not None:
                    surface = tuple(t.text for t in tokens[start:i])
                    if surface != exact:
                        continue
                yield i, concept_id, norm_alias


def build_trie(tax: Taxonomy) -> _TokenTrie:
    trie = _TokenTrie()
    for concept in tax.concepts.values():
        for alias in concept.aliases:
            trie.add(alias, concept.concept_id, False)
    return trie


@dataclass(frozen=True)
class _RawMatch:
    span: tuple[int, int]
    concept_id: str
    sentence_index: int
    surface: str
    via_abbreviation: bool
    preferred_hit: bool  # surface equals the concept's preferred label


def resolve_overlaps(matches: list[_RawMatch]) -> list[_RawMatch]:
    """Longest span wins; equal length -> earlier start; same span ->
    preferred-label surface, then lowest concept_id. Greedy sweep in that
    priority order; later candidates overlapping an accepted span drop."""
    ordered = sorted(
        matches,
        key=lambda m: (
            -(m.span[1] - m.span[0]),
            m.span[0],
            0 if m.preferred_hit else 1,
            m.concept_id,
        ),
    )
    accepted: list[_RawMatch] = []
    taken: list[tuple[int, int]] = []
    for m in ordered:
        s, e = m.span
        if any(s < te and ts < e for ts, te in taken):
            continue
        accepted.append(m)
        taken.append((s, e))
    accepted.sort(key=lambda m: m.span[0])
    return accepted


def annotate_snippet(
    snippet: Snippet,
    trie: _TokenTrie,
    tax: Taxonomy,
    doc_trie: _TokenTrie | None = None,
    definition_spans: Sequence[tuple[int, int]] = (),
) -> list[Annotation]:
    raw: list[_RawMatch] = []
    seen: dict[tuple[tuple[int, int], str], int] = {}
    for sent_idx, sentence in enumerate(snippet.sentences):
        tokens = sentence.tokens
        for start in range(len(tokens)):
            for trie_, via_doc in ((trie, False), (doc_trie, True)):
                if trie_ is None:
                    continue
                for end, concept_id, _ in trie_.matches_at(tokens, start):
                    span = (tokens[start].start, tokens[end - 1].end)
                    if via_doc and any(
                        span[0] >= ds and span[1] <= de
                        for ds, de in definition_spans
                    ):
                        continue  # short form inside its own definition site
                    surface = snippet.text[span[0] : span[1]]
                    key = (span, concept_id)
                    preferred = (
                        normalize(surface)
                        == normalize(tax.concepts[concept_id].preferred_label)
                    )
                    match = _RawMatch(
                        span, concept_id, sent_idx, surface, via_doc, preferred
                    )
                    if key in seen:
                        # Taxonomy match outranks an injected abbreviation.
                        if not via_doc and raw[seen[key]].via_abbreviation:
                            raw[seen[key]] = match
                        continue
                    seen[key] = len(raw)
                    raw.append(match)
    resolved = resolve_overlaps(raw)
    return [
        Annotation(
            m.concept_id,
            snippet.doc_id,
            snippet.index,
            m.sentence_index,
            m.span,
            m.surface,
            m.via_abbreviation,
        )
        for m in resolved
    ]


def annotate_document(
    doc: Document, tax: Taxonomy, trie: _TokenTrie | None = None
) -> list[Annotation]:
    """Annotate every snippet of the document.

    Abbreviation pairs whose long form is a taxonomy alias inject the
    short form as a document-local alias for the matched concepts. Output
    is sorted by (snippet_index, span start).
    """
    trie = trie or build_trie(tax)
    doc_trie: _TokenTrie | None = None
    definition_spans: dict[int, list[tuple[int, int]]] = {}
    for snippet in doc.snippets:
        for pair in detect_abbreviations(snippet):
            concept_ids = tax.lookup(pair.long_form)
            if not concept_ids:
                continue
            if doc_trie is None:
                doc_trie = _TokenTrie()
            for concept_id in concept_ids:
                doc_trie.add(pair.short_form, concept_id, True)
            definition_spans.setdefault(snippet.index, []).append(
                pair.definition_span
            )

    annotations: list[Annotation] = []
    for snippet in doc.snippets:
        annotations.extend(
            annotate_snippet(
                snippet,
                trie,
                tax,
                doc_trie,
                definition_spans.get(snippet.index, ()),
            )
        )
    annotations.sort(key=lambda a: (a.snippet_index, a.span[0]))
    return annotations


# ---------------------------------------------------------------------------
# JSON Lines dump format
# ---------------------------------------------------------------------------


def annotation_to_dict(a: Annotation) -> dict:
    return {
        "concept_id": a.concept_id,
        "doc_id": a.doc_id,
        "snippet_index": a.snippet_index,
        "sentence_index": a.sentence_index,
        "span": [a.span[0], a.span[1]],
        "surface": a.surface,
        "via_abbreviation": a.via_abbreviation,
    }


def annotation_from_dict(data: dict) -> Annotation:
    return Annotation(
        data["concept_id"],
        data["doc_id"],
        data["snippet_index"],
        data["sentence_index"],
        (data["span"][0], data["span"][1]),
        data["surface"],
        data["via_abbreviation"],
    )


def write_annotations(annotations: Iterable[Annotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps(annotation_to_dict(a), ensure_ascii=False) + "\n")


def read_annotations(path) -> list[Annotation]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(annotation_from_dict(json.loads(line)))
    return out
