"""Parsed corpus model: Document -> Snippet -> Sentence with stable offsets.

One snippet per document section. XML input follows a simplified article
schema (root ``<article>`` with ``<title>`` and ``<body>`` of ``<sec>``
elements); nested sections are flattened depth-first into separate
snippets. Plain-text input yields one snippet per blank-line-separated
block. All spans are character offsets into the snippet text, so slicing
the snippet text by any stored span reproduces the stored surface string.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable

from .tagging import Tagger, Token, tokenize_and_tag

SOURCE_KINDS = ("journal-article", "book-chapter", "plain-text")


class ParseError(ValueError):
    """Malformed input document."""


@dataclass(frozen=True)
class Sentence:
    start: int  # char offset in snippet text, half-open
    end: int
    tokens: tuple[Token, ...]  # token spans in snippet coordinates
    pos_tags: tuple[str, ...]  # same length as tokens

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass
class Snippet:
    doc_id: str
    index: int  # section position within the document
    heading: str | None
    text: str
    sentences: list[Sentence] = field(default_factory=list)

    @property
    def snippet_id(self) -> tuple[str, int]:
        return (self.doc_id, self.index)

    @property
    def token_count(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)


@dataclass
class Document:
    doc_id: str
    title: str
    source_kind: str
    domain: str
    snippets: list[Snippet] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------

# Periods after these tokens never end a sentence.
SPLIT_EXCEPTIONS = ("al", "Fig", "Eq", "e.g", "i.e", "et", "vs", "Dr", "No")

_TERMINATORS = ".?!"


def _abbreviation_before(text: str, i: int) -> bool:
    """True if the period at text[i] is preceded by a listed abbreviation."""
    for abbr in SPLIT_EXCEPTIONS:
        j = i - len(abbr)
        if j < 0 or text[j:i] != abbr:
            continue
        if j == 0 or not text[j - 1].isalnum():
            return True
    return False


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Split text into ordered, disjoint sentence spans.

    Splits after ``.?!`` when followed by whitespace and an uppercase
    letter, unless the period closes a known abbreviation. Spans are
    trimmed to the non-whitespace extent of each piece; empty text yields
    an empty list.
    """
    boundaries: list[int] = []
    n = len(text)
    for m in re.finditer(r"[.?!]", text):
        i = m.start()
        j = i + 1
        if j >= n or not text[j].isspace():
            continue
        k = j
        while k < n and text[k].isspace():
            k += 1
        if k >= n or not text[k].isupper():
            continue
        if text[i] == "." and _abbreviation_before(text, i):
            continue
        boundaries.append(j)

    spans: list[tuple[int, int]] = []
    prev = 0
    for b in boundaries + [n]:
        piece = text[prev:b]
        lstrip = len(piece) - len(piece.lstrip())
        rstrip = len(piece) - len(piece.rstrip())
        if piece.strip():
            spans.append((prev + lstrip, b - rstrip))
        prev = b
    return spans


def sentence_from_text(
    text: str, offset: int = 0, tagger: Tagger | None = None
) -> Sentence:
    """Build a Sentence for ``text`` placed at ``offset`` in its snippet."""
    tokens, tags = tokenize_and_tag(text, tagger)
    shifted = tuple(Token(t.text, t.start + offset, t.end + offset) for t in tokens)
    return Sentence(offset, offset + len(text), shifted, tuple(tags))


def _build_snippet(
    doc_id: str, index: int, heading: str | None, text: str, tagger: Tagger | None
) -> Snippet:
    snippet = Snippet(doc_id, index, heading, text)
    for start, end in split_sentences(text):
        snippet.sentences.append(sentence_from_text(text[start:end], start, tagger))
    return snippet


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------


def parse_document(
    raw: bytes,
    format: str,
    *,
    doc_id: str | None = None,
    title: str | None = None,
    domain: str | None = None,
    source_kind: str | None = None,
    tagger: Tagger | None = None,
) -> Document:
    """Parse raw bytes into a Document.

    ``format`` is ``"xml"`` or ``"plain"``. Explicit keyword arguments
    override metadata found in the input (the ``id``, ``domain`` and
    ``type`` attributes of the XML root). Raises ParseError on malformed
    XML (with byte position) and on input with no content.
    """
    if format == "xml":
        return _parse_xml(raw, doc_id, title, domain, source_kind, tagger)
    if format == "plain":
        return _parse_plain(raw, doc_id, title, domain, source_kind, tagger)
    raise ValueError(f"unknown format: {format!r}")


def _decode(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8 at byte {exc.start}") from exc


def _parse_plain(
    raw: bytes,
    doc_id: str | None,
    title: str | None,
    domain: str | None,
    source_kind: str | None,
    tagger: Tagger | None,
) -> Document:
    text = _decode(raw)
    blocks = [b.strip() for b in re.split(r"\n\s*\n", text)]
    blocks = [b for b in blocks if b]
    if not blocks:
        raise ParseError("no content")
    doc = Document(
        doc_id=doc_id or "",
        title=title or "",
        source_kind=source_kind or "plain-text",
        domain=domain or "general",
    )
    for i, block in enumerate(blocks):
        doc.snippets.append(_build_snippet(doc.doc_id, i, None, block, tagger))
    return doc


def _byte_position(raw: bytes, line: int, column: int) -> int:
    lines = raw.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def _element_text(elem: ET.Element) -> str:
    # itertext preserves text of unknown inline elements.
    return re.sub(r"\s+", " ", " ".join(elem.itertext())).strip()


def _collect_sections(
    sec: ET.Element, out: list[tuple[str | None, str]]
) -> None:
    """Depth-first flattening: a section's own paragraphs form one snippet,
    then nested sections follow as separate snippets."""
    title_elem = sec.find("title")
    heading = _element_text(title_elem) if title_elem is not None else None
    paragraphs: list[str] = []
    nested: list[ET.Element] = []
    for child in sec:
        if child.tag == "sec":
            nested.append(child)
        elif child.tag == "title":
            continue
        else:
            # <p> and unknown elements: text preserved as a paragraph
            text = _element_text(child)
            if text:
                paragraphs.append(text)
    if paragraphs:
        out.append((heading, "\n\n".join(paragraphs)))
    for child in nested:
        _collect_sections(child, out)


def _parse_xml(
    raw: bytes,
    doc_id: str | None,
    title: str | None,
    domain: str | None,
    source_kind: str | None,
    tagger: Tagger | None,
) -> Document:
    _decode(raw)  # enforce UTF-8 before the XML parser sees it
    try:
        root = ET.fromstring(raw)
    except ET.ParseError as exc:
        line, column = exc.position
        pos = _byte_position(raw, line, column)
        raise ParseError(
            f"malformed XML at byte {pos} (line {line}, column {column}): {exc.msg}"
        ) from exc
    if root.tag != "article":
        raise ParseError(f"expected <article> root, found <{root.tag}>")

    title_elem = root.find("title")
    body = root.find("body")
    sections: list[tuple[str | None, str]] = []
    if body is not None:
        for child in body:
            if child.tag == "sec":
                _collect_sections(child, sections)
            else:
                text = _element_text(child)
                if text:
                    sections.append((None, text))
    if not sections:
        raise ParseError("no content")

    kind = source_kind or root.get("type") or "journal-article"
    if kind not in SOURCE_KINDS:
        raise ParseError(f"unknown source kind: {kind!r}")
    doc = Document(
        doc_id=doc_id or root.get("id") or "",
        title=title or (_element_text(title_elem) if title_elem is not None else ""),
        source_kind=kind,
        domain=domain or root.get("domain") or "general",
    )
    for i, (heading, text) in enumerate(sections):
        doc.snippets.append(_build_snippet(doc.doc_id, i, heading, text, tagger))
    return doc


# ---------------------------------------------------------------------------
# Corpus serialization (JSON Lines, one document per line)
# ---------------------------------------------------------------------------


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "title": doc.title,
        "source_kind": doc.source_kind,
        "domain": doc.domain,
        "snippets": [
            {
                "index": sn.index,
                "heading": sn.heading,
                "text": sn.text,
                "sentences": [
                    {
                        "span": [s.start, s.end],
                        "tokens": [[t.text, t.start, t.end] for t in s.tokens],
                        "pos_tags": list(s.pos_tags),
                    }
                    for s in sn.sentences
                ],
            }
            for sn in doc.snippets
        ],
    }


def document_from_dict(data: dict) -> Document:
    doc = Document(
        doc_id=data["doc_id"],
        title=data["title"],
        source_kind=data["source_kind"],
        domain=data["domain"],
    )
    for sn in data["snippets"]:
        snippet = Snippet(doc.doc_id, sn["index"], sn["heading"], sn["text"])
        for s in sn["sentences"]:
            snippet.sentences.append(
                Sentence(
                    s["span"][0],
                    s["span"][1],
                    tuple(Token(t[0], t[1], t[2]) for t in s["tokens"]),
                    tuple(s["pos_tags"]),
                )
            )
        doc.snippets.append(snippet)
    return doc


def write_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False) + "\n")


def read_corpus(path) -> list[Document]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                docs.append(document_from_dict(json.loads(line)))
    return docs
