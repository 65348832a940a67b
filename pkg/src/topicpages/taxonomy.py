"""Concept inventory: load a TSV taxonomy and index its surface forms.

File format (UTF-8, header row):
``concept_id<TAB>preferred_label<TAB>aliases<TAB>domains`` where aliases
and domains are ``|``-separated; an empty aliases column means the
preferred label is the only alias. One normalized surface form may map
to several concepts; disambiguation is the annotator's job.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field


class FormatError(ValueError):
    """Malformed data file (taxonomy, labeled datasets, config)."""


_WS_RE = re.compile(r"\s+")


def normalize(surface: str) -> str:
    """Normalization used for all surface-form matching.

    Unicode NFC + casefold (iterated to a fixed point, so normalize is
    idempotent), then internal whitespace collapsed to single spaces and
    the ends stripped.
    """
    prev = surface
    while True:
        folded = unicodedata.normalize("NFC", prev).casefold()
        if folded == prev:
            break
        prev = folded
    return _WS_RE.sub(" ", prev).strip()


@dataclass(frozen=True)
class Concept:
    concept_id: str
    preferred_label: str
    aliases: frozenset[str]  # includes the preferred label
    domains: frozenset[str]


@dataclass
class Taxonomy:
    concepts: dict[str, Concept] = field(default_factory=dict)
    surface_index: dict[str, set[str]] = field(default_factory=dict)

    def add(self, concept: Concept) -> None:
        if concept.concept_id in self.concepts:
            raise FormatError(f"duplicate concept_id: {concept.concept_id}")
        self.concepts[concept.concept_id] = concept
        for alias in concept.aliases:
            self.surface_index.setdefault(normalize(alias), set()).add(
                concept.concept_id
            )

    def lookup(self, surface: str) -> set[str]:
        """Concept ids whose alias set contains the normalized surface."""
        return set(self.surface_index.get(normalize(surface), ()))

    def __len__(self) -> int:
        return len(self.concepts)


EXPECTED_HEADER = ("concept_id", "preferred_label", "aliases", "domains")


def load_taxonomy(path) -> Taxonomy:
    """Load and index a taxonomy TSV. Raises FormatError with the line
    number on missing columns, empty fields, or duplicate concept ids."""
    tax = Taxonomy()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(h.strip() for h in header) != EXPECTED_HEADER:
            expected = "\t".join(EXPECTED_HEADER)
            raise FormatError(f"{path}: line 1: expected header {expected!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 4:
                raise FormatError(
                    f"{path}: line {lineno}: expected 4 tab-separated columns, "
                    f"got {len(cols)}"
                )
            concept_id, label, alias_col, domain_col = (c.strip() for c in cols)
            if not concept_id:
                raise FormatError(f"{path}: line {lineno}: empty concept_id")
            if not label:
                raise FormatError(f"{path}: line {lineno}: empty preferred_label")
            aliases = {a.strip() for a in alias_col.split("|") if a.strip()}
            aliases.add(label)
            domains = {d.strip() for d in domain_col.split("|") if d.strip()}
            if not domains:
                raise FormatError(f"{path}: line {lineno}: empty domains")
            try:
                tax.add(Concept(concept_id, label, frozenset(aliases), frozenset(domains)))
            except FormatError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not tax.concepts:
        raise FormatError(f"{path}: taxonomy has no concepts")
    return tax
