"""Tokenization and coarse part-of-speech tagging.

A token is a maximal run of letters, digits, and hyphens; every other
non-space character becomes a single-character PUNCT token. The bundled
tagger combines a closed-class lexicon with suffix rules and emits the
fixed coarse tag set below. Any object with a ``tag(tokens)`` method can
replace it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

TAG_SET = frozenset(
    {"NOUN", "VERB", "ADJ", "ADV", "DET", "PREP", "PRON", "NUM", "PUNCT", "OTHER"}
)

# Maximal run of alphanumerics/hyphens, otherwise one non-space char.
_TOKEN_RE = re.compile(r"(?:[^\W_]|-)+|\S")


@dataclass(frozen=True)
class Token:
    text: str
    start: int  # char offset, half-open [start, end)
    end: int


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


def tokenize(text: str) -> list[Token]:
    """Split text into tokens with character spans into ``text``."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


_LEXICON: dict[str, str] = {}
_LEXICON.update(
    dict.fromkeys(
        (
            "the a an this that these those each every either neither some any "
            "no all both another such several many few most much"
        ).split(),
        "DET",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "my your his our their whose its"
        ).split(),
        "DET",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "is are was were be been being am has have had do does did can "
            "could will would shall should may might must"
        ).split(),
        "VERB",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "of in on at by for with from to into onto over under between "
            "among through during without within against about across after "
            "before behind below beneath beside besides toward towards upon "
            "via per near above along around despite except like unlike until "
            "as"
        ).split(),
        "PREP",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "i you he she it we they me him her us them who whom which what "
            "someone anyone something anything nothing everything itself "
            "themselves"
        ).split(),
        "PRON",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "not very often widely usually also however thus therefore hence "
            "well then there here now never always sometimes typically "
            "generally highly too only more less further instead rather again "
            "even still yet almost"
        ).split(),
        "ADV",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "and or but nor so because while when although though since "
            "unless whereas whether if than"
        ).split(),
        "OTHER",
    )
)
_LEXICON.update(
    dict.fromkeys(
        (
            "new good high low small large long short same different common "
            "simple main other important possible available general special "
            "single"
        ).split(),
        "ADJ",
    )
)

_NOUN_SUFFIXES = (
    "tion", "sion", "ment", "ness", "ity", "ism", "ance", "ence", "ship",
    "logy", "ics", "ist", "ure", "ysis", "cess",
)
_ADJ_SUFFIXES = (
    "ous", "ive", "ical", "ic", "able", "ible", "ful", "less", "ary",
    "ant", "ent", "ear", "ainty",
)
_VERB_SUFFIXES = ("ize", "ise", "ify", "ing", "ed", "ates")
_ADV_SUFFIXES = ("ly",)


class RuleTagger:
    """Coarse tagger: closed-class lexicon first, then suffix rules, then NOUN."""

    def tag(self, tokens: Sequence[str]) -> list[str]:
        return [self.tag_one(t) for t in tokens]

    def tag_one(self, token: str) -> str:
        if not any(c.isalnum() for c in token):
            return "PUNCT"
        if any(c.isdigit() for c in token) and not any(c.isalpha() for c in token):
            return "NUM"
        lower = token.lower()
        tag = _LEXICON.get(lower)
        if tag is not None:
            return tag
        for suf in _ADV_SUFFIXES:
            if len(lower) > len(suf) + 2 and lower.endswith(suf):
                return "ADV"
        for suf in _NOUN_SUFFIXES:
            if len(lower) > len(suf) + 1 and lower.endswith(suf):
                return "NOUN"
        for suf in _ADJ_SUFFIXES:
            if len(lower) > len(suf) + 1 and lower.endswith(suf):
                return "ADJ"
        for suf in _VERB_SUFFIXES:
            if len(lower) > len(suf) + 1 and lower.endswith(suf):
                return "VERB"
        return "NOUN"


DEFAULT_TAGGER = RuleTagger()


def tokenize_and_tag(
    text: str, tagger: Tagger | None = None
) -> tuple[list[Token], list[str]]:
    """Tokenize one sentence and tag each token.

    Token spans are relative to ``text``.
    """
    tokens = tokenize(text)
    tags = (tagger or DEFAULT_TAGGER).tag([t.text for t in tokens])
    return tokens, tags
