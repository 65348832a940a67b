"""Topic page assembly, persistence, and static HTML rendering.

A page is built per (concept, domain): the top-scored candidate sentence
becomes the definition (absent when below the threshold), snippets are
ranked by the location-aware term-frequency score, and related concepts
by snippet co-occurrence within the domain. Output is JSON Lines with a
fixed field order, deterministic given a pinned timestamp.
"""

from __future__ import annotations

import html
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .annotate import Annotation
from .bridge import ProtocolError
from .corpus import Document
from .definitions import (
    DEFAULT_THRESHOLD,
    Definition,
    ScoredCandidate,
    Scorer,
    extract_candidates,
    select_definition,
)
from .related import (
    DEFAULT_RELATED_K,
    cooccurrence_counts,
    group_by_snippet,
    top_related,
)
from .snippets import DEFAULT_SNIPPETS_K, rank_snippets, score_snippet
from .taxonomy import FormatError, Taxonomy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TopicPage:
    concept_id: str
    preferred_label: str
    domain: str
    definition: Definition | None
    snippets: list[dict]  # {text, score, provenance: {doc_id, snippet_index}}
    related: list[dict]  # {concept_id, label, count}
    generated_at: str
    pipeline_version: str


@dataclass
class PipelineConfig:
    snippets_k: int = DEFAULT_SNIPPETS_K
    related_k: int = DEFAULT_RELATED_K
    definition_threshold: float = DEFAULT_THRESHOLD
    scorer: str = "baseline"  # "baseline" | "bridge"
    scorer_endpoint: str = ""
    domains: list[str] = field(default_factory=list)  # empty = all
    timestamp: str = ""  # pinned generated_at; empty = now (UTC)

    def resolved_timestamp(self) -> str:
        if self.timestamp:
            return self.timestamp
        from datetime import datetime, timezone

        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


_CONFIG_KEYS = {
    "snippets_k": int,
    "related_k": int,
    "definition_threshold": float,
    "scorer": str,
    "scorer_endpoint": str,
    "domains": str,
    "timestamp": str,
}


def load_config(path) -> PipelineConfig:
    """Flat key=value config file; '#' starts a comment line."""
    config = PipelineConfig()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}: line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise FormatError(f"{path}: line {lineno}: unknown key {key!r}")
        try:
            if key == "domains":
                config.domains = [d.strip() for d in value.split(",") if d.strip()]
            else:
                setattr(config, key, _CONFIG_KEYS[key](value))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: bad value for {key}: {exc}") from exc
    return config


class FallbackScorer:
    """Uses the bridge scorer; on any protocol error, logs the incident
    and falls back to the baseline for the rest of the run."""

    def __init__(self, primary: Scorer, fallback: Scorer) -> None:
        self.primary: Scorer | None = primary
        self.fallback = fallback
        self.name = primary.name

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if self.primary is not None:
            try:
                return self.primary.score_pairs(pairs)
            except ProtocolError as exc:
                logger.warning(
                    "scorer bridge failed (%s); falling back to baseline", exc
                )
                self.primary = None
                self.name = self.fallback.name
        return self.fallback.score_pairs(pairs)


@dataclass
class PipelineArtifacts:
    """Everything page building needs, with derived indexes."""

    corpus: list[Document]
    taxonomy: Taxonomy
    annotations: list[Annotation]

    def __post_init__(self) -> None:
        self.docs_by_id = {d.doc_id: d for d in self.corpus}
        self.snippet_groups = group_by_snippet(self.annotations)

    def concept_domains(self, concept_id: str) -> list[str]:
        """Domains of documents in which the concept is annotated."""
        domains = {
            self.docs_by_id[a.doc_id].domain
            for a in self.annotations
            if a.concept_id == concept_id and a.doc_id in self.docs_by_id
        }
        return sorted(domains)


def build_page(
    concept_id: str,
    artifacts: PipelineArtifacts,
    scorer: Scorer,
    config: PipelineConfig,
    domain: str,
) -> TopicPage | None:
    """Assemble the page for one (concept, domain); None when the concept
    has no annotation in that domain."""
    tax = artifacts.taxonomy
    if concept_id not in tax.concepts:
        raise KeyError(f"unknown concept_id: {concept_id}")
    concept = tax.concepts[concept_id]

    domain_docs = [d for d in artifacts.corpus if d.domain == domain]
    candidates = extract_candidates(
        concept_id, artifacts.annotations, artifacts.corpus, domain, tax
    )

    definition: Definition | None = None
    if candidates:
        scores = scorer.score_pairs([(c.surface, c.text) for c in candidates])
        scored = [ScoredCandidate(c, s) for c, s in zip(candidates, scores)]
        definition = select_definition(scored, config.definition_threshold)

    snippet_scores = []
    has_any_annotation = False
    for doc in domain_docs:
        for snippet in doc.snippets:
            if snippet.token_count < 1:
                continue
            s = score_snippet(concept_id, snippet, artifacts.annotations)
            if s.tf > 0:
                has_any_annotation = True
            snippet_scores.append(s)
    if not has_any_annotation:
        return None
    top_snippets = rank_snippets(snippet_scores, config.snippets_k)

    domain_doc_ids = {d.doc_id for d in domain_docs}
    domain_groups = {
        key: present
        for key, present in artifacts.snippet_groups.items()
        if key[0] in domain_doc_ids
    }
    table = cooccurrence_counts(concept_id, domain_groups)
    related_ids = top_related(table, config.related_k)

    snippets_out = []
    for s in top_snippets:
        snippet = artifacts.docs_by_id[s.doc_id].snippets[s.snippet_index]
        snippets_out.append(
            {
                "text": snippet.text,
                "score": s.score,
                "provenance": {"doc_id": s.doc_id, "snippet_index": s.snippet_index},
            }
        )
    related_out = [
        {
            "concept_id": cid,
            "label": tax.concepts[cid].preferred_label,
            "count": table.counts[cid],
        }
        for cid in related_ids
    ]
    return TopicPage(
        concept_id=concept_id,
        preferred_label=concept.preferred_label,
        domain=domain,
        definition=definition,
        snippets=snippets_out,
        related=related_out,
        generated_at=config.resolved_timestamp(),
        pipeline_version=__version__,
    )


def build_all_pages(
    artifacts: PipelineArtifacts, scorer: Scorer, config: PipelineConfig
) -> list[TopicPage]:
    """Pages for every (annotated concept, domain) pair, in deterministic
    (concept_id, domain) order; optionally restricted to config.domains."""
    annotated = sorted({a.concept_id for a in artifacts.annotations})
    pages = []
    for concept_id in annotated:
        for domain in artifacts.concept_domains(concept_id):
            if config.domains and domain not in config.domains:
                continue
            page = build_page(concept_id, artifacts, scorer, config, domain)
            if page is not None:
                pages.append(page)
    return pages


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def page_to_dict(page: TopicPage) -> dict:
    definition = None
    if page.definition is not None:
        doc_id, snippet_index, sentence_index = page.definition.provenance
        definition = {
            "text": page.definition.text,
            "score": page.definition.score,
            "provenance": {
                "doc_id": doc_id,
                "snippet_index": snippet_index,
                "sentence_index": sentence_index,
            },
        }
    return {
        "concept_id": page.concept_id,
        "preferred_label": page.preferred_label,
        "domain": page.domain,
        "definition": definition,
        "snippets": page.snippets,
        "related": page.related,
        "generated_at": page.generated_at,
        "pipeline_version": page.pipeline_version,
    }


def page_from_dict(data: dict) -> TopicPage:
    definition = None
    if data["definition"] is not None:
        d = data["definition"]
        definition = Definition(
            d["text"],
            d["score"],
            (
                d["provenance"]["doc_id"],
                d["provenance"]["snippet_index"],
                d["provenance"]["sentence_index"],
            ),
        )
    return TopicPage(
        concept_id=data["concept_id"],
        preferred_label=data["preferred_label"],
        domain=data["domain"],
        definition=definition,
        snippets=data["snippets"],
        related=data["related"],
        generated_at=data["generated_at"],
        pipeline_version=data["pipeline_version"],
    )


def write_pages(pages: Sequence[TopicPage], path) -> None:
    """JSON Lines, one page per line, UTF-8, fixed field order."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for page in pages:
                fh.write(json.dumps(page_to_dict(page), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write pages to {path}: {exc}") from exc


def read_pages(path) -> list[TopicPage]:
    pages = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pages.append(page_from_dict(json.loads(line)))
    return pages


# ---------------------------------------------------------------------------
# HTML rendering
# ---------------------------------------------------------------------------

NO_DEFINITION_MARKER = "No definition available for this concept."

DEFAULT_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
</head>
<body>
{body}
</body>
</html>
"""


def page_filename(concept_id: str, domain: str) -> str:
    def slug(s: str) -> str:
        return re.sub(r"[^a-z0-9]+", "-", s.lower()).strip("-") or "x"

    return f"{slug(concept_id)}__{slug(domain)}.html"


def render_html(page: TopicPage, template: str = DEFAULT_TEMPLATE) -> str:
    """Static HTML with Definition, Related Terms, and Snippets sections.

    Snippets carry their provenance identifier; related terms link to the
    sibling page files of the same domain.
    """
    esc = html.escape
    parts: list[str] = []
    parts.append(f"<h1>{esc(page.preferred_label)}</h1>")
    parts.append(
        f'<p class="meta">Domain: {esc(page.domain)} · Generated: '
        f"{esc(page.generated_at)} · Pipeline: {esc(page.pipeline_version)}</p>"
    )

    parts.append("<section id=\"definition\">")
    parts.append("<h2>Definition</h2>")
    if page.definition is None:
        parts.append(f'<p class="no-definition">{esc(NO_DEFINITION_MARKER)}</p>')
    else:
        doc_id, snippet_index, sentence_index = page.definition.provenance
        parts.append(f"<blockquote>{esc(page.definition.text)}</blockquote>")
        parts.append(
            f'<p class="provenance">Source: {esc(doc_id)} · section {snippet_index}'
            f" · sentence {sentence_index} · score {page.definition.score:.4f}</p>"
        )
    parts.append("</section>")

    parts.append("<section id=\"related\">")
    parts.append("<h2>Related Terms</h2>")
    if page.related:
        parts.append("<ul>")
        for entry in page.related:
            href = page_filename(entry["concept_id"], page.domain)
            parts.append(
                f'<li><a href="{esc(href)}">{esc(entry["label"])}</a>'
                f' ({entry["count"]} shared snippets)</li>'
            )
        parts.append("</ul>")
    else:
        parts.append("<p>No related terms found.</p>")
    parts.append("</section>")

    parts.append("<section id=\"snippets\">")
    parts.append("<h2>Snippets</h2>")
    if page.snippets:
        parts.append("<ol>")
        for entry in page.snippets:
            prov = entry["provenance"]
            parts.append("<li>")
            parts.append(f"<p>{esc(entry['text'])}</p>")
            parts.append(
                f'<p class="provenance">Source: {esc(prov["doc_id"])} · section '
                f'{prov["snippet_index"]} · score {entry["score"]:.4f}</p>'
            )
            parts.append("</li>")
        parts.append("</ol>")
    else:
        parts.append("<p>No snippets found.</p>")
    parts.append("</section>")

    body = "\n".join(parts)
    title = f"{page.preferred_label} ({page.domain})"
    return template.format(title=esc(title), body=body)


def render_site(pages: Sequence[TopicPage], out_dir, template: str = DEFAULT_TEMPLATE) -> list[str]:
    """Render every page to out_dir; returns the written file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for page in pages:
        name = page_filename(page.concept_id, page.domain)
        (out / name).write_text(render_html(page, template), encoding="utf-8")
        names.append(name)
    return names
