"""Topic page generation: annotate a corpus with taxonomy concepts, pick a
definition sentence per concept, rank snippets, and extract related concepts."""

__version__ = "0.1.0"
