"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 protocol
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bridge, corpus, pages
from .annotate import annotate_document, read_annotations, write_annotations
from .corpus import ParseError, read_corpus, write_corpus
from .definitions import (
    BaselineModel,
    BaselineScorer,
    baseline_trainer,
    kfold_cv,
    load_labeled_jsonl,
    load_wcl,
    train_baseline,
)
from .taxonomy import FormatError, load_taxonomy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROTOCOL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1, not argparse's default 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="topicpages", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a directory of documents into a corpus file")
    p.add_argument("directory")
    p.add_argument("--format", choices=("xml", "plain"), required=True)
    p.add_argument("--domain", default=None, help="domain label for plain-text files")
    p.add_argument("--out", default="corpus.jsonl")

    p = sub.add_parser("annotate", help="annotate a corpus with taxonomy concepts")
    p.add_argument("--corpus", default="corpus.jsonl")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", default="annotations.jsonl")

    p = sub.add_parser("train-baseline", help="train the native definition scorer")
    p.add_argument("dataset", help="labeled JSONL file")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--out", default="baseline_model.json")

    p = sub.add_parser("evaluate", help="k-fold evaluation of the baseline scorer")
    p.add_argument("--dataset", choices=("wcl", "jsonl"), required=True)
    p.add_argument("--path", required=True, help="dataset file or WCL directory")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.05)

    p = sub.add_parser("build-pages", help="assemble topic pages")
    p.add_argument("--corpus", default="corpus.jsonl")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--annotations", default=None, help="reuse a previous annotation run")
    p.add_argument("--model", default=None, help="baseline model file")
    p.add_argument("--scorer", choices=("baseline", "bridge"), default=None)
    p.add_argument("--endpoint", default=None, help="bridge subprocess command or host:port")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--snippets-k", type=int, default=None)
    p.add_argument("--related-k", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--domains", default=None, help="comma-separated domain filter")
    p.add_argument("--timestamp", default=None, help="pin generated_at for reproducible output")
    p.add_argument("--out", default="pages.jsonl")

    p = sub.add_parser("render-html", help="render pages to static HTML")
    p.add_argument("pages", help="pages.jsonl file")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("mock-scorer", help="run the scripted mock scorer on stdio")
    p.add_argument("--script", default=None, help="JSON script file")

    return parser


def _cmd_ingest(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise FormatError(f"not a directory: {directory}")
    suffix = ".xml" if args.format == "xml" else ".txt"
    files = sorted(p for p in directory.iterdir() if p.suffix == suffix)
    if not files:
        raise FormatError(f"no {suffix} files in {directory}")
    docs = []
    for path in files:
        docs.append(
            corpus.parse_document(
                path.read_bytes(),
                args.format,
                doc_id=path.stem,
                domain=args.domain,
            )
        )
    write_corpus(docs, args.out)
    print(f"ingested {len(docs)} documents -> {args.out}")
    return EXIT_OK


def _cmd_annotate(args) -> int:
    docs = read_corpus(args.corpus)
    tax = load_taxonomy(args.taxonomy)
    annotations = []
    for doc in docs:
        annotations.extend(annotate_document(doc, tax))
    write_annotations(annotations, args.out)
    print(f"annotated {len(docs)} documents: {len(annotations)} annotations -> {args.out}")
    return EXIT_OK


def _cmd_train_baseline(args) -> int:
    examples = load_labeled_jsonl(args.dataset)
    model = train_baseline(examples, args.epochs, args.learning_rate)
    model.save(args.out)
    print(f"trained baseline on {len(examples)} examples -> {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    if args.dataset == "wcl":
        examples = load_wcl(args.path)
    else:
        examples = load_labeled_jsonl(args.path)
    metrics = kfold_cv(
        examples,
        args.folds,
        baseline_trainer(args.epochs, args.learning_rate),
        seed=args.seed,
    )
    print(f"{args.folds}-fold stratified CV over {len(examples)} examples")
    for label, m in sorted(metrics.per_class.items()):
        print(f"  {label}: P={m.precision:.4f} R={m.recall:.4f} F1={m.f1:.4f}")
    print(
        f"  macro: P={metrics.macro_precision:.4f} "
        f"R={metrics.macro_recall:.4f} F1={metrics.macro_f1:.4f}"
    )
    return EXIT_OK


def _make_config(args) -> pages.PipelineConfig:
    config = pages.load_config(args.config) if args.config else pages.PipelineConfig()
    if args.snippets_k is not None:
        config.snippets_k = args.snippets_k
    if args.related_k is not None:
        config.related_k = args.related_k
    if args.threshold is not None:
        config.definition_threshold = args.threshold
    if args.scorer is not None:
        config.scorer = args.scorer
    if args.endpoint is not None:
        config.scorer_endpoint = args.endpoint
    if args.domains is not None:
        config.domains = [d.strip() for d in args.domains.split(",") if d.strip()]
    if args.timestamp is not None:
        config.timestamp = args.timestamp
    return config


def _cmd_build_pages(args) -> int:
    docs = read_corpus(args.corpus)
    tax = load_taxonomy(args.taxonomy)
    config = _make_config(args)

    if args.annotations:
        annotations = read_annotations(args.annotations)
    else:
        annotations = []
        for doc in docs:
            annotations.extend(annotate_document(doc, tax))

    if args.model:
        baseline = BaselineScorer(BaselineModel.load(args.model))
    else:
        baseline = BaselineScorer(
            BaselineModel.load(Path(__file__).parent / "data" / "baseline_model.json")
        )

    scorer = baseline
    if config.scorer == "bridge":
        if not config.scorer_endpoint:
            raise _UsageError("--endpoint (or scorer_endpoint in config) required for bridge scorer")
        try:
            client = bridge.connect(config.scorer_endpoint)
        except bridge.ProtocolError as exc:
            # Scorer failures never stop the pipeline; see FallbackScorer.
            logging.getLogger(__name__).warning(
                "cannot reach bridge scorer (%s); using baseline", exc
            )
        else:
            scorer = pages.FallbackScorer(client, baseline)

    artifacts = pages.PipelineArtifacts(docs, tax, annotations)
    built = pages.build_all_pages(artifacts, scorer, config)
    pages.write_pages(built, args.out)
    print(f"built {len(built)} pages -> {args.out}")
    return EXIT_OK


def _cmd_render_html(args) -> int:
    loaded = pages.read_pages(args.pages)
    names = pages.render_site(loaded, args.out)
    print(f"rendered {len(names)} pages -> {args.out}")
    return EXIT_OK


def _cmd_mock_scorer(args) -> int:
    script = {}
    if args.script:
        script = json.loads(Path(args.script).read_text(encoding="utf-8"))
    bridge.run_mock_server(script, sys.stdin, sys.stdout)
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "annotate": _cmd_annotate,
    "train-baseline": _cmd_train_baseline,
    "evaluate": _cmd_evaluate,
    "build-pages": _cmd_build_pages,
    "render-html": _cmd_render_html,
    "mock-scorer": _cmd_mock_scorer,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ParseError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except bridge.ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
