"""Definition candidate extraction, scoring, selection, and evaluation.

Candidates are the annotated sentences of a concept within one domain.
Any scorer mapping (concept, sentence) to [0, 1] can rank them; the
top-scored sentence above the threshold becomes the definition. The
native baseline is a logistic model over definitional cue features,
trained with full-batch gradient descent on cross-entropy from an
all-zero start, so training is deterministic.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .annotate import Annotation
from .corpus import Document, Sentence, sentence_from_text
from .tagging import tokenize
from .taxonomy import FormatError, Taxonomy, normalize

logger = logging.getLogger(__name__)

LABELS = ("good", "bad")


@dataclass(frozen=True)
class DefinitionCandidate:
    concept_id: str
    text: str
    surface: str  # the annotated surface form inside this sentence
    doc_id: str
    snippet_index: int
    sentence_index: int
    domain: str

    @property
    def provenance(self) -> tuple[str, int, int]:
        return (self.doc_id, self.snippet_index, self.sentence_index)


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: DefinitionCandidate
    score: float


@dataclass(frozen=True)
class Definition:
    text: str
    score: float
    provenance: tuple[str, int, int]  # (doc_id, snippet_index, sentence_index)


@dataclass(frozen=True)
class LabeledExample:
    concept: str
    sentence: str
    label: str  # "good" | "bad"


class Scorer(Protocol):
    name: str

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


# ---------------------------------------------------------------------------
# Candidate extraction
# ---------------------------------------------------------------------------


def extract_candidates(
    concept_id: str,
    annotations: Sequence[Annotation],
    corpus: Sequence[Document],
    domain: str,
    tax: Taxonomy,
) -> list[DefinitionCandidate]:
    """Sentences holding at least one annotation of the concept within
    documents of the domain, deduplicated by normalized sentence text
    (first provenance kept), ordered by (doc_id, snippet, sentence)."""
    if concept_id not in tax.concepts:
        raise KeyError(f"unknown concept_id: {concept_id}")
    docs = {d.doc_id: d for d in corpus if d.domain == domain}
    located: dict[tuple[str, int, int], Annotation] = {}
    for ann in annotations:
        if ann.concept_id != concept_id or ann.doc_id not in docs:
            continue
        key = (ann.doc_id, ann.snippet_index, ann.sentence_index)
        if key not in located or ann.span < located[key].span:
            located[key] = ann
    candidates: list[DefinitionCandidate] = []
    seen_text: set[str] = set()
    for key in sorted(located):
        doc_id, snippet_index, sentence_index = key
        snippet = docs[doc_id].snippets[snippet_index]
        sentence = snippet.sentences[sentence_index]
        text = snippet.text[sentence.start : sentence.end]
        norm = normalize(text)
        if norm in seen_text:
            continue
        seen_text.add(norm)
        candidates.append(
            DefinitionCandidate(
                concept_id,
                text,
                located[key].surface,
                doc_id,
                snippet_index,
                sentence_index,
                domain,
            )
        )
    return candidates


# ---------------------------------------------------------------------------
# Feature space
# ---------------------------------------------------------------------------

# Cue token sequences searched in a window after the concept mention.
_CUES: tuple[tuple[str, tuple[tuple[str, ...], ...]], ...] = (
    ("cue_is_a", (("is", "a"), ("are", "a"), ("is", "an"), ("are", "an"))),
    ("cue_is_defined_as", (("is", "defined", "as"), ("are", "defined", "as"))),
    ("cue_refers_to", (("refers", "to"), ("refer", "to"))),
    ("cue_means", (("means",),)),
    ("cue_is_the", (("is", "the"), ("are", "the"))),
    ("cue_denotes", (("denotes",),)),
    ("cue_is_called", (("is", "called"), ("are", "called"))),
)
CUE_WINDOW = 4  # cue must start within this many tokens after the mention

_LENGTH_BUCKETS = ((0, 8), (8, 20), (20, 40), (40, 10**9))
_POS_BIGRAMS = (("DET", "NOUN"), ("VERB", "DET"), ("NOUN", "PREP"))
_BIGRAM_COUNT_CAP = 5.0
_COPULAS = frozenset({"is", "are", "was", "were", "be", "been", "being", "am"})

FEATURE_NAMES: tuple[str, ...] = (
    tuple(name for name, _ in _CUES)
    + ("concept_at_start", "concept_rel_position")
    + tuple(f"len_bucket_{lo}_{hi}" for lo, hi in _LENGTH_BUCKETS)
    + ("copula_present",)
    + tuple(f"bigram_{a}_{b}".lower() for a, b in _POS_BIGRAMS)
    + ("pronoun_subject",)
)
FEATURE_DIM = len(FEATURE_NAMES)
FEATURE_SPACE_VERSION = "cue-pos-v1"


def _find_mention(concept_tokens: tuple[str, ...], tokens: Sequence[str]) -> int:
    norm = [normalize(t) for t in tokens]
    n = len(concept_tokens)
    for i in range(len(norm) - n + 1):
        if tuple(norm[i : i + n]) == concept_tokens:
            return i
    return -1


def _sentence_level_features(x: np.ndarray, norm_tokens: list[str], tags: list[str]) -> None:
    """Fill the mention-independent features (buckets, copula, POS bigrams,
    pronoun subject) into x at their fixed offsets."""
    idx = len(_CUES) + 2
    for lo, hi in _LENGTH_BUCKETS:
        x[idx] = 1.0 if lo <= len(norm_tokens) < hi else 0.0
        idx += 1
    x[idx] = 1.0 if any(t in _COPULAS for t in norm_tokens) else 0.0
    idx += 1
    for a, b in _POS_BIGRAMS:
        count = sum(
            1 for i in range(len(tags) - 1) if tags[i] == a and tags[i + 1] == b
        )
        x[idx] = min(float(count), _BIGRAM_COUNT_CAP)
        idx += 1
    first_word = next((i for i, t in enumerate(tags) if t != "PUNCT"), None)
    x[idx] = 1.0 if first_word is not None and tags[first_word] == "PRON" else 0.0


def featurize(concept_surface: str, sentence: Sentence) -> np.ndarray:
    """Fixed-width feature vector for a (concept, sentence) pair.

    Raises ValueError when the concept surface does not occur in the
    sentence on token boundaries.
    """
    tokens = [t.text for t in sentence.tokens]
    tags = list(sentence.pos_tags)
    concept_tokens = tuple(normalize(t.text) for t in tokenize(concept_surface))
    start = _find_mention(concept_tokens, tokens)
    if start < 0 or not concept_tokens or not tokens:
        raise ValueError(
            f"concept {concept_surface!r} not present in sentence on token boundaries"
        )
    end = start + len(concept_tokens)

    x = np.zeros(FEATURE_DIM, dtype=np.float64)
    norm_tokens = [normalize(t) for t in tokens]
    for idx, (_, variants) in enumerate(_CUES):
        fired = 0.0
        for offset in range(CUE_WINDOW):
            pos = end + offset
            for variant in variants:
                if tuple(norm_tokens[pos : pos + len(variant)]) == variant:
                    fired = 1.0
                    break
            if fired:
                break
        x[idx] = fired

    at_start = start == 0 or (start == 1 and tags[0] == "DET")
    x[len(_CUES)] = 1.0 if at_start else 0.0
    x[len(_CUES) + 1] = start / len(tokens)
    _sentence_level_features(x, norm_tokens, tags)
    return x


# ---------------------------------------------------------------------------
# Baseline classifier
# ---------------------------------------------------------------------------


@dataclass
class BaselineModel:
    weights: np.ndarray  # shape (FEATURE_DIM,)
    bias: float
    feature_version: str = FEATURE_SPACE_VERSION

    def __post_init__(self) -> None:
        if self.feature_version == FEATURE_SPACE_VERSION and len(self.weights) != FEATURE_DIM:
            raise ValueError(
                f"weight vector length {len(self.weights)} does not match "
                f"feature space {FEATURE_SPACE_VERSION} ({FEATURE_DIM})"
            )

    def save(self, path) -> None:
        payload = {
            "feature_version": self.feature_version,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "BaselineModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            np.asarray(data["weights"], dtype=np.float64),
            float(data["bias"]),
            data["feature_version"],
        )


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def cross_entropy_loss(
    weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray
) -> float:
    """Mean cross-entropy of the logistic model on features x, labels y."""
    p = _sigmoid(x @ weights + bias)
    eps = 1e-12
    return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))


def loss_gradient(
    weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    p = _sigmoid(x @ weights + bias)
    err = p - y
    return x.T @ err / len(y), float(np.mean(err))


def _featurize_dataset(
    examples: Sequence[LabeledExample],
) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    labels = []
    for ex in examples:
        sentence = sentence_from_text(ex.sentence)
        try:
            rows.append(featurize(ex.concept, sentence))
        except ValueError:
            # Concept surface absent (noisy data): position features zero out.
            rows.append(_featurize_no_mention(sentence))
        labels.append(1.0 if ex.label == "good" else 0.0)
    return np.vstack(rows), np.asarray(labels)


def _featurize_no_mention(sentence: Sentence) -> np.ndarray:
    """Sentence-level features only; cue and position features stay zero."""
    x = np.zeros(FEATURE_DIM, dtype=np.float64)
    if sentence.tokens:
        norm_tokens = [normalize(t.text) for t in sentence.tokens]
        _sentence_level_features(x, norm_tokens, list(sentence.pos_tags))
    return x


def train_baseline(
    train: Sequence[LabeledExample],
    epochs: int = 500,
    learning_rate: float = 0.05,
) -> BaselineModel:
    """Fit the logistic baseline with deterministic full-batch descent."""
    labels = {ex.label for ex in train}
    if not train or labels != set(LABELS):
        raise ValueError("training set must contain both 'good' and 'bad' examples")
    x, y = _featurize_dataset(train)
    w = np.zeros(FEATURE_DIM)
    b = 0.0
    for _ in range(epochs):
        gw, gb = loss_gradient(w, b, x, y)
        w -= learning_rate * gw
        b -= learning_rate * gb
    return BaselineModel(w, b)


def training_loss_curve(
    train: Sequence[LabeledExample], epochs: int, learning_rate: float
) -> list[float]:
    """Loss before each update plus the final loss; used by descent checks."""
    x, y = _featurize_dataset(train)
    w = np.zeros(FEATURE_DIM)
    b = 0.0
    curve = []
    for _ in range(epochs):
        curve.append(cross_entropy_loss(w, b, x, y))
        gw, gb = loss_gradient(w, b, x, y)
        w -= learning_rate * gw
        b -= learning_rate * gb
    curve.append(cross_entropy_loss(w, b, x, y))
    return curve


class BaselineScorer:
    """Scorer backed by a BaselineModel."""

    def __init__(self, model: BaselineModel) -> None:
        self.model = model
        self.name = "baseline"

    def score(self, concept: str, sentence_text: str) -> float:
        sentence = sentence_from_text(sentence_text)
        try:
            x = featurize(concept, sentence)
        except ValueError:
            x = _featurize_no_mention(sentence)
        return float(_sigmoid(x @ self.model.weights + self.model.bias))

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(c, s) for c, s in pairs]


def score(scorer: Scorer, concept: str, sentence_text: str) -> float:
    """Score one (concept, sentence) pair with any scorer."""
    return scorer.score_pairs([(concept, sentence_text)])[0]


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

DEFAULT_THRESHOLD = 0.5


def select_definition(
    scored: Sequence[ScoredCandidate], threshold: float = DEFAULT_THRESHOLD
) -> Definition | None:
    """Top-scored candidate, or None when empty or below the threshold.
    Ties keep the earliest candidate in provenance order."""
    best: ScoredCandidate | None = None
    for sc in scored:
        if best is None or sc.score > best.score:
            best = sc
    if best is None or best.score < threshold:
        return None
    return Definition(best.candidate.text, best.score, best.candidate.provenance)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalMetrics:
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: dict[tuple[str, str], int]  # (gold, predicted) -> count


def evaluate(predictions: Sequence[tuple[str, str]]) -> EvalMetrics:
    """Confusion-matrix metrics from (predicted, gold) label pairs.

    Precision or recall is 0 when its denominator is 0; macro values are
    the unweighted mean over classes.
    """
    if not predictions:
        raise ValueError("no predictions to evaluate")
    classes = sorted({p for p, _ in predictions} | {g for _, g in predictions})
    confusion: dict[tuple[str, str], int] = {}
    for predicted, gold in predictions:
        confusion[(gold, predicted)] = confusion.get((gold, predicted), 0) + 1
    per_class: dict[str, ClassMetrics] = {}
    for c in classes:
        tp = confusion.get((c, c), 0)
        fp = sum(n for (g, p), n in confusion.items() if p == c and g != c)
        fn = sum(n for (g, p), n in confusion.items() if g == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = ClassMetrics(precision, recall, f1, tp, fp, fn)
    k = len(classes)
    return EvalMetrics(
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / k,
        macro_recall=sum(m.recall for m in per_class.values()) / k,
        macro_f1=sum(m.f1 for m in per_class.values()) / k,
        confusion=confusion,
    )


TrainerFn = Callable[[list[LabeledExample]], Scorer]


def baseline_trainer(
    epochs: int = 500, learning_rate: float = 0.05
) -> TrainerFn:
    def train(examples: list[LabeledExample]) -> Scorer:
        return BaselineScorer(train_baseline(examples, epochs, learning_rate))

    return train


def stratified_folds(
    labels: Sequence[str], k: int, seed: int = 42
) -> list[int]:
    """Fold id per example: indices of each label, in dataset order, are
    shuffled by random.Random(seed) and dealt round-robin over k folds."""
    by_label: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        by_label.setdefault(label, []).append(i)
    fold_of = [0] * len(labels)
    for label in sorted(by_label):
        indices = by_label[label]
        random.Random(seed).shuffle(indices)
        for pos, idx in enumerate(indices):
            fold_of[idx] = pos % k
    return fold_of


def kfold_cv(
    dataset: Sequence[LabeledExample],
    k: int,
    trainer: TrainerFn,
    seed: int = 42,
    threshold: float = DEFAULT_THRESHOLD,
) -> EvalMetrics:
    """Stratified k-fold cross-validation; unweighted mean of per-fold
    metrics (confusion counts are summed over folds)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(dataset) < k:
        raise ValueError(f"dataset of {len(dataset)} examples cannot fill {k} folds")
    fold_of = stratified_folds([ex.label for ex in dataset], k, seed)
    fold_metrics: list[EvalMetrics] = []
    confusion: dict[tuple[str, str], int] = {}
    for fold in range(k):
        train = [ex for ex, f in zip(dataset, fold_of) if f != fold]
        held_out = [ex for ex, f in zip(dataset, fold_of) if f == fold]
        for part, name in ((train, "training"), (held_out, "evaluation")):
            if len({ex.label for ex in part}) < 2:
                raise ValueError(
                    f"fold {fold}: {name} split has a single class; "
                    f"dataset too small or imbalanced for k={k}"
                )
        model = trainer(train)
        pairs = [(ex.concept, ex.sentence) for ex in held_out]
        scores = model.score_pairs(pairs)
        predictions = [
            ("good" if s >= threshold else "bad", ex.label)
            for s, ex in zip(scores, held_out)
        ]
        m = evaluate(predictions)
        fold_metrics.append(m)
        for key, n in m.confusion.items():
            confusion[key] = confusion.get(key, 0) + n

    classes = sorted({c for m in fold_metrics for c in m.per_class})

    def mean(values: list[float]) -> float:
        return sum(values) / len(values)

    per_class = {
        c: ClassMetrics(
            mean([m.per_class[c].precision for m in fold_metrics if c in m.per_class]),
            mean([m.per_class[c].recall for m in fold_metrics if c in m.per_class]),
            mean([m.per_class[c].f1 for m in fold_metrics if c in m.per_class]),
            sum(m.per_class[c].tp for m in fold_metrics if c in m.per_class),
            sum(m.per_class[c].fp for m in fold_metrics if c in m.per_class),
            sum(m.per_class[c].fn for m in fold_metrics if c in m.per_class),
        )
        for c in classes
    }
    return EvalMetrics(
        per_class=per_class,
        macro_precision=mean([m.macro_precision for m in fold_metrics]),
        macro_recall=mean([m.macro_recall for m in fold_metrics]),
        macro_f1=mean([m.macro_f1 for m in fold_metrics]),
        confusion=confusion,
    )


# ---------------------------------------------------------------------------
# Dataset loaders
# ---------------------------------------------------------------------------

WCL_EXPECTED_COUNT = 4619


def load_labeled_jsonl(path) -> list[LabeledExample]:
    """JSON Lines: {"concept": str, "sentence": str, "label": "good"|"bad"}."""
    examples: list[LabeledExample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                concept, sentence, label = data["concept"], data["sentence"], data["label"]
            except (KeyError, TypeError) as exc:
                raise FormatError(
                    f"{path}: line {lineno}: expected keys concept/sentence/label"
                ) from exc
            if label not in LABELS:
                raise FormatError(
                    f"{path}: line {lineno}: label must be 'good' or 'bad', got {label!r}"
                )
            examples.append(LabeledExample(concept, sentence, label))
    if not examples:
        raise FormatError(f"{path}: no labeled examples found")
    return examples


def _parse_wcl_file(path: Path, label: str) -> list[LabeledExample]:
    """WCL native annotated-sentence format: '! <term>' lines introduce the
    concept; the following line is the sentence, with the term marked by a
    TARGET placeholder."""
    examples: list[LabeledExample] = []
    concept: str | None = None
    for line in path.read_text(encoding="utf-8", errors="replace").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("!"):
            concept = line[1:].strip().replace("_", " ")
            continue
        if concept is None:
            continue
        sentence = line.replace("TARGET", concept) if "TARGET" in line else line
        examples.append(LabeledExample(concept, sentence, label))
        concept = None
    return examples


def load_wcl(path) -> list[LabeledExample]:
    """Load the WCL definition dataset from its distribution directory
    (wiki_good.txt / wiki_bad.txt). Warns when the total differs from the
    published 4,619 sentences."""
    root = Path(path)
    if not root.exists():
        raise FormatError(f"WCL path does not exist: {root}")
    examples: list[LabeledExample] = []
    for name, label in (("wiki_good.txt", "good"), ("wiki_bad.txt", "bad")):
        hits = sorted(root.rglob(name)) if root.is_dir() else []
        if root.is_file() and root.name == name:
            hits = [root]
        if not hits:
            raise FormatError(f"{root}: missing {name}")
        examples.extend(_parse_wcl_file(hits[0], label))
    if not examples:
        raise FormatError(f"{root}: WCL files contain no sentences")
    if len(examples) != WCL_EXPECTED_COUNT:
        logger.warning(
            "WCL: expected %d sentences, loaded %d (distribution variant?)",
            WCL_EXPECTED_COUNT,
            len(examples),
        )
    counts = {label: sum(1 for e in examples if e.label == label) for label in LABELS}
    logger.info("WCL class counts: %s", counts)
    return examples
