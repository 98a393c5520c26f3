"""Corpus model, JSONL persistence, WikiSection import, and synthetic data.

A Document carries pre-split sentences with two parallel label vectors:
boundaries (1 marks the first sentence of a segment, position 0 always 1)
and integer topic ids constant within each segment.  Corpora are stored
as JSON-lines, one document per line.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .encoding import EmbeddingStore
from .errors import ConfigError, DataValidationError
from .fileio import atomic_write_bytes

log = logging.getLogger(__name__)

OOV_LABEL = "__oov__"


@dataclass
class Document:
    """One segmented document: sentences plus boundary and topic labels."""

    id: str
    sentences: list[str]
    boundaries: list[int]
    topics: list[int]

    @property
    def n(self) -> int:
        return len(self.sentences)

    def segment_count(self) -> int:
        return sum(self.boundaries)

    def validate(self) -> None:
        """Check all invariants, naming the document and field on failure."""
        n = len(self.sentences)
        if n < 1:
            raise DataValidationError(f"doc {self.id!r}: sentences must be non-empty")
        for name, labels in (("boundaries", self.boundaries), ("topics", self.topics)):
            if len(labels) != n:
                raise DataValidationError(
                    f"doc {self.id!r}: {name} length {len(labels)} != sentence count {n}")
        if any(b not in (0, 1) for b in self.boundaries):
            raise DataValidationError(f"doc {self.id!r}: boundaries entries must be 0 or 1")
        if self.boundaries[0] != 1:
            raise DataValidationError(
                f"doc {self.id!r}: boundaries[0] must be 1 (first sentence starts a segment)")
        if any(not isinstance(t, int) or t < 0 for t in self.topics):
            raise DataValidationError(f"doc {self.id!r}: topics must be non-negative integers")
        for i in range(1, n):
            if self.boundaries[i] == 0 and self.topics[i] != self.topics[i - 1]:
                raise DataValidationError(
                    f"doc {self.id!r}: topics change at position {i} inside a segment")

    def truncated(self, cap: int) -> "Document":
        """First cap sentences with labels cut to match; invariants survive."""
        if cap < 1:
            raise DataValidationError(f"doc {self.id!r}: truncation cap must be >= 1")
        if self.n <= cap:
            return self
        return Document(self.id, self.sentences[:cap],
                        self.boundaries[:cap], self.topics[:cap])


@dataclass
class TopicVocabulary:
    """Ordered label -> dense integer id map, fixed by the training split.

    When built by the WikiSection importer the top id is a reserved
    out-of-vocabulary slot; labels unseen at import of validation or test
    data map there and are excluded from topic-accuracy aggregation.
    """

    labels: list[str]
    _ids: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise DataValidationError("vocabulary labels must be unique")
        self._ids = {label: i for i, label in enumerate(self.labels)}

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def oov_id(self) -> int | None:
        if self.labels and self.labels[-1] == OOV_LABEL:
            return len(self.labels) - 1
        return None

    def get_id(self, label: str) -> int:
        i = self._ids.get(label)
        if i is not None:
            return i
        oov = self.oov_id
        if oov is None:
            raise DataValidationError(f"label {label!r} not in vocabulary and no OOV slot")
        return oov

    @staticmethod
    def build(labels) -> "TopicVocabulary":
        """Sorted unique labels plus the reserved OOV slot as the top id."""
        uniq = sorted(set(labels))
        if OOV_LABEL in uniq:
            raise DataValidationError(f"label {OOV_LABEL!r} is reserved")
        return TopicVocabulary(uniq + [OOV_LABEL])

    def save(self, path: str) -> None:
        payload = json.dumps({"labels": self.labels}, ensure_ascii=False, indent=2)
        atomic_write_bytes(path, payload.encode("utf-8") + b"\n")

    @staticmethod
    def load(path: str) -> "TopicVocabulary":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict) or not isinstance(obj.get("labels"), list):
            raise DataValidationError(f"{path}: vocabulary file needs a 'labels' array")
        return TopicVocabulary([str(x) for x in obj["labels"]])


# ---------------------------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------------------------

def _doc_to_json(doc: Document) -> str:
    obj = {"id": doc.id, "sentences": doc.sentences,
           "boundaries": doc.boundaries, "topics": doc.topics}
    return json.dumps(obj, ensure_ascii=False)


def save_corpus(docs, path: str) -> None:
    """Write documents as JSON-lines (one object per line, UTF-8)."""
    lines = []
    for doc in docs:
        doc.validate()
        lines.append(_doc_to_json(doc))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def load_corpus(path: str) -> list[Document]:
    """Read and validate a JSON-lines corpus; errors name the document."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataValidationError(f"{path}:{lineno}: invalid JSON: {e}") from e
            try:
                doc = Document(id=str(obj["id"]),
                               sentences=[str(s) for s in obj["sentences"]],
                               boundaries=[int(b) for b in obj["boundaries"]],
                               topics=[int(t) for t in obj["topics"]])
            except (KeyError, TypeError, ValueError) as e:
                raise DataValidationError(f"{path}:{lineno}: malformed document: {e}") from e
            doc.validate()
            if doc.id in seen:
                raise DataValidationError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    if not docs:
        raise DataValidationError(f"{path}: corpus is empty")
    return docs


def split_corpus(docs, ratios: tuple[float, float, float], seed: int):
    """Seeded shuffle then contiguous slicing into train/validation/test.

    Args:
        docs: documents to split.
        ratios: positive fractions summing to 1.
        seed: shuffle seed; identical seeds give identical splits.

    Returns:
        (train, validation, test) lists - disjoint and exhaustive.
    """
    docs = list(docs)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    order = np.random.default_rng(seed).permutation(len(docs))
    shuffled = [docs[i] for i in order]
    n = len(docs)
    cut1 = int(math.floor(ratios[0] * n + 0.5))
    cut2 = int(math.floor((ratios[0] + ratios[1]) * n + 0.5))
    train, val, test = shuffled[:cut1], shuffled[cut1:cut2], shuffled[cut2:]
    if not train or not val or not test:
        raise ConfigError(
            f"split of {n} docs at ratios {ratios} leaves an empty part "
            f"({len(train)}/{len(val)}/{len(test)})")
    return train, val, test


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------

# Words that end with '.' without ending a sentence.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "st", "no", "vs", "etc", "ca",
    "e.g", "i.e", "cf", "al", "fig", "eq", "approx", "dept", "inc",
    "jr", "sr", "vol", "pp", "vgl", "bzw", "z.b", "u.a", "ggf", "usw",
}

_SPLIT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9ÄÖÜÀ-Ý])")


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitter.

    Splits after . ! ? followed by whitespace and an uppercase letter or
    digit, except when the preceding word is a known abbreviation.  Never
    returns empty sentences.
    """
    pieces: list[str] = []
    start = 0
    for m in _SPLIT_RE.finditer(text):
        candidate = text[start:m.start()].strip()
        words = candidate.rstrip(".!?").rsplit(None, 1)
        token = words[-1].lower().lstrip("([\"'") if words else ""
        if candidate.endswith(".") and token in _ABBREVIATIONS:
            continue
        pieces.append(candidate)
        start = m.end()
    pieces.append(text[start:])
    return [p.strip() for p in pieces if p.strip()]


# ---------------------------------------------------------------------------
# WikiSection import
# ---------------------------------------------------------------------------

def import_wikisection(path: str, vocab: TopicVocabulary | None = None):
    """Convert a WikiSection release file into validated Documents.

    The release format is a JSON array of documents, each carrying the
    full article text and section annotations with character offsets and
    normalized section labels.  Every section contributes its sentences
    with boundary=1 on the first; sections with no sentences are dropped,
    as are documents with fewer than 2 segments.  Documents with bad
    annotation offsets are skipped with a warning.

    Args:
        path: release JSON file.
        vocab: existing vocabulary to map against (unseen labels go to the
            OOV slot).  When omitted, a vocabulary is built from this file.

    Returns:
        (documents, vocabulary, skipped_count)
    """
    with open(path, encoding="utf-8") as fh:
        try:
            release = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataValidationError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(release, list):
        raise DataValidationError(f"{path}: expected a JSON array of documents")

    parsed: list[tuple[str, list[str], list[int], list[str]]] = []
    skipped = 0
    for idx, entry in enumerate(release):
        doc_id = str(entry.get("id", f"doc{idx}"))
        text = entry.get("text")
        annotations = entry.get("annotations")
        if not isinstance(text, str) or not isinstance(annotations, list):
            log.warning("doc %r: missing text or annotations; skipped", doc_id)
            skipped += 1
            continue
        sentences: list[str] = []
        bounds: list[int] = []
        labels: list[str] = []
        bad = False
        for ann in sorted(annotations, key=lambda a: a.get("begin", 0)):
            begin = ann.get("begin")
            length = ann.get("length")
            label = ann.get("sectionLabel") or ann.get("sectionHeading")
            if (not isinstance(begin, int) or not isinstance(length, int)
                    or label is None or begin < 0 or length < 0
                    or begin + length > len(text)):
                log.warning("doc %r: annotation offsets out of range; skipped", doc_id)
                bad = True
                break
            section_sentences = split_sentences(text[begin:begin + length])
            if not section_sentences:
                continue
            sentences.extend(section_sentences)
            bounds.extend([1] + [0] * (len(section_sentences) - 1))
            labels.extend([str(label)] * len(section_sentences))
        if bad:
            skipped += 1
            continue
        if sum(bounds) < 2:
            skipped += 1
            continue
        parsed.append((doc_id, sentences, bounds, labels))

    if vocab is None:
        vocab = TopicVocabulary.build(
            label for _, _, _, labels in parsed for label in labels)
    docs = []
    for doc_id, sentences, bounds, labels in parsed:
        doc = Document(doc_id, sentences, bounds, [vocab.get_id(l) for l in labels])
        doc.validate()
        docs.append(doc)
    if skipped:
        log.warning("import skipped %d document(s)", skipped)
    return docs, vocab, skipped


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

def generate_synthetic(n_docs: int = 200, sentences_per_doc: int = 40,
                       n_topics: int = 4, mean_segment_len: int = 8,
                       embed_dim: int = 32, separation: float = 3.0,
                       seed: int = 0, discontinuity: float = 0.0):
    """Labeled corpus plus matching single/pairwise embedding stores.

    Each topic gets a fixed Gaussian mean vector scaled by `separation`;
    single embeddings are the topic mean plus unit Gaussian noise, and
    the pairwise embedding at position i averages the single embeddings
    of sentences i-1 and i (the first position pairs with a zero vector)
    plus noise, so cross-boundary pairs are measurably distinct and a
    segment's first sentence carries the mixture evidence at its own
    index.  Segment lengths are geometric around the mean; adjacent
    segments always get different topics and every document has at
    least two segments.

    A pre-trained pairwise encoder sees more than a topic mixture: its
    sentence-order objective marks pairs that do not follow each other
    in discourse.  `discontinuity` reproduces that signal by shifting
    every cross-boundary pairwise row (and row 0, whose predecessor is
    empty) by a fixed random unit direction scaled by the given amount;
    the default 0 leaves the purely topical construction untouched.

    Args:
        n_docs: number of documents.
        sentences_per_doc: sentences in every document.
        n_topics: number of distinct topics (K), at least 2.
        mean_segment_len: mean geometric segment length in sentences.
        embed_dim: width of each embedding store.
        separation: scale of inter-topic mean distance; 0 removes all signal.
        seed: generator seed; the corpus is a pure function of all arguments.
        discontinuity: strength of the order-violation offset on
            cross-boundary pairwise rows; 0 disables it.

    Returns:
        (documents, single_store, pairwise_store)
    """
    if n_docs < 1 or sentences_per_doc < 2 or mean_segment_len < 1 or embed_dim < 1:
        raise ConfigError("synthetic corpus parameters must be positive")
    if n_topics < 2:
        raise ConfigError(f"need at least 2 topics, got {n_topics}")
    if separation < 0:
        raise ConfigError(f"separation must be non-negative, got {separation}")
    if discontinuity < 0:
        raise ConfigError(f"discontinuity must be non-negative, got {discontinuity}")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_topics, embed_dim)) * separation
    offset = np.zeros(embed_dim, dtype=np.float32)
    if discontinuity > 0:
        # a derived stream keeps the base corpus identical whether or not
        # the offset is enabled
        direction = np.random.default_rng((seed, 1)).normal(size=embed_dim)
        offset = (discontinuity * direction
                  / np.linalg.norm(direction)).astype(np.float32)

    docs: list[Document] = []
    single_rows: dict[str, np.ndarray] = {}
    pairwise_rows: dict[str, np.ndarray] = {}
    for d in range(n_docs):
        n = sentences_per_doc
        lengths: list[int] = []
        total = 0
        while total < n:
            draw = int(rng.geometric(1.0 / mean_segment_len))
            if not lengths:
                draw = min(draw, n - 1)  # guarantee at least two segments
            draw = min(draw, n - total)
            lengths.append(draw)
            total += draw
        topics_per_seg: list[int] = []
        for _ in lengths:
            choices = [t for t in range(n_topics) if not topics_per_seg
                       or t != topics_per_seg[-1]]
            topics_per_seg.append(int(choices[rng.integers(len(choices))]))
        boundaries: list[int] = []
        topics: list[int] = []
        for seg_len, topic in zip(lengths, topics_per_seg):
            boundaries.extend([1] + [0] * (seg_len - 1))
            topics.extend([topic] * seg_len)
        doc_id = f"synth{d:04d}"
        sentences = [f"sentence {d}-{i} topic {topics[i]}" for i in range(n)]
        doc = Document(doc_id, sentences, boundaries, topics)
        doc.validate()
        docs.append(doc)

        single = (means[topics] + rng.normal(size=(n, embed_dim))).astype(np.float32)
        prev = np.vstack([np.zeros((1, embed_dim), dtype=np.float32), single[:-1]])
        pairwise = ((prev + single) / 2.0
                    + rng.normal(size=(n, embed_dim))).astype(np.float32)
        pairwise += offset * np.asarray(boundaries, dtype=np.float32)[:, None]
        single_rows[doc_id] = single
        pairwise_rows[doc_id] = pairwise

    return (docs,
            EmbeddingStore("single", embed_dim, single_rows),
            EmbeddingStore("pairwise", embed_dim, pairwise_rows))
