"""Batched extraction of frozen [CLS] vectors from pre-trained encoders.

An ExportJob names a corpus, an encoder, and which vector kind to
extract.  The single kind encodes each sentence alone; the pairwise kind
encodes each sentence together with a neighbor under the encoder's
two-segment input convention, so the segment-type ids distinguish the
two sides.  Forward orientation pairs a sentence with its successor and
the last sentence with the empty string; backward pairs it with its
predecessor and the first sentence with the empty string.  Either way
the file holds exactly one row per corpus sentence, in corpus order, and
a final cross-check pass verifies that alignment before anything is
written.

The encoder is used as-is: inference mode, no gradients, no parameter
updates.  By default each row is the final hidden state at the
classification position (located by token id, since not every family
puts it first); the pooled option takes the encoder's own pooled output
instead.  When the tokenizer rejects a sentence the exporter warns,
writes a zero vector in its place, and counts the substitution, keeping
row alignment intact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch

from .errors import (ModelLoadError, OutputFormatError, RowOrderError,
                     TokenizationWarning, UsageError)
from .formats import KINDS, read_corpus, write_embeddings

ORIENTATIONS = ("forward", "backward")

# tokenizers report a huge sentinel for model_max_length when the limit
# was never set; treat anything above this as "consult the model config"
_LIMIT_SENTINEL = 1_000_000


@dataclass
class ExportJob:
    """One export run: corpus in, encoder applied, T2EMB out."""

    corpus: str
    model: str
    kind: str
    output: str
    orientation: str = "forward"
    batch_size: int = 32
    pooled: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.orientation not in ORIENTATIONS:
            raise UsageError(
                f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if self.batch_size < 1:
            raise UsageError(f"batch size must be at least 1, got {self.batch_size}")


@dataclass
class ExportResult:
    """What an export run produced."""

    docs: int
    rows: int
    dim: int
    zero_substitutions: int


def _load_encoder(model_id: str):
    """Load tokenizer and encoder, frozen, in evaluation mode."""
    from transformers import AutoModel, AutoTokenizer
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as e:
        raise ModelLoadError(f"cannot load encoder {model_id!r}: {e}") from e
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return tokenizer, model


def _token_limit(tokenizer, model) -> int:
    """The encoder's input length cap, from tokenizer or model config."""
    limit = getattr(tokenizer, "model_max_length", None)
    if isinstance(limit, int) and 0 < limit < _LIMIT_SENTINEL:
        return limit
    fallback = getattr(model.config, "max_position_embeddings", 512)
    return int(fallback)


def _encode_text(tokenizer, text: str, text_pair: str | None, limit: int):
    """Tokenize one sentence or sentence pair, truncated to limit."""
    return tokenizer(text, text_pair=text_pair, truncation=True, max_length=limit)


def _pair_texts(sentences: list[str], orientation: str) -> list[tuple[str, str]]:
    """Neighbor pairs per orientation; the edge pairs with empty text."""
    if orientation == "forward":
        return [(s, sentences[i + 1] if i + 1 < len(sentences) else "")
                for i, s in enumerate(sentences)]
    return [(sentences[i - 1] if i > 0 else "", s)
            for i, s in enumerate(sentences)]


def _classification_vectors(input_ids: torch.Tensor, hidden: torch.Tensor,
                            cls_token_id: int) -> torch.Tensor:
    """Final hidden state at each sequence's classification token."""
    mask = input_ids.eq(cls_token_id)
    if not bool(mask.sum(dim=1).eq(1).all()):
        raise OutputFormatError(
            "expected exactly one classification token per encoded sequence")
    positions = mask.int().argmax(dim=1)
    return hidden[torch.arange(hidden.shape[0]), positions]


def export(job: ExportJob) -> ExportResult:
    """Run one export job and write its T2EMB file.

    Args:
        job: validated job description.

    Returns:
        Row, document, and substitution counts plus the embedding width.

    Raises:
        CorpusFormatError: the corpus violates the JSONL contract.
        ModelLoadError: the encoder or tokenizer cannot be loaded, or the
            encoder does not state its hidden width or classification
            token.
        UsageError: the pooled option was requested from an encoder that
            produces no pooled output.
        RowOrderError: the final cross-check found rows out of order.
        OSError: the corpus cannot be read or the output cannot be written.

    Warns:
        TokenizationWarning: once per sentence the tokenizer rejected;
            that row is written as a zero vector and counted in the
            result.
    """
    corpus = read_corpus(job.corpus)
    tokenizer, model = _load_encoder(job.model)
    limit = _token_limit(tokenizer, model)
    dim = getattr(model.config, "hidden_size", None)
    if not isinstance(dim, int) or dim < 1:
        raise ModelLoadError(
            f"encoder {job.model!r} does not state its hidden width")
    cls_token_id = getattr(tokenizer, "cls_token_id", None)
    if not job.pooled and cls_token_id is None:
        raise ModelLoadError(
            f"encoder {job.model!r} has no classification token to extract")

    # tokenize per sentence so one bad input costs one row, not the run;
    # every row keeps its (doc, sentence) tag for the final order check
    pending: list[tuple[int, int, int, object]] = []
    order: list[tuple[int, int] | None] = []
    substituted = 0
    for d, (doc_id, sentences) in enumerate(corpus):
        if job.kind == "single":
            texts: list[tuple[str, str | None]] = [(s, None) for s in sentences]
        else:
            texts = _pair_texts(sentences, job.orientation)
        for i, (first, second) in enumerate(texts):
            flat = len(order)
            try:
                encoding = _encode_text(tokenizer, first, second, limit)
            except Exception as e:
                warnings.warn(
                    f"doc {doc_id!r} sentence {i}: tokenization failed ({e}); "
                    "substituting a zero vector", TokenizationWarning, stacklevel=2)
                substituted += 1
                order.append((d, i))  # zero row, already in place
                continue
            pending.append((flat, d, i, encoding))
            order.append(None)

    rows = np.zeros((len(order), dim), dtype=np.float32)
    with torch.inference_mode():
        for start in range(0, len(pending), job.batch_size):
            chunk = pending[start:start + job.batch_size]
            batch = tokenizer.pad([enc for _, _, _, enc in chunk],
                                  return_tensors="pt")
            outputs = model(**batch)
            if job.pooled:
                vectors = getattr(outputs, "pooler_output", None)
                if vectors is None:
                    raise UsageError(
                        "this encoder produces no pooled output; "
                        "rerun without the pooled option")
            else:
                vectors = _classification_vectors(
                    batch["input_ids"], outputs.last_hidden_state, cls_token_id)
            if vectors.shape[-1] != dim:
                raise OutputFormatError(
                    f"encoder emitted width {vectors.shape[-1]}, "
                    f"its configuration promised {dim}")
            block = vectors.cpu().numpy().astype(np.float32, copy=False)
            for (flat, d, i, _), vec in zip(chunk, block):
                rows[flat] = vec
                order[flat] = (d, i)

    expected = [(d, i) for d, (_, sentences) in enumerate(corpus)
                for i in range(len(sentences))]
    if order != expected:
        raise RowOrderError("rows do not line up with corpus sentence order")

    docs_out: list[tuple[str, np.ndarray]] = []
    offset = 0
    for doc_id, sentences in corpus:
        docs_out.append((doc_id, rows[offset:offset + len(sentences)]))
        offset += len(sentences)
    write_embeddings(job.output, job.kind, docs_out)
    return ExportResult(docs=len(corpus), rows=len(order), dim=dim,
                        zero_substitutions=substituted)
