"""Frozen sentence-embedding providers and the composed document matrix.

The model consumes one matrix S per document: the horizontal
concatenation [single block | pairwise block] of per-sentence vectors
from two providers.  Providers are either precomputed stores loaded from
T2EMB files (the transport format written by embedding exporters) or the
built-in seeded hash encoder, which stands in for pre-trained encoders
at desk scale.  No gradient ever flows into these vectors.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagicError, ContractError, DataValidationError,
                     DimensionMismatchError, DuplicateDocError, FormatError)
from .fileio import (atomic_write_bytes, pack_f32_array, pack_u8, pack_u16,
                     pack_u32, read_exact, read_f32_array, read_u8, read_u16,
                     read_u32)

MAGIC = b"T2EMB001"
KINDS = ("single", "pairwise")
PAIR_SEPARATOR = "⟂"  # distinct token between the two sentences of a pair


def _hash_feature(feature: str, seed: int) -> int:
    key = int(seed).to_bytes(8, "little", signed=True)
    digest = hashlib.blake2b(feature.encode("utf-8"), key=key, digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def hash_encode(sentence: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic seeded hash embedding of one sentence.

    Lowercased whitespace tokens contribute word uni- and bi-grams, each
    hashed into one of dim buckets with a ±1 sign; the result is
    L2-normalized.  An empty sentence maps to the zero vector.

    Args:
        sentence: raw sentence text.
        dim: embedding width, at least 8.
        seed: hash key; the same (sentence, dim, seed) always gives the
            same vector, across processes.

    Returns:
        float32 vector of length dim with unit norm (or zero).
    """
    if dim < 8:
        raise ContractError(f"hash embedding dim must be >= 8, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    tokens = sentence.lower().split()
    features = tokens + [f"{a}\x1f{b}" for a, b in zip(tokens, tokens[1:])]
    for feat in features:
        h = _hash_feature(feat, seed)
        sign = 1.0 if h & (1 << 63) else -1.0
        vec[h % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec.astype(np.float32)


def pairwise_hash_encode(s_i: str, s_next: str, dim: int, seed: int) -> np.ndarray:
    """Hash embedding of the ordered sentence pair (s_i, s_next).

    The two sentences are joined by a separator token so that (A, B) and
    (B, A) hash differently; the final sentence of a document pairs with
    the empty string.
    """
    return hash_encode(f"{s_i} {PAIR_SEPARATOR} {s_next}", dim, seed)


@dataclass
class EmbeddingStore:
    """Immutable per-document embedding rows of one kind."""

    kind: str
    dim: int
    rows_by_doc: dict[str, np.ndarray]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"store kind must be one of {KINDS}, got {self.kind!r}")
        if self.dim < 1:
            raise ContractError(f"store dim must be positive, got {self.dim}")
        for doc_id, rows in self.rows_by_doc.items():
            if rows.ndim != 2 or rows.shape[1] != self.dim:
                raise ContractError(
                    f"doc {doc_id!r}: rows shape {rows.shape} incompatible with dim {self.dim}")
            if not np.isfinite(rows).all():
                raise ContractError(f"doc {doc_id!r}: embedding rows contain non-finite values")

    def rows(self, doc_id: str) -> np.ndarray:
        block = self.rows_by_doc.get(doc_id)
        if block is None:
            raise DataValidationError(f"doc {doc_id!r} missing from {self.kind} store")
        return block


@dataclass
class HashProvider:
    """On-the-fly hash-embedding provider configuration."""

    dim: int
    seed: int


def save_embedding_store(store: EmbeddingStore, path: str) -> None:
    """Serialize a store in the T2EMB binary format (atomic write)."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(pack_u8(KINDS.index(store.kind)))
    buf.write(pack_u32(store.dim))
    buf.write(pack_u32(len(store.rows_by_doc)))
    for doc_id, rows in store.rows_by_doc.items():
        encoded = doc_id.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise FormatError(f"doc id {doc_id!r} exceeds 65535 UTF-8 bytes")
        buf.write(pack_u16(len(encoded)))
        buf.write(encoded)
        buf.write(pack_u32(rows.shape[0]))
    for rows in store.rows_by_doc.values():
        buf.write(pack_f32_array(rows))
    atomic_write_bytes(path, buf.getvalue())


def load_embedding_store(path: str, expect_kind: str | None = None,
                         expect_dim: int | None = None) -> EmbeddingStore:
    """Parse a T2EMB file back into an EmbeddingStore.

    Args:
        path: file to read.
        expect_kind: when given, the header kind must match.
        expect_dim: when given, the header dim must match.

    Returns:
        Store whose re-save is byte-identical to the input file.
    """
    with open(path, "rb") as fh:
        magic = read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        kind_code = read_u8(fh, "kind")
        if kind_code >= len(KINDS):
            raise FormatError(f"{path}: unknown kind code {kind_code}")
        kind = KINDS[kind_code]
        dim = read_u32(fh, "dim")
        doc_count = read_u32(fh, "doc count")
        if expect_kind is not None and kind != expect_kind:
            raise DimensionMismatchError(
                f"{path}: store kind {kind!r} does not match expected {expect_kind!r}")
        if expect_dim is not None and dim != expect_dim:
            raise DimensionMismatchError(
                f"{path}: store dim {dim} does not match expected {expect_dim}")
        index: list[tuple[str, int]] = []
        seen: set[str] = set()
        for _ in range(doc_count):
            id_len = read_u16(fh, "doc id length")
            doc_id = read_exact(fh, id_len, "doc id").decode("utf-8")
            row_count = read_u32(fh, "row count")
            if doc_id in seen:
                raise DuplicateDocError(f"{path}: duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            index.append((doc_id, row_count))
        rows_by_doc: dict[str, np.ndarray] = {}
        for doc_id, row_count in index:
            block = read_f32_array(fh, row_count * dim, f"rows of doc {doc_id!r}")
            rows_by_doc[doc_id] = block.reshape(row_count, dim)
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing bytes after last document block")
    return EmbeddingStore(kind, dim, rows_by_doc)


@dataclass
class EmbeddingMatrix:
    """Composed per-document input matrix S and its block layout."""

    doc_id: str
    S: np.ndarray
    blocks: dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def d(self) -> int:
        return self.S.shape[1]


def _provider_rows(doc, provider, kind: str) -> np.ndarray:
    if isinstance(provider, EmbeddingStore):
        if provider.kind != kind:
            raise ContractError(
                f"provider for the {kind} block has kind {provider.kind!r}")
        rows = provider.rows(doc.id)
        if rows.shape[0] != doc.n:
            raise DataValidationError(
                f"doc {doc.id!r}: {kind} store has {rows.shape[0]} rows "
                f"for {doc.n} sentences")
        return rows
    if isinstance(provider, HashProvider):
        if kind == "single":
            return np.stack([hash_encode(s, provider.dim, provider.seed)
                             for s in doc.sentences])
        nxt = list(doc.sentences[1:]) + [""]
        return np.stack([pairwise_hash_encode(a, b, provider.dim, provider.seed)
                         for a, b in zip(doc.sentences, nxt)])
    raise ContractError(f"unsupported provider type {type(provider).__name__}")


def compose_document_matrix(doc, single=None, pairwise=None,
                            cap: int = 150) -> EmbeddingMatrix:
    """Build S for one document from the enabled providers.

    Per sentence the single block comes first, then the pairwise block;
    disabled providers simply shrink the width.  Documents longer than
    cap sentences are truncated (the first sentence is always kept).

    Args:
        doc: source Document.
        single: EmbeddingStore or HashProvider for the single block, or None.
        pairwise: same for the pairwise block.
        cap: maximum sentence count (the model's positional table length).

    Returns:
        EmbeddingMatrix with float32 S of shape (min(n, cap), d) and the
        per-block width layout.
    """
    if single is None and pairwise is None:
        raise ContractError("at least one of single/pairwise providers is required")
    if cap < 1:
        raise ContractError(f"cap must be positive, got {cap}")
    parts: list[np.ndarray] = []
    blocks: dict[str, int] = {}
    if single is not None:
        rows = _provider_rows(doc, single, "single")
        parts.append(rows)
        blocks["single"] = rows.shape[1]
    if pairwise is not None:
        rows = _provider_rows(doc, pairwise, "pairwise")
        parts.append(rows)
        blocks["pairwise"] = rows.shape[1]
    S = np.hstack(parts).astype(np.float32, copy=False)
    return EmbeddingMatrix(doc.id, S[:cap], blocks)
