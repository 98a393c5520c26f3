"""On-disk formats: the corpus JSONL reader and the T2EMB writer.

The exporter talks to the segmentation toolkit only through files, so
both formats are implemented here against their byte-level contracts
rather than imported from it.  Corpus JSONL holds one document object
per line with the keys id, sentences, boundaries, and topics; only the
first two matter for embedding extraction, but the label arrays are
length-checked when present so a malformed corpus fails here instead of
downstream.  T2EMB is little-endian throughout: an 8-byte ASCII magic
"T2EMB001", a u8 kind (0=single, 1=pairwise), u32 dim, u32 doc count,
then per document a u16 id byte length, the UTF-8 id, and a u32 row
count, followed by every row as IEEE 754 float32 in document order.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .errors import CorpusFormatError, OutputFormatError

MAGIC = b"T2EMB001"
KINDS = ("single", "pairwise")


def read_corpus(path: str) -> list[tuple[str, list[str]]]:
    """Read document ids and sentences from a corpus JSONL file.

    Args:
        path: corpus file, one JSON object per line.

    Returns:
        (doc_id, sentences) pairs in file order.

    Raises:
        CorpusFormatError: on malformed JSON, missing or mistyped keys,
            duplicate ids, label arrays of the wrong length, or an empty
            corpus; messages carry the line number.
        OSError: if the file cannot be read.
    """
    docs: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{where}: invalid JSON ({e})") from e
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{where}: expected an object, got {type(obj).__name__}")
            doc_id = obj.get("id")
            if not isinstance(doc_id, str) or not doc_id:
                raise CorpusFormatError(f"{where}: 'id' must be a non-empty string")
            if doc_id in seen:
                raise CorpusFormatError(f"{where}: duplicate doc id {doc_id!r}")
            sentences = obj.get("sentences")
            if (not isinstance(sentences, list) or not sentences
                    or not all(isinstance(s, str) for s in sentences)):
                raise CorpusFormatError(
                    f"{where}: 'sentences' must be a non-empty list of strings")
            for key in ("boundaries", "topics"):
                if key in obj and (not isinstance(obj[key], list)
                                   or len(obj[key]) != len(sentences)):
                    raise CorpusFormatError(
                        f"{where}: '{key}' must be a list as long as 'sentences'")
            seen.add(doc_id)
            docs.append((doc_id, sentences))
    if not docs:
        raise CorpusFormatError(f"{path}: corpus contains no documents")
    return docs


def write_embeddings(path: str, kind: str,
                     docs: list[tuple[str, np.ndarray]]) -> None:
    """Write per-document embedding rows as a T2EMB file (atomically).

    Args:
        path: destination file.
        kind: "single" or "pairwise"; stored as the header kind byte.
        docs: (doc_id, rows) pairs in corpus order; each rows array is
            2-D float32 with one row per sentence, all the same width.

    Raises:
        OutputFormatError: on an unknown kind, inconsistent or
            non-finite rows, duplicate or oversized ids, or no docs.
        OSError: if the file cannot be written.
    """
    if kind not in KINDS:
        raise OutputFormatError(f"kind must be one of {KINDS}, got {kind!r}")
    if not docs:
        raise OutputFormatError("refusing to write an embedding file with no documents")
    dim = None
    seen: set[str] = set()
    for doc_id, rows in docs:
        if doc_id in seen:
            raise OutputFormatError(f"duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        if len(doc_id.encode("utf-8")) > 0xFFFF:
            raise OutputFormatError(f"doc id {doc_id!r} exceeds 65535 UTF-8 bytes")
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise OutputFormatError(
                f"doc {doc_id!r}: rows must be a non-empty 2-D array, got shape {rows.shape}")
        if dim is None:
            dim = int(rows.shape[1])
        if rows.shape[1] != dim:
            raise OutputFormatError(
                f"doc {doc_id!r}: row width {rows.shape[1]} differs from first doc's {dim}")
        if not np.isfinite(rows).all():
            raise OutputFormatError(f"doc {doc_id!r}: embedding rows contain non-finite values")

    parts = [MAGIC, struct.pack("<B", KINDS.index(kind)),
             struct.pack("<I", dim), struct.pack("<I", len(docs))]
    for doc_id, rows in docs:
        encoded = doc_id.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", rows.shape[0]))
    for _, rows in docs:
        parts.append(np.ascontiguousarray(rows, dtype="<f4").tobytes())
    _atomic_write(path, b"".join(parts))


def _atomic_write(path: str, payload: bytes) -> None:
    """Write payload via a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
