"""Frozen [CLS] embedding export from pre-trained encoders.

Reads a corpus JSONL file, runs a frozen pre-trained encoder over every
sentence (alone, or paired with a neighbor under the encoder's
two-segment input convention), and writes the vector at the
classification position for each sentence to a T2EMB file in corpus
order.  The files it writes are the embedding inputs of the
segmentation toolkit; the two projects share only these formats.
"""

from .errors import (CorpusFormatError, ExportError, ModelLoadError,
                     OutputFormatError, RowOrderError, TokenizationWarning,
                     UsageError)
from .jobs import ExportJob, ExportResult, export
from .formats import read_corpus, write_embeddings

__version__ = "0.1.0"

__all__ = [
    "CorpusFormatError", "ExportError", "ExportJob", "ExportResult",
    "ModelLoadError", "OutputFormatError", "RowOrderError",
    "TokenizationWarning", "UsageError", "export", "read_corpus",
    "write_embeddings",
]
