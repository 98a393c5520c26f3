"""Error and warning taxonomy for the embedding exporter.

Every failure the package raises derives from ExportError, so callers
can catch one type at the boundary.  TokenizationWarning is issued per
affected sentence when the tokenizer rejects its input and a zero vector
is written in place of the embedding.
"""


class ExportError(Exception):
    """Base class for all exporter failures."""


class UsageError(ExportError):
    """Job configuration or command-line arguments are invalid."""


class CorpusFormatError(ExportError):
    """The corpus file violates the JSONL contract."""


class ModelLoadError(ExportError):
    """The encoder or its tokenizer could not be loaded."""


class OutputFormatError(ExportError):
    """The embedding payload violates the output file contract."""


class RowOrderError(ExportError):
    """The final cross-check found rows out of corpus order."""


class TokenizationWarning(UserWarning):
    """One sentence could not be tokenized; a zero vector was substituted."""
