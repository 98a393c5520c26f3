"""Command line surface for the embedding exporter.

Exit codes: 0 success, 1 usage error, 2 data, model, or write error.
The output file is written atomically, so a failing run never leaves a
partial file at its destination.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .errors import ExportError, TokenizationWarning, UsageError
from .jobs import ORIENTATIONS, ExportJob, export
from .formats import KINDS


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to exit code 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="clsexport", description=__doc__)
    parser.add_argument("--corpus", required=True, help="corpus JSONL file")
    parser.add_argument("--model", required=True,
                        help="pre-trained encoder id or local path")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="which vector to extract per sentence")
    parser.add_argument("--output", required=True, help="destination T2EMB file")
    parser.add_argument("--orientation", choices=ORIENTATIONS, default="forward",
                        help="pair each sentence with its successor (forward) "
                             "or its predecessor (backward)")
    parser.add_argument("--batch-size", type=int, default=32,
                        help="sequences per inference batch")
    parser.add_argument("--pooled", action="store_true",
                        help="take the encoder's pooled output instead of "
                             "the raw final-layer vector")
    return parser


def _quiet_transformers() -> None:
    """Keep library progress bars and advisories out of the output."""
    try:
        from transformers.utils import logging as hf_logging
        hf_logging.set_verbosity_error()
        hf_logging.disable_progress_bar()
    except Exception:
        pass


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _quiet_transformers()
        job = ExportJob(corpus=args.corpus, model=args.model, kind=args.kind,
                        output=args.output, orientation=args.orientation,
                        batch_size=args.batch_size, pooled=args.pooled)
        with warnings.catch_warnings():
            # surface every substituted sentence, not just the first
            warnings.simplefilter("always", TokenizationWarning)
            result = export(job)
        print(f"wrote {result.rows} rows of {result.dim} dims "
              f"across {result.docs} docs to {args.output}")
        if result.zero_substitutions:
            print(f"warning: {result.zero_substitutions} rows were "
                  "substituted with zero vectors", file=sys.stderr)
        return 0
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ExportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
