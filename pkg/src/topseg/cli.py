"""Command line surface: import, synthesize, embed, train, eval, predict, ablate.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 training
divergence.  Every artifact is written atomically, so a failing command
never leaves a partial file at its output path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .corpus import (Document, TopicVocabulary, generate_synthetic,
                     import_wikisection, load_corpus, save_corpus, split_corpus)
from .encoding import (EmbeddingStore, HashProvider, compose_document_matrix,
                       load_embedding_store, save_embedding_store)
from .errors import (DataValidationError, TopsegError, TrainingDivergedError,
                     UsageError)
from .fileio import atomic_write_bytes
from .model import (ModelConfig, forward, load_checkpoint, predict_boundaries,
                    save_checkpoint)
from .training import TrainConfig, evaluate_model, train

SPLIT_RATIOS = (0.8, 0.1, 0.1)

ABLATION_VARIANTS = (
    ("full", {}),
    ("without S_single", {"no_single": True}),
    ("without S_pairwise", {"no_pairwise": True}),
    ("without L_topic", {"no_topic_loss": True}),
    ("without L_seg", {"no_seg_loss": True}),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to exit code 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="topseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("import-wikisection",
                       help="convert a WikiSection release file to corpus JSONL")
    p.add_argument("--input", required=True, help="release JSON file")
    p.add_argument("--output", required=True,
                   help="directory for corpus.jsonl and vocab.json")
    p.add_argument("--vocab", help="existing vocabulary to map labels against")

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--output", required=True,
                   help="directory for corpus.jsonl and the embedding stores")
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--sentences", type=int, default=40)
    p.add_argument("--topics", type=int, default=4)
    p.add_argument("--mean-segment-len", type=int, default=8)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--discontinuity", type=float, default=0.0,
                   help="order-violation offset on cross-boundary pairwise rows")

    p = sub.add_parser("embed", help="write single and pairwise T2EMB stores")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True, help="directory for the stores")
    p.add_argument("--provider", choices=("hash", "file"), default="hash")
    p.add_argument("--dim", type=int, default=128, help="hash embedding width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--single-embeddings", help="existing store (provider=file)")
    p.add_argument("--pairwise-embeddings", help="existing store (provider=file)")

    p = sub.add_parser("train", help="train on a corpus with an internal split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True,
                   help="directory for checkpoint.t2ckpt and train_log.jsonl")
    p.add_argument("--single-embeddings")
    p.add_argument("--pairwise-embeddings")
    p.add_argument("--vocab", help="topic vocabulary JSON")
    p.add_argument("--config", help="JSON file overriding model fields")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float)
    p.add_argument("--no-single", action="store_true")
    p.add_argument("--no-pairwise", action="store_true")
    p.add_argument("--no-topic-loss", action="store_true")
    p.add_argument("--no-seg-loss", action="store_true")

    p = sub.add_parser("eval", help="score a corpus with a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output", required=True, help="report JSON path")
    p.add_argument("--single-embeddings")
    p.add_argument("--pairwise-embeddings")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("predict", help="per-sentence probabilities for one document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--doc-id", required=True)
    p.add_argument("--csv", required=True, help="output CSV path")
    p.add_argument("--plot", help="optional output SVG path")
    p.add_argument("--single-embeddings")
    p.add_argument("--pairwise-embeddings")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("ablate", help="train and score the five-variant grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True,
                   help="directory for ablation.md and ablation.json")
    p.add_argument("--single-embeddings", required=True)
    p.add_argument("--pairwise-embeddings", required=True)
    p.add_argument("--config", help="JSON file overriding model fields")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float)
    return parser


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _load_model_overrides(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise DataValidationError(f"{path}: model config must be a JSON object")
    allowed = {"d_model", "n_layers", "n_heads", "d_ffn", "max_len", "dropout",
               "boundary_threshold"}
    unknown = set(obj) - allowed
    if unknown:
        raise DataValidationError(
            f"{path}: unknown model config keys {sorted(unknown)} "
            f"(settable: {sorted(allowed)})")
    return obj


def _infer_n_topics(docs: list[Document], vocab: TopicVocabulary | None) -> int:
    if vocab is not None:
        return vocab.size
    return max(max(doc.topics) for doc in docs) + 1


def _load_stores(args, need_single: bool, need_pairwise: bool):
    single = pairwise = None
    if need_single:
        if not args.single_embeddings:
            raise UsageError("--single-embeddings is required here")
        single = load_embedding_store(args.single_embeddings, expect_kind="single")
    if need_pairwise:
        if not args.pairwise_embeddings:
            raise UsageError("--pairwise-embeddings is required here")
        pairwise = load_embedding_store(args.pairwise_embeddings,
                                        expect_kind="pairwise")
    return single, pairwise


def _composed_width(doc: Document, single, pairwise, max_len: int) -> int:
    return compose_document_matrix(doc, single, pairwise, cap=max_len).d


def _build_model_config(args, docs, vocab, single, pairwise,
                        use_topic_loss: bool, use_seg_loss: bool) -> ModelConfig:
    overrides = _load_model_overrides(getattr(args, "config", None))
    cfg = ModelConfig(d_in=1, n_topics=max(2, _infer_n_topics(docs, vocab)),
                      **overrides)
    cfg = replace(cfg, use_topic_loss=use_topic_loss, use_seg_loss=use_seg_loss)
    if args.threshold is not None:
        cfg = replace(cfg, boundary_threshold=args.threshold)
    cfg = replace(cfg, d_in=_composed_width(docs[0], single, pairwise, cfg.max_len))
    cfg.validate()
    return cfg


def _vocab_labels(vocab: TopicVocabulary | None, n_topics: int) -> list[str]:
    if vocab is not None:
        return vocab.labels
    return [f"topic_{i}" for i in range(n_topics)]


def _blocks_layout(single, pairwise) -> dict[str, int]:
    blocks = {}
    if single is not None:
        blocks["single"] = single.dim
    if pairwise is not None:
        blocks["pairwise"] = pairwise.dim
    return blocks


def _stores_for_checkpoint(args, blocks: dict[str, int]):
    single = pairwise = None
    if "single" in blocks:
        if not args.single_embeddings:
            raise UsageError("checkpoint uses a single block; pass --single-embeddings")
        single = load_embedding_store(args.single_embeddings,
                                      expect_kind="single", expect_dim=blocks["single"])
    if "pairwise" in blocks:
        if not args.pairwise_embeddings:
            raise UsageError("checkpoint uses a pairwise block; pass --pairwise-embeddings")
        pairwise = load_embedding_store(args.pairwise_embeddings,
                                        expect_kind="pairwise",
                                        expect_dim=blocks["pairwise"])
    return single, pairwise


def _run_training(docs, single, pairwise, model_cfg: ModelConfig, args):
    train_cfg = TrainConfig(batch_size=args.batch_size, max_epochs=args.epochs,
                            patience=args.patience, seed=args.seed)
    train_docs, val_docs, test_docs = split_corpus(docs, SPLIT_RATIOS, args.seed)
    result = train(train_docs, val_docs, single, pairwise, model_cfg, train_cfg,
                   threshold=args.threshold)
    return result, test_docs


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_import(args) -> int:
    vocab = TopicVocabulary.load(args.vocab) if args.vocab else None
    docs, vocab, skipped = import_wikisection(args.input, vocab)
    if not docs:
        raise DataValidationError(f"{args.input}: no usable documents")
    _ensure_dir(args.output)
    save_corpus(docs, os.path.join(args.output, "corpus.jsonl"))
    vocab.save(os.path.join(args.output, "vocab.json"))
    print(f"imported {len(docs)} documents ({skipped} skipped), "
          f"{vocab.size} topic labels -> {args.output}")
    return 0


def _cmd_synth(args) -> int:
    docs, single, pairwise = generate_synthetic(
        n_docs=args.docs, sentences_per_doc=args.sentences, n_topics=args.topics,
        mean_segment_len=args.mean_segment_len, embed_dim=args.dim,
        separation=args.separation, seed=args.seed,
        discontinuity=args.discontinuity)
    _ensure_dir(args.output)
    save_corpus(docs, os.path.join(args.output, "corpus.jsonl"))
    save_embedding_store(single, os.path.join(args.output, "single.t2emb"))
    save_embedding_store(pairwise, os.path.join(args.output, "pairwise.t2emb"))
    print(f"generated {len(docs)} documents "
          f"(K={args.topics}, dim={args.dim}, separation={args.separation}) "
          f"-> {args.output}")
    return 0


def _cmd_embed(args) -> int:
    docs = load_corpus(args.corpus)
    _ensure_dir(args.output)
    if args.provider == "hash":
        provider = HashProvider(args.dim, args.seed)
        singles, pairs = {}, {}
        for doc in docs:
            matrix = compose_document_matrix(doc, provider, provider, cap=doc.n)
            singles[doc.id] = matrix.S[:, :args.dim]
            pairs[doc.id] = matrix.S[:, args.dim:]
        stores = (EmbeddingStore("single", args.dim, singles),
                  EmbeddingStore("pairwise", args.dim, pairs))
    else:
        if not args.single_embeddings and not args.pairwise_embeddings:
            raise UsageError("provider=file needs --single-embeddings and/or "
                             "--pairwise-embeddings")
        stores = []
        if args.single_embeddings:
            stores.append(load_embedding_store(args.single_embeddings,
                                               expect_kind="single"))
        if args.pairwise_embeddings:
            stores.append(load_embedding_store(args.pairwise_embeddings,
                                               expect_kind="pairwise"))
        for store in stores:
            for doc in docs:
                rows = store.rows(doc.id)
                if rows.shape[0] != doc.n:
                    raise DataValidationError(
                        f"doc {doc.id!r}: {store.kind} store has {rows.shape[0]} "
                        f"rows for {doc.n} sentences")
    for store in stores:
        save_embedding_store(store, os.path.join(args.output, f"{store.kind}.t2emb"))
    print(f"wrote {' and '.join(s.kind for s in stores)} stores for "
          f"{len(docs)} documents -> {args.output}")
    return 0


def _cmd_train(args) -> int:
    if args.no_single and args.no_pairwise:
        raise UsageError("cannot disable both embedding blocks")
    docs = load_corpus(args.corpus)
    vocab = TopicVocabulary.load(args.vocab) if args.vocab else None
    single, pairwise = _load_stores(args, not args.no_single, not args.no_pairwise)
    model_cfg = _build_model_config(args, docs, vocab, single, pairwise,
                                    use_topic_loss=not args.no_topic_loss,
                                    use_seg_loss=not args.no_seg_loss)
    result, _ = _run_training(docs, single, pairwise, model_cfg, args)
    _ensure_dir(args.output)
    save_checkpoint(os.path.join(args.output, "checkpoint.t2ckpt"), result.params,
                    model_cfg, _vocab_labels(vocab, model_cfg.n_topics),
                    _blocks_layout(single, pairwise))
    log_text = "".join(json.dumps(rec, sort_keys=True) + "\n"
                       for rec in result.epoch_log)
    _atomic_write_text(os.path.join(args.output, "train_log.jsonl"), log_text)
    print(f"resolved model config: {json.dumps(model_cfg.to_dict(), sort_keys=True)}")
    print(f"best validation Pk {100 * result.best_val_pk:.1f}% "
          f"at epoch {result.best_epoch} ({len(result.epoch_log)} epochs run) "
          f"-> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    docs = load_corpus(args.corpus)
    params, model_cfg, vocabulary, blocks = load_checkpoint(args.checkpoint)
    single, pairwise = _stores_for_checkpoint(args, blocks)
    vocab = TopicVocabulary(vocabulary)
    report = evaluate_model(params, model_cfg, docs, single, pairwise,
                            threshold=args.threshold, oov_id=vocab.oov_id)
    _atomic_write_text(args.output, json.dumps(report, indent=2) + "\n")
    print(f"resolved model config: {json.dumps(model_cfg.to_dict(), sort_keys=True)}")
    print(f"corpus Pk {100 * report['corpus_pk']:.1f}% over {len(report['docs'])} "
          f"documents, topic accuracy {report['topic_accuracy']:.3f} -> {args.output}")
    return 0


def _cmd_predict(args) -> int:
    docs = load_corpus(args.corpus)
    by_id = {doc.id: doc for doc in docs}
    doc = by_id.get(args.doc_id)
    if doc is None:
        raise DataValidationError(f"doc {args.doc_id!r} not found in {args.corpus}")
    params, model_cfg, _, blocks = load_checkpoint(args.checkpoint)
    single, pairwise = _stores_for_checkpoint(args, blocks)
    matrix = compose_document_matrix(doc, single, pairwise, cap=model_cfg.max_len)
    cut = doc.truncated(matrix.n)
    out = forward(matrix, params, model_cfg)
    seg_prob = out.seg_prob.data
    topics = np.argmax(out.topic_prob.data, axis=1)
    threshold = args.threshold if args.threshold is not None \
        else model_cfg.boundary_threshold

    lines = ["index,seg_prob,gold_boundary,predicted_topic"]
    for i in range(matrix.n):
        lines.append(f"{i},{seg_prob[i]:.6f},{cut.boundaries[i]},{topics[i]}")
    _atomic_write_text(args.csv, "\n".join(lines) + "\n")
    if args.plot:
        _atomic_write_text(args.plot,
                           render_boundary_plot(seg_prob, cut.boundaries, threshold))
    print(f"wrote {matrix.n} rows for doc {doc.id!r} -> {args.csv}")
    return 0


def _cmd_ablate(args) -> int:
    docs = load_corpus(args.corpus)
    rows = []
    for label, switches in ABLATION_VARIANTS:
        no_single = switches.get("no_single", False)
        no_pairwise = switches.get("no_pairwise", False)
        single, pairwise = _load_stores(args, not no_single, not no_pairwise)
        model_cfg = _build_model_config(
            args, docs, None, single, pairwise,
            use_topic_loss=not switches.get("no_topic_loss", False),
            use_seg_loss=not switches.get("no_seg_loss", False))
        result, test_docs = _run_training(docs, single, pairwise, model_cfg, args)
        report = evaluate_model(result.params, model_cfg, test_docs, single,
                                pairwise, threshold=args.threshold)
        rows.append({"variant": label,
                     "val_pk": result.best_val_pk,
                     "test_pk": report["corpus_pk"],
                     "topic_accuracy": report["topic_accuracy"],
                     "epochs_run": len(result.epoch_log)})
        print(f"{label}: val Pk {100 * result.best_val_pk:.1f}%, "
              f"test Pk {100 * report['corpus_pk']:.1f}%")
    _ensure_dir(args.output)
    _atomic_write_text(os.path.join(args.output, "ablation.json"),
                       json.dumps(rows, indent=2) + "\n")
    _atomic_write_text(os.path.join(args.output, "ablation.md"),
                       render_ablation_table(rows))
    print(f"wrote ablation grid -> {args.output}")
    return 0


def render_ablation_table(rows: list[dict]) -> str:
    """Markdown table of the ablation grid with a desk-scale banner."""
    lines = [
        "# Ablation grid",
        "",
        "Desk-scale run on a synthetic corpus; values are not comparable to",
        "results reported on full-size segmentation benchmarks.",
        "",
        "| variant | val Pk (%) | test Pk (%) | topic accuracy |",
        "| --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append(f"| {row['variant']} | {100 * row['val_pk']:.1f} "
                     f"| {100 * row['test_pk']:.1f} "
                     f"| {row['topic_accuracy']:.3f} |")
    return "\n".join(lines) + "\n"


def render_boundary_plot(seg_prob: np.ndarray, gold_boundaries, threshold: float,
                         width: int = 800, height: int = 240) -> str:
    """Deterministic SVG line plot of boundary probabilities.

    Gold boundaries appear as vertical markers, the decode threshold as a
    dashed horizontal line.  Identical inputs yield identical bytes.
    """
    seg_prob = np.asarray(seg_prob, dtype=np.float64)
    n = seg_prob.size
    margin = 40.0
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin

    def x_at(i: int) -> float:
        return margin + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def y_at(p: float) -> float:
        return margin + plot_h * (1.0 - min(max(p, 0.0), 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin:.2f}" y="{margin:.2f}" width="{plot_w:.2f}" '
        f'height="{plot_h:.2f}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    for i, b in enumerate(gold_boundaries):
        if b == 1:
            x = x_at(i)
            parts.append(f'<line x1="{x:.2f}" y1="{margin:.2f}" x2="{x:.2f}" '
                         f'y2="{margin + plot_h:.2f}" stroke="#999999" '
                         f'stroke-width="1" stroke-dasharray="2,3"/>')
    y_thr = y_at(threshold)
    parts.append(f'<line x1="{margin:.2f}" y1="{y_thr:.2f}" '
                 f'x2="{margin + plot_w:.2f}" y2="{y_thr:.2f}" stroke="#cc0000" '
                 f'stroke-width="1" stroke-dasharray="6,4"/>')
    points = " ".join(f"{x_at(i):.2f},{y_at(float(p)):.2f}"
                      for i, p in enumerate(seg_prob))
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f4e9c" '
                 f'stroke-width="2"/>')
    for value in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{margin - 6:.2f}" y="{y_at(value) + 4:.2f}" '
                     f'font-size="11" text-anchor="end" '
                     f'font-family="sans-serif">{value:.1f}</text>')
    parts.append(f'<text x="{margin:.2f}" y="{height - 8:.2f}" font-size="11" '
                 f'font-family="sans-serif">sentence index (gold boundaries dashed, '
                 f'threshold {threshold:.2f})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_HANDLERS = {
    "import-wikisection": _cmd_import,
    "synth": _cmd_synth,
    "embed": _cmd_embed,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except TrainingDivergedError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return 3
    except (TopsegError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
