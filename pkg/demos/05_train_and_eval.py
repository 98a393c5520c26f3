"""Train the two-level model on a small synthetic corpus and score it.

The bottom level (embedding stores) stays frozen; only the transformer
encoder and its two heads learn.  Runs in a few seconds at this scale.
"""

import numpy as np

from topseg import (ModelConfig, TrainConfig, baseline_segment,
                    evaluate_model, generate_synthetic, pk_document,
                    split_corpus, train)

docs, single, pairwise = generate_synthetic(
    n_docs=40, sentences_per_doc=16, n_topics=3, mean_segment_len=4,
    embed_dim=16, separation=3.0, seed=0)
train_docs, val_docs, test_docs = split_corpus(docs, (0.8, 0.1, 0.1), seed=0)

# d_in = single dim + pairwise dim.  A narrow encoder is plenty here,
# and a desk-scale run can afford a hotter learning rate than the
# conservative default.
model_cfg = ModelConfig(d_in=32, n_topics=3, d_model=32, n_layers=2,
                        n_heads=4, d_ffn=64, max_len=16)
train_cfg = TrainConfig(lr=3e-3, batch_size=2, max_epochs=8, patience=8,
                        seed=0)

result = train(train_docs, val_docs, single, pairwise, model_cfg, train_cfg)

for entry in result.epoch_log:
    print(f"epoch {entry['epoch']:2d}  loss {entry['train_loss']:.3f}  "
          f"val Pk {entry['val_pk']:.3f}")
print(f"best epoch {result.best_epoch} (val Pk {result.best_val_pk:.3f})")

# Score the held-out split with the best-validation parameters.
report = evaluate_model(result.params, model_cfg, test_docs, single, pairwise)
print("test Pk:       ", round(report["corpus_pk"], 3))
print("topic accuracy:", round(report["topic_accuracy"], 3))

# Compare against the degenerate baselines on the same split.
rng = np.random.default_rng(0)
for kind in ("none", "uniform", "random"):
    pks = []
    for doc in test_docs:
        ref = np.asarray(doc.boundaries)
        pks.append(pk_document(ref, baseline_segment(kind, ref, rng=rng)))
    print(f"{kind:8s} baseline Pk: {np.mean(pks):.3f}")
