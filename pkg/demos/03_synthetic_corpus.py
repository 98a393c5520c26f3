"""Generate a labeled synthetic corpus, inspect its structure, split it
deterministically, and round-trip it through JSONL."""

import os
import tempfile

import numpy as np

from topseg import generate_synthetic, load_corpus, save_corpus, split_corpus

# Topic means live separation standard deviations apart, so the embedding
# rows carry the segmentation signal by construction.
docs, single, pairwise = generate_synthetic(
    n_docs=20, sentences_per_doc=12, n_topics=3, mean_segment_len=4,
    embed_dim=16, separation=3.0, seed=7)

doc = docs[0]
print("id:        ", doc.id)
print("sentences: ", doc.sentences[:3], "...")
print("boundaries:", doc.boundaries)
print("topics:    ", doc.topics)

# Topics are constant within a segment and change exactly at boundaries.
for i in range(1, doc.n):
    if doc.boundaries[i] == 0:
        assert doc.topics[i] == doc.topics[i - 1]
    else:
        assert doc.topics[i] != doc.topics[i - 1]

# The paired embedding stores hold one row per sentence.  Row i sits at
# the noisy midpoint of singles i-1 and i (row 0 pairs with a zero
# vector), so a segment's first sentence carries the cross-topic mixture
# at its own index.  Row 1 is much closer to midpoint(s0, s1) than to
# any unrelated single.
rows = single.rows(doc.id)
pair1 = pairwise.rows(doc.id)[1]
print("single store:", single.kind, single.dim, rows.shape)
print("|pair1 - midpoint(s0, s1)| =",
      round(float(np.linalg.norm(pair1 - (rows[0] + rows[1]) / 2)), 2))
print("|pair1 - s5|               =",
      round(float(np.linalg.norm(pair1 - rows[5])), 2))

# Deterministic three-way split.
train, val, test = split_corpus(docs, (0.8, 0.1, 0.1), seed=0)
print("split sizes:", len(train), len(val), len(test))
again = split_corpus(docs, (0.8, 0.1, 0.1), seed=0)
assert [d.id for d in train] == [d.id for d in again[0]]

# JSONL round trip is byte-exact.
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "corpus.jsonl")
    save_corpus(docs, path)
    blob = open(path, "rb").read()
    save_corpus(load_corpus(path), path)
    assert open(path, "rb").read() == blob
    print("round trip bytes:", len(blob))
