"""Hash-based sentence vectors and the T2EMB store format.

The hash provider is the deterministic, dependency-free stand-in for a
pre-trained encoder: unigrams and bigrams are hashed into signed buckets
and the result is L2-normalized.
"""

import os
import tempfile

import numpy as np

from topseg import (EmbeddingStore, hash_encode, load_embedding_store,
                    pairwise_hash_encode, save_embedding_store)

a = hash_encode("The treaty was signed in spring.", dim=64, seed=0)
b = hash_encode("The treaty was signed in spring.", dim=64, seed=0)
c = hash_encode("Rainfall doubled over the delta.", dim=64, seed=0)

print("deterministic:", np.array_equal(a, b))
print("unit norm:    ", float(np.linalg.norm(a)))
print("same sentence cosine:", float(a @ b))
print("different sentences: ", float(a @ c))

# Pairwise vectors hash the two sentences jointly, so order matters.
fwd = pairwise_hash_encode("First point.", "Second point.", dim=64, seed=0)
rev = pairwise_hash_encode("Second point.", "First point.", dim=64, seed=0)
print("pair vs reversed pair cosine:", float(fwd @ rev))

# Stores map document ids to row matrices and serialize to T2EMB.
rng = np.random.default_rng(1)
store = EmbeddingStore("single", 64, {
    "doc-a": rng.normal(size=(3, 64)).astype(np.float32),
    "doc-b": rng.normal(size=(5, 64)).astype(np.float32),
})

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "vectors.t2emb")
    save_embedding_store(store, path)
    print("file size:", os.path.getsize(path), "bytes")

    loaded = load_embedding_store(path, expect_kind="single", expect_dim=64)
    print("docs:", sorted(loaded.rows_by_doc))
    assert np.array_equal(loaded.rows("doc-b"), store.rows("doc-b"))

    # Loading with the wrong expectation fails loudly.
    try:
        load_embedding_store(path, expect_kind="pairwise")
    except Exception as e:
        print("kind check:", e)
