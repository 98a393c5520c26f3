"""Pk from first principles: window counts, the k rule, and baselines.

Boundary vectors mark segment starts: position 0 is always 1, and a 1 at
position i means sentence i opens a new segment.
"""

import numpy as np

from topseg import baseline_segment, compute_k, pk_corpus, pk_document

# A 10-sentence document with segments of lengths 4, 3, 3.
reference = np.array([1, 0, 0, 0, 1, 0, 0, 1, 0, 0])

# k is half the average reference segment length, rounded half-up.
k = compute_k(reference)
print("k =", k)  # 10 sentences / 3 segments / 2 -> 2

# A perfect hypothesis scores zero.
print("perfect:", pk_document(reference, reference.copy()))

# Miss the last boundary and some windows now straddle a join the
# reference says is a split.
missed = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
print("missed boundary:", pk_document(reference, missed))

# A spurious boundary errs in the opposite direction.
spurious = np.array([1, 0, 1, 0, 1, 0, 0, 1, 0, 0])
print("spurious boundary:", pk_document(reference, spurious))

# Pk counts disagreeing windows of width k, so we can rebuild the number
# by hand for the missed-boundary case.
disagree = 0
n = reference.size
ref_seg = np.cumsum(reference)
hyp_seg = np.cumsum(missed)
for i in range(n - k):
    same_ref = ref_seg[i] == ref_seg[i + k]
    same_hyp = hyp_seg[i] == hyp_seg[i + k]
    disagree += same_ref != same_hyp
print("by hand:", disagree / (n - k))

# Corpus Pk is the unweighted mean over documents, each with its own k.
docs = [(reference, missed), (reference, spurious), (reference, reference)]
print("corpus:", pk_corpus(docs))

# Degenerate baselines give the numbers a floor to stand on.
rng = np.random.default_rng(0)
for kind in ("none", "uniform", "random"):
    hyp = baseline_segment(kind, reference, rng=rng)
    print(f"{kind:8s} {hyp.tolist()}  Pk = {pk_document(reference, hyp):.3f}")
