"""Pk segmentation error and degenerate baseline segmenters.

A segmentation over n sentences is a {0,1} vector where 1 marks the first
sentence of a segment; position 0 is always 1.  Pk slides a window of k
sentences and counts reference/hypothesis disagreements about whether the
window endpoints fall in the same segment.  Lower is better; k is half
the average reference segment length, recomputed per document.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def _validate_boundaries(b: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(b)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a 1-d boundary vector, got ndim={arr.ndim}")
    if arr.size < 1:
        raise ContractError(f"{name} must be non-empty")
    if not np.isin(arr, (0, 1)).all():
        raise ContractError(f"{name} entries must be 0 or 1")
    if arr[0] != 1:
        raise ContractError(f"{name}[0] must be 1 (every document starts a segment)")
    return arr.astype(np.int64)


def compute_k(reference) -> int:
    """Window size for Pk: half the mean reference segment length.

    k = max(1, round_half_up(n / (2 * segment_count))), from the reference
    segmentation only.

    Args:
        reference: {0,1} boundary vector; 1 marks a segment's first sentence.

    Returns:
        Positive integer window size, always < n for n >= 2.
    """
    ref = _validate_boundaries(reference, "reference")
    n = ref.size
    if n < 2:
        raise ContractError(f"Pk window is undefined for n={n} (need n >= 2)")
    segment_count = int(ref.sum())
    return max(1, int(np.floor(n / (2.0 * segment_count) + 0.5)))


def pk_document(reference, hypothesis, k: int | None = None) -> float:
    """Pk disagreement rate between two segmentations of one document.

    For each of the n-k windows (i, i+k), the reference and hypothesis
    each classify the pair as same-segment or different-segment; Pk is
    the fraction of windows where they disagree.  Same-segment holds
    exactly when no segment starts in positions i+1 .. i+k, counted via
    cumulative boundary sums.

    Args:
        reference: gold {0,1} boundary vector.
        hypothesis: predicted {0,1} boundary vector, same length.
        k: window size; derived from the reference when omitted.

    Returns:
        Value in [0, 1]; 0 means the segmentations agree on every window.
    """
    ref = _validate_boundaries(reference, "reference")
    hyp = _validate_boundaries(hypothesis, "hypothesis")
    n = ref.size
    if hyp.size != n:
        raise ContractError(
            f"length mismatch: reference has {n} sentences, hypothesis {hyp.size}")
    if k is None:
        k = compute_k(ref)
    if not 1 <= k < n:
        raise ContractError(f"window size k={k} out of range [1, {n - 1}]")
    cum_ref = np.cumsum(ref)
    cum_hyp = np.cumsum(hyp)
    # same segment for (i, i+k) iff no boundary at positions i+1 .. i+k
    same_ref = cum_ref[k:] == cum_ref[:-k]
    same_hyp = cum_hyp[k:] == cum_hyp[:-k]
    return float(np.mean(same_ref != same_hyp))


def pk_corpus(pairs) -> float:
    """Unweighted mean of per-document Pk, each with its own k.

    Args:
        pairs: sequence of (reference, hypothesis) boundary-vector pairs.

    Returns:
        Macro-averaged Pk in [0, 1].
    """
    pairs = list(pairs)
    if not pairs:
        raise ContractError("pk_corpus requires at least one document")
    return float(np.mean([pk_document(ref, hyp) for ref, hyp in pairs]))


def baseline_segment(kind: str, reference, rng: np.random.Generator | None = None) -> np.ndarray:
    """Degenerate segmenter anchored to reference statistics.

    Kinds:
        none    - a single segment covering the document.
        uniform - a boundary every ceil(mean reference segment length) sentences.
        random  - each inner position is a boundary with the reference's
                  empirical inner-boundary rate (position 0 excluded from
                  the rate; it is structural).

    Args:
        kind: one of "none", "uniform", "random".
        reference: gold boundary vector supplying n and the statistics.
        rng: random generator, required for kind="random".

    Returns:
        {0,1} boundary vector of the same length with position 0 set.
    """
    ref = _validate_boundaries(reference, "reference")
    n = ref.size
    out = np.zeros(n, dtype=np.int64)
    out[0] = 1
    if kind == "none":
        return out
    if kind == "uniform":
        step = int(np.ceil(n / ref.sum()))
        out[::step] = 1
        return out
    if kind == "random":
        if rng is None:
            raise ContractError("random baseline requires an rng")
        if n > 1:
            rate = float(ref[1:].sum()) / (n - 1)
            out[1:] = rng.random(n - 1) < rate
        return out
    raise ContractError(f"unknown baseline kind {kind!r}")
