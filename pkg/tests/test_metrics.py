"""Pk metric tests: hand-derived window counts, a brute-force segment-id
oracle that must match exactly, and the degenerate baselines."""

import numpy as np
import pytest

from topseg.errors import ContractError
from topseg.metrics import baseline_segment, compute_k, pk_corpus, pk_document


def segment_ids(boundaries: np.ndarray) -> np.ndarray:
    """Materialize the segment index of every sentence."""
    return np.cumsum(boundaries) - 1


def pk_brute_force(reference, hypothesis, k: int) -> float:
    """Enumerate every window and compare segment-id equality directly."""
    ref_ids = segment_ids(np.asarray(reference))
    hyp_ids = segment_ids(np.asarray(hypothesis))
    n = ref_ids.size
    disagree = 0
    for i in range(n - k):
        same_ref = ref_ids[i] == ref_ids[i + k]
        same_hyp = hyp_ids[i] == hyp_ids[i + k]
        if same_ref != same_hyp:
            disagree += 1
    return disagree / (n - k)


def random_segmentation(n: int, rng: np.random.Generator) -> np.ndarray:
    b = (rng.random(n) < rng.uniform(0.05, 0.6)).astype(np.int64)
    b[0] = 1
    return b


class TestComputeK:
    def test_two_equal_segments_of_two(self):
        # n=4, 2 segments, mean length 2 -> k = round(4/4) = 1
        assert compute_k([1, 0, 1, 0]) == 1

    def test_round_half_up(self):
        # n=6, 2 segments, mean length 3 -> 6/4 = 1.5 rounds up to 2
        assert compute_k([1, 0, 0, 1, 0, 0]) == 2

    def test_single_segment(self):
        # one segment over n=10 -> k = 10/2 = 5
        assert compute_k([1] + [0] * 9) == 5

    def test_k_at_least_one(self):
        assert compute_k([1, 1]) == 1

    def test_short_document_rejected(self):
        with pytest.raises(ContractError):
            compute_k([1])

    def test_missing_first_boundary_rejected(self):
        with pytest.raises(ContractError):
            compute_k([0, 1, 0])


class TestPkDocument:
    def test_identity_is_exactly_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            ref = random_segmentation(int(rng.integers(2, 30)), rng)
            assert pk_document(ref, ref) == 0.0

    def test_hand_enumerated_example(self):
        # ref [1,0,1,0] vs hyp [1,0,0,0] at k=1: of the 3 windows only
        # (2,3) disagrees (ref splits there, hyp does not) -> 1/3
        pk = pk_document([1, 0, 1, 0], [1, 0, 0, 0], k=1)
        np.testing.assert_allclose(pk, 1 / 3, rtol=0, atol=1e-15)

    def test_matches_brute_force_oracle_exactly(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(2, 21))
            ref = random_segmentation(n, rng)
            hyp = random_segmentation(n, rng)
            k = compute_k(ref)
            assert pk_document(ref, hyp, k) == pk_brute_force(ref, hyp, k)

    def test_range(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 25))
            pk = pk_document(random_segmentation(n, rng),
                             random_segmentation(n, rng))
            assert 0.0 <= pk <= 1.0

    def test_k_derives_from_reference_only(self):
        # swapping the arguments changes k (2 vs 1), hence the score
        a = np.array([1, 0, 0, 0, 0, 1, 0, 0])  # 2 segments -> k=2
        b = np.array([1, 1, 0, 1, 0, 1, 1, 0])  # 5 segments -> k=1
        assert compute_k(a) != compute_k(b)
        assert pk_document(a, b) != pk_document(b, a)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            pk_document([1, 0, 0], [1, 0])

    def test_k_out_of_range_rejected(self):
        with pytest.raises(ContractError):
            pk_document([1, 0, 0], [1, 0, 0], k=3)
        with pytest.raises(ContractError):
            pk_document([1, 0, 0], [1, 0, 0], k=0)


class TestPkCorpus:
    def test_all_perfect(self):
        rng = np.random.default_rng(1)
        pairs = []
        for _ in range(5):
            ref = random_segmentation(int(rng.integers(2, 15)), rng)
            pairs.append((ref, ref))
        assert pk_corpus(pairs) == 0.0

    def test_mean_of_two(self):
        perfect = ([1, 0, 1, 0], [1, 0, 1, 0])
        third = ([1, 0, 1, 0], [1, 0, 0, 0])  # k=1 -> 1/3
        np.testing.assert_allclose(pk_corpus([perfect, third]), 1 / 6, atol=1e-15)

    def test_matches_per_document_recomputation(self):
        rng = np.random.default_rng(2)
        pairs = []
        for _ in range(30):
            n = int(rng.integers(2, 20))
            pairs.append((random_segmentation(n, rng), random_segmentation(n, rng)))
        per_doc = [pk_document(r, h, compute_k(r)) for r, h in pairs]
        np.testing.assert_allclose(pk_corpus(pairs), np.mean(per_doc), atol=1e-15)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ContractError):
            pk_corpus([])


class TestBaselines:
    def test_none_is_single_segment(self):
        out = baseline_segment("none", [1, 0, 1, 0, 1])
        np.testing.assert_array_equal(out, [1, 0, 0, 0, 0])

    def test_uniform_mean_length_one_marks_everything(self):
        out = baseline_segment("uniform", [1, 1, 1, 1])
        np.testing.assert_array_equal(out, [1, 1, 1, 1])

    def test_uniform_step(self):
        # 2 segments over 8 sentences -> mean length 4 -> boundary every 4
        out = baseline_segment("uniform", [1, 0, 0, 0, 1, 0, 0, 0])
        np.testing.assert_array_equal(out, [1, 0, 0, 0, 1, 0, 0, 0])

    def test_random_requires_rng(self):
        with pytest.raises(ContractError):
            baseline_segment("random", [1, 0, 1, 0])

    def test_random_rate_tracks_reference(self):
        rng = np.random.default_rng(3)
        ref = np.zeros(4001, dtype=np.int64)
        ref[::4] = 1  # inner rate 1000/4000 = 0.25
        out = baseline_segment("random", ref, rng)
        assert out[0] == 1
        assert 0.22 < out[1:].mean() < 0.28

    def test_unknown_kind_rejected(self):
        with pytest.raises(ContractError):
            baseline_segment("oracle", [1, 0])

    def test_random_baseline_band_on_synthetic_shapes(self):
        # geometric segments with mean 8 over 40 sentences, 500 documents:
        # the random baseline's corpus Pk must sit inside [0.35, 0.65]
        rng = np.random.default_rng(4)
        pairs = []
        for _ in range(500):
            n = 40
            b = np.zeros(n, dtype=np.int64)
            pos = 0
            while pos < n:
                b[pos] = 1
                pos += int(rng.geometric(1 / 8))
            pairs.append((b, baseline_segment("random", b, rng)))
        pk = pk_corpus(pairs)
        assert 0.35 < pk < 0.65, f"random baseline Pk {pk} outside the band"
