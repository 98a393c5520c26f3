"""Release gate: one test per acceptance criterion, at the stated tolerances.

Every numeric claim here is checked against an independent oracle
(central finite differences, brute-force window enumeration, closed-form
losses, binomial bands) or against byte-level round trips.  The two
training criteria run the real optimization protocol end to end.
"""

import json
import time

import numpy as np
import pytest

import topseg.autodiff as ad
from topseg import (ForwardOutput, ModelConfig, Tensor, TrainConfig,
                    compose_document_matrix, compute_k, compute_loss, forward,
                    generate_synthetic, init_params, load_checkpoint,
                    load_corpus, load_embedding_store, pk_document,
                    sample_loss_mask, save_checkpoint, save_corpus,
                    save_embedding_store, split_corpus)
from topseg.autodiff import Graph, backward, finite_diff_check
from topseg.cli import main as cli_main
from topseg.encoding import EmbeddingStore
from topseg.model import param_shapes
from topseg.training import evaluate_model, train


@pytest.fixture
def note(request):
    def _set(text: str) -> None:
        request.config._acceptance_notes[request.node.name] = text
    return _set


# ---------------------------------------------------------------------------
# Criterion: gradient correctness
# ---------------------------------------------------------------------------

TINY = ModelConfig(d_in=5, n_topics=3, d_model=8, n_layers=1, n_heads=2,
                   d_ffn=16, max_len=6, dropout=0.0)


def _op_cases():
    """Scalar-valued closures exercising every differentiable op."""
    rng = np.random.default_rng(17)
    c2x3 = Tensor(rng.normal(size=(2, 3)))
    c3x4 = Tensor(rng.normal(size=(3, 4)))
    gain = Tensor(rng.normal(size=3) * 0.2 + 1.0)
    bias = Tensor(rng.normal(size=3) * 0.2)
    mask = np.array([[True, True, False], [True, False, True]])

    def fixed_dropout(t):
        return ad.dropout(t, 0.4, np.random.default_rng(7), train=True)

    return [
        ("add", (2, 3), lambda t: ad.tensor_sum(ad.mul(ad.add(t, c2x3), c2x3))),
        ("neg", (2, 3), lambda t: ad.tensor_sum(ad.mul(ad.neg(t), c2x3))),
        ("scale", (2, 3), lambda t: ad.tensor_sum(ad.mul(ad.scale(t, 1.7), c2x3))),
        ("mul", (2, 3), lambda t: ad.tensor_sum(ad.mul(ad.mul(t, c2x3), c2x3))),
        ("matmul_lhs", (2, 3), lambda t: ad.tensor_sum(ad.matmul(t, c3x4))),
        ("matmul_rhs", (3, 4), lambda t: ad.tensor_sum(ad.matmul(c2x3, t))),
        ("transpose", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.transpose(t, (1, 0)),
                                        ad.transpose(c2x3, (1, 0))))),
        ("reshape", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.reshape(t, (6,)),
                                        ad.reshape(c2x3, (6,))))),
        ("tensor_sum", (2, 3), ad.tensor_sum),
        ("softmax", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.softmax(t), c2x3))),
        ("softmax_masked", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.softmax(t, mask=mask), c2x3))),
        ("layer_norm_x", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.layer_norm(t, gain, bias), c2x3))),
        ("layer_norm_gain", (3,),
         lambda t: ad.tensor_sum(ad.mul(ad.layer_norm(c2x3, t, bias), c2x3))),
        ("layer_norm_bias", (3,),
         lambda t: ad.tensor_sum(ad.mul(ad.layer_norm(c2x3, gain, t), c2x3))),
        ("gelu", (2, 3), lambda t: ad.tensor_sum(ad.mul(ad.gelu(t), c2x3))),
        ("sigmoid", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.sigmoid(t), c2x3))),
        ("log", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.log(ad.sigmoid(t)), c2x3))),
        ("clip", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(ad.clip(t, -10.0, 10.0), c2x3))),
        ("dropout", (2, 3),
         lambda t: ad.tensor_sum(ad.mul(fixed_dropout(t), c2x3))),
    ]


def test_gradient_correctness(note):
    started = time.perf_counter()
    rng = np.random.default_rng(29)
    worst = 0.0

    for name, shape, loss_fn in _op_cases():
        x = Tensor(rng.normal(size=shape))
        err = finite_diff_check(loss_fn, x)
        assert err < 1e-4, f"op {name}: relative error {err}"
        worst = max(worst, err)

    params = init_params(TINY, seed=5, dtype=np.float64)
    S = rng.normal(size=(6, TINY.d_in))
    y_seg = np.array([1, 0, 0, 1, 0, 0])
    y_topic = np.array([0, 0, 0, 2, 2, 2])
    mask = np.array([True, False, True, True, True, False])

    def model_loss(_):
        out = forward(S, params, TINY)
        return compute_loss(out, y_seg, y_topic, mask, TINY)

    trainable = [n for n in param_shapes(TINY) if n != "pos_table"]
    for name in trainable:
        err = finite_diff_check(model_loss, params[name])
        assert err < 1e-4, f"tensor {name}: relative error {err}"
        worst = max(worst, err)

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
    note(f"max rel err {worst:.1e} over {len(_op_cases())} ops + "
         f"{len(trainable)} model tensors, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion: Pk oracle equivalence
# ---------------------------------------------------------------------------

def _segment_ids(boundaries: np.ndarray) -> np.ndarray:
    return np.cumsum(boundaries) - 1


def _pk_brute_force(reference, hypothesis, k: int) -> float:
    ref_ids = _segment_ids(np.asarray(reference))
    hyp_ids = _segment_ids(np.asarray(hypothesis))
    n = ref_ids.size
    disagree = 0
    for i in range(n - k):
        if (ref_ids[i] == ref_ids[i + k]) != (hyp_ids[i] == hyp_ids[i + k]):
            disagree += 1
    return disagree / (n - k)


def test_pk_oracle_equivalence(note):
    rng = np.random.default_rng(3)
    for trial in range(200):
        n = int(rng.integers(2, 21))
        ref = (rng.random(n) < rng.uniform(0.05, 0.6)).astype(np.int64)
        hyp = (rng.random(n) < rng.uniform(0.05, 0.6)).astype(np.int64)
        ref[0] = hyp[0] = 1
        k = compute_k(ref)
        assert pk_document(ref, hyp, k) == _pk_brute_force(ref, hyp, k), \
            f"trial {trial}: ref {ref.tolist()} hyp {hyp.tolist()} k {k}"

    assert compute_k([1, 0, 1, 0]) == 1
    assert compute_k([1, 0, 0, 1, 0, 0]) == 2
    assert compute_k([1] + [0] * 9) == 5
    note("200/200 randomized pairs exact; 3 hand-derived k values")


# ---------------------------------------------------------------------------
# Criterion: loss closed form
# ---------------------------------------------------------------------------

def test_loss_closed_form(note):
    n, k = 8, 3
    out = ForwardOutput(Tensor(np.full(n, 0.5)),
                        Tensor(np.full((n, k), 1.0 / k)),
                        np.ones(n, bool))
    y_seg = np.array([1, 0, 0, 1, 0, 0, 0, 0])
    y_topic = np.array([0, 0, 0, 1, 1, 1, 2, 2])
    cfg = ModelConfig(d_in=4, n_topics=k)
    loss = compute_loss(out, y_seg, y_topic, np.ones(n, bool), cfg)
    gap = abs(float(loss.data) - (np.log(2.0) + np.log(float(k))))
    assert gap < 1e-9

    rng = np.random.default_rng(31)
    S = rng.normal(size=(6, TINY.d_in))
    y_seg6 = np.array([1, 0, 0, 1, 0, 0])
    y_topic6 = np.array([0, 0, 0, 2, 2, 2])
    for disabled_head, cfg_kwargs in (
            ("topic_head", {"use_topic_loss": False}),
            ("seg_head", {"use_seg_loss": False})):
        cfg_ab = ModelConfig(d_in=5, n_topics=3, d_model=8, n_layers=1,
                             n_heads=2, d_ffn=16, max_len=6, dropout=0.0,
                             **cfg_kwargs)
        params = init_params(cfg_ab, seed=5, dtype=np.float64)
        with Graph() as graph:
            fwd = forward(S, params, cfg_ab)
            backward(compute_loss(fwd, y_seg6, y_topic6,
                                  np.ones(6, bool), cfg_ab), graph)
        dead = params[f"{disabled_head}.w"].grad
        live_name = "seg_head" if disabled_head == "topic_head" else "topic_head"
        live = params[f"{live_name}.w"].grad
        assert dead is None or not np.any(dead), \
            f"{disabled_head} received gradient while its loss was disabled"
        assert live is not None and np.any(live)

    note(f"|L - ln2 - lnK| = {gap:.1e}; disabled heads got exactly 0 gradient")


# ---------------------------------------------------------------------------
# Criterion: masking statistics
# ---------------------------------------------------------------------------

def test_masking_statistics(note):
    y_seg = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0], dtype=np.int64)
    inner = y_seg == 0
    rng = np.random.default_rng(12)
    kept = np.zeros(y_seg.size, dtype=np.int64)
    for _ in range(10_000):
        mask = sample_loss_mask(y_seg, 0.7, rng)
        assert mask[y_seg == 1].all(), "a boundary sentence was masked out"
        kept += mask
    rate = kept[inner].sum() / (10_000 * int(inner.sum()))
    assert 0.28 <= rate <= 0.32, f"inner inclusion rate {rate}"
    note(f"inner inclusion rate {rate:.4f} in [0.28, 0.32]; "
         "boundaries kept in all 10000 draws")


# ---------------------------------------------------------------------------
# Criterion: end-to-end learning
# ---------------------------------------------------------------------------

def test_end_to_end_learning(note):
    started = time.perf_counter()
    docs, single, pairwise = generate_synthetic()  # separation 3.0 defaults
    train_docs, val_docs, _ = split_corpus(docs, (0.8, 0.1, 0.1), seed=0)
    model_cfg = ModelConfig(d_in=64, n_topics=4, d_model=192, dropout=0.1)
    train_cfg = TrainConfig(batch_size=2, max_epochs=30, patience=5, seed=0)
    result = train(train_docs, val_docs, single, pairwise, model_cfg, train_cfg)
    wall = time.perf_counter() - started
    report = evaluate_model(result.params, model_cfg, val_docs, single, pairwise)

    assert len(result.epoch_log) <= 30
    assert wall < 600.0, f"training took {wall:.0f}s"
    assert result.best_val_pk <= 0.10, f"val Pk {result.best_val_pk:.4f}"
    assert report["topic_accuracy"] >= 0.90

    # with no topic signal at all, the trained model must be no better
    # than chance: its Pk stays inside the random-baseline band
    docs0, single0, pairwise0 = generate_synthetic(separation=0.0)
    train0, val0, test0 = split_corpus(docs0, (0.8, 0.1, 0.1), seed=0)
    result0 = train(train0, val0, single0, pairwise0, model_cfg, train_cfg)
    report0 = evaluate_model(result0.params, model_cfg, test0, single0, pairwise0)
    assert 0.35 <= report0["corpus_pk"] <= 0.65, \
        f"separation-0 control Pk {report0['corpus_pk']:.4f} outside band"

    note(f"val Pk {result.best_val_pk:.4f}, topic acc "
         f"{report['topic_accuracy']:.3f}, epoch {result.best_epoch}, "
         f"{wall:.0f}s; separation-0 control Pk {report0['corpus_pk']:.3f}")


# ---------------------------------------------------------------------------
# Criterion: ablation grid
# ---------------------------------------------------------------------------

EXPECTED_VARIANTS = ["full", "without S_single", "without S_pairwise",
                     "without L_topic", "without L_seg"]


def test_ablation_grid(tmp_path, note):
    ws = str(tmp_path)
    assert cli_main(["synth", "--output", ws, "--docs", "120",
                     "--sentences", "30", "--topics", "4",
                     "--separation", "0.5", "--discontinuity", "5.0",
                     "--seed", "0"]) == 0
    (tmp_path / "model.json").write_text('{"d_model": 96}')
    assert cli_main(["ablate", "--corpus", f"{ws}/corpus.jsonl",
                     "--single-embeddings", f"{ws}/single.t2emb",
                     "--pairwise-embeddings", f"{ws}/pairwise.t2emb",
                     "--config", f"{ws}/model.json",
                     "--epochs", "20", "--batch-size", "2",
                     "--patience", "20", "--seed", "0",
                     "--output", f"{ws}/grid"]) == 0

    rows = json.loads((tmp_path / "grid" / "ablation.json").read_text())
    assert [r["variant"] for r in rows] == EXPECTED_VARIANTS
    for row in rows:
        assert set(row) == {"variant", "val_pk", "test_pk",
                            "topic_accuracy", "epochs_run"}
    by_name = {r["variant"]: r for r in rows}
    full_pk = by_name["full"]["test_pk"]
    no_seg_pk = by_name["without L_seg"]["test_pk"]
    assert no_seg_pk > full_pk, \
        f"topic-change decoding ({no_seg_pk:.4f}) must be strictly worse " \
        f"than the full model ({full_pk:.4f})"
    note(f"5 rows; full test Pk {full_pk:.4f} < without L_seg {no_seg_pk:.4f}")


# ---------------------------------------------------------------------------
# Criterion: determinism and persistence
# ---------------------------------------------------------------------------

def test_determinism_and_persistence(tmp_path, note):
    docs, single, pairwise = generate_synthetic(
        n_docs=14, sentences_per_doc=12, embed_dim=8, seed=2)
    train_docs, val_docs = docs[:12], docs[12:]
    model_cfg = ModelConfig(d_in=16, n_topics=4, d_model=16, n_layers=1,
                            n_heads=4, d_ffn=32, max_len=20)
    train_cfg = TrainConfig(batch_size=2, max_epochs=1, patience=1, seed=9)
    first = train(train_docs, val_docs, single, pairwise, model_cfg, train_cfg)
    second = train(train_docs, val_docs, single, pairwise, model_cfg, train_cfg)
    assert len(first.step_losses) >= 5
    assert first.step_losses[:5] == second.step_losses[:5], \
        "same-seed training diverged within the first 5 steps"

    S = compose_document_matrix(docs[0], single, pairwise,
                                cap=model_cfg.max_len).S
    before = forward(S, first.params, model_cfg)
    ckpt = tmp_path / "model.t2ckpt"
    save_checkpoint(str(ckpt), first.params, model_cfg, ["a", "b", "c", "d"],
                    {"single": True, "pairwise": True})
    params2, cfg2, vocab, blocks = load_checkpoint(str(ckpt))
    after = forward(S, params2, cfg2)
    np.testing.assert_array_equal(before.seg_prob.data, after.seg_prob.data)
    np.testing.assert_array_equal(before.topic_prob.data, after.topic_prob.data)
    assert vocab == ["a", "b", "c", "d"]

    store_path = tmp_path / "roundtrip.t2emb"
    save_embedding_store(single, str(store_path))
    blob = store_path.read_bytes()
    save_embedding_store(load_embedding_store(str(store_path)), str(store_path))
    assert store_path.read_bytes() == blob

    corpus_path = tmp_path / "roundtrip.jsonl"
    save_corpus(docs, str(corpus_path))
    corpus_blob = corpus_path.read_bytes()
    save_corpus(load_corpus(str(corpus_path)), str(corpus_path))
    assert corpus_path.read_bytes() == corpus_blob

    note("5 step losses bit-identical; checkpoint predictions bit-identical; "
         "T2EMB and JSONL round trips byte-exact")
