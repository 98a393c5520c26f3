"""Training protocol: Adam, inner-sentence loss masking, early stopping.

Batches are whole documents padded to the batch maximum length.  The
segmentation loss sees only a random subset of inner sentences each
epoch (boundary sentences always count), which rebalances the rare
positive class.  Validation Pk after every epoch drives early stopping;
the best-validation parameters are returned, not the last ones.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoding import compose_document_matrix
from .errors import ConfigError, ContractError, TrainingDivergedError
from .metrics import compute_k, pk_document
from .model import (ModelConfig, compute_loss, derive_boundaries_from_topics,
                    forward_batch, init_params, predict_boundaries)


@dataclass
class TrainConfig:
    """Optimization hyperparameters."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    max_epochs: int = 30
    patience: int = 5
    mask_rate: float = 0.7
    clip_norm: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ConfigError(f"mask_rate must lie in [0, 1), got {self.mask_rate}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("invalid Adam moment parameters")
        if self.clip_norm < 0:
            raise ConfigError(f"clip_norm must be >= 0, got {self.clip_norm}")


def sample_loss_mask(y_seg: np.ndarray, mask_rate: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Choose the positions whose segmentation loss counts this epoch.

    Every boundary sentence (label 1) is always included; each inner
    sentence survives independently with probability 1 - mask_rate.

    Args:
        y_seg: {0,1} labels over the document's real positions.
        mask_rate: fraction of inner sentences to drop, in [0, 1).
        rng: sampling generator.

    Returns:
        Boolean vector, True where the position contributes to the loss.
    """
    y = np.asarray(y_seg)
    if not 0.0 <= mask_rate < 1.0:
        raise ContractError(f"mask_rate must lie in [0, 1), got {mask_rate}")
    return (y == 1) | (rng.random(y.shape) >= mask_rate)


@dataclass
class AdamState:
    """First/second moment accumulators and the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @staticmethod
    def init(params: dict[str, ad.Tensor]) -> "AdamState":
        trainable = {n: p for n, p in params.items() if p.requires_grad}
        return AdamState(
            m={n: np.zeros_like(p.data) for n, p in trainable.items()},
            v={n: np.zeros_like(p.data) for n, p in trainable.items()})


def adam_step(params: dict[str, ad.Tensor], grads: dict[str, np.ndarray | None],
              state: AdamState, config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place.

    Missing or None gradients count as zero (their parameters keep
    decaying moments but receive no first-step update).
    """
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, m in state.m.items():
        p = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif not np.isfinite(g).all():
            raise TrainingDivergedError(f"non-finite gradient for tensor {name!r}")
        m *= b1
        m += (1.0 - b1) * g
        v = state.v[name]
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data = p.data - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)


def clip_gradients(grads: dict[str, np.ndarray | None], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.  max_norm <= 0 disables clipping.
    """
    total_sq = sum(float(np.square(g).sum()) for g in grads.values() if g is not None)
    total = float(np.sqrt(total_sq))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for name, g in grads.items():
            if g is not None:
                grads[name] = g * factor
    return total


@dataclass
class PreparedDoc:
    """A document composed, truncated, and converted to training arrays."""

    id: str
    S: np.ndarray
    y_seg: np.ndarray
    y_topic: np.ndarray


def prepare_docs(docs, single, pairwise, max_len: int) -> list[PreparedDoc]:
    """Compose embedding matrices once; labels truncated to match."""
    prepared = []
    for doc in docs:
        matrix = compose_document_matrix(doc, single, pairwise, cap=max_len)
        cut = doc.truncated(matrix.n)
        prepared.append(PreparedDoc(
            doc.id, matrix.S,
            np.asarray(cut.boundaries, dtype=np.int64),
            np.asarray(cut.topics, dtype=np.int64)))
    return prepared


def _assemble_batch(docs: list[PreparedDoc], mask_rate: float,
                    rng: np.random.Generator):
    n_max = max(d.S.shape[0] for d in docs)
    b = len(docs)
    d_in = docs[0].S.shape[1]
    S = np.zeros((b, n_max, d_in), dtype=np.float32)
    pad = np.zeros((b, n_max), dtype=bool)
    y_seg = np.zeros((b, n_max), dtype=np.int64)
    y_topic = np.zeros((b, n_max), dtype=np.int64)
    loss_mask = np.zeros((b, n_max), dtype=bool)
    for row, doc in enumerate(docs):
        n = doc.S.shape[0]
        S[row, :n] = doc.S
        pad[row, :n] = True
        y_seg[row, :n] = doc.y_seg
        y_topic[row, :n] = doc.y_topic
        loss_mask[row, :n] = sample_loss_mask(doc.y_seg, mask_rate, rng)
    return S, pad, y_seg, y_topic, loss_mask


@dataclass
class TrainResult:
    """Best parameters plus the full optimization trace."""

    params: dict[str, ad.Tensor]
    best_val_pk: float
    best_epoch: int
    epoch_log: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)


def _copy_params(params: dict[str, ad.Tensor]) -> dict[str, ad.Tensor]:
    return {n: ad.Tensor(p.data.copy(), requires_grad=p.requires_grad)
            for n, p in params.items()}


def train(train_docs, val_docs, single, pairwise, model_cfg: ModelConfig,
          train_cfg: TrainConfig, threshold: float | None = None) -> TrainResult:
    """Full optimization run with per-epoch validation Pk early stopping.

    Args:
        train_docs: training Documents.
        val_docs: validation Documents scored after every epoch.
        single: single-sentence provider (store or hash config), or None.
        pairwise: pairwise provider, or None.
        model_cfg: architecture; d_in must match the composed width.
        train_cfg: optimization hyperparameters.
        threshold: boundary decode threshold for validation; defaults to
            the model config's.

    Returns:
        TrainResult holding the minimum-validation-Pk parameters, the
        per-epoch log (epoch, train_loss, val_pk, seconds), and every
        step's loss in execution order.
    """
    model_cfg.validate()
    train_cfg.validate()
    if not train_docs or not val_docs:
        raise ConfigError("train and validation splits must both be non-empty")
    train_prep = prepare_docs(train_docs, single, pairwise, model_cfg.max_len)
    if train_prep[0].S.shape[1] != model_cfg.d_in:
        raise ConfigError(
            f"composed width {train_prep[0].S.shape[1]} != configured d_in {model_cfg.d_in}")

    rng = np.random.default_rng(train_cfg.seed)
    params = init_params(model_cfg, train_cfg.seed)
    state = AdamState.init(params)
    result = TrainResult(params=params, best_val_pk=np.inf, best_epoch=0)
    epochs_since_best = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_prep))
        epoch_losses: list[float] = []
        for lo in range(0, len(order), train_cfg.batch_size):
            batch = [train_prep[i] for i in order[lo:lo + train_cfg.batch_size]]
            S, pad, y_seg, y_topic, loss_mask = _assemble_batch(
                batch, train_cfg.mask_rate, rng)
            with ad.Graph() as graph:
                out = forward_batch(S, pad, params, model_cfg,
                                    train_mode=True, rng=rng)
                loss = compute_loss(out, y_seg, y_topic, loss_mask, model_cfg)
                ad.backward(loss, graph)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise TrainingDivergedError(
                    f"non-finite loss {loss_val} at epoch {epoch}")
            epoch_losses.append(loss_val)
            result.step_losses.append(loss_val)
            grads = {n: p.grad for n, p in params.items() if p.requires_grad}
            clip_gradients(grads, train_cfg.clip_norm)
            adam_step(params, grads, state, train_cfg)
            ad.zero_grad(params.values())

        val_report = evaluate_model(params, model_cfg, val_docs, single,
                                    pairwise, threshold=threshold)
        val_pk = val_report["corpus_pk"]
        result.epoch_log.append({
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "val_pk": val_pk,
            "seconds": round(time.perf_counter() - started, 3),
        })
        if val_pk < result.best_val_pk:
            result.best_val_pk = val_pk
            result.best_epoch = epoch
            result.params = _copy_params(params)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= train_cfg.patience:
                break
    return result


def summarize_predictions(entries, oov_id: int | None = None) -> dict:
    """Aggregate per-document predictions into the evaluation report.

    Args:
        entries: iterable of (doc_id, reference, hypothesis, gold_topics,
            predicted_topics) with boundary vectors over real positions.
        oov_id: topic id excluded from accuracy (gold positions carrying
            it are not counted for or against).

    Returns:
        {"corpus_pk", "docs": [{"id", "n", "k", "pk"}], "topic_accuracy"}.
    """
    docs = []
    pks = []
    correct = 0
    total = 0
    for doc_id, ref, hyp, gold_topics, pred_topics in entries:
        ref = np.asarray(ref)
        k = compute_k(ref)
        pk = pk_document(ref, hyp, k)
        docs.append({"id": doc_id, "n": int(ref.size), "k": k, "pk": pk})
        pks.append(pk)
        gold = np.asarray(gold_topics)
        pred = np.asarray(pred_topics)
        counted = np.ones(gold.shape, bool) if oov_id is None else gold != oov_id
        correct += int((gold[counted] == pred[counted]).sum())
        total += int(counted.sum())
    if not docs:
        raise ContractError("no documents to evaluate")
    return {
        "corpus_pk": float(np.mean(pks)),
        "docs": docs,
        "topic_accuracy": float(correct / total) if total else float("nan"),
    }


def evaluate_model(params, model_cfg: ModelConfig, docs, single, pairwise,
                   threshold: float | None = None,
                   oov_id: int | None = None) -> dict:
    """Score a document split with the current parameters.

    Decoding uses the boundary head at the configured threshold, or topic
    change-points when the segmentation loss is ablated.  Deterministic:
    the same inputs always produce the same report.
    """
    if threshold is None:
        threshold = model_cfg.boundary_threshold
    prepared = prepare_docs(docs, single, pairwise, model_cfg.max_len)
    entries = []
    for doc in prepared:
        n = doc.S.shape[0]
        out = forward_batch(doc.S[None], np.ones((1, n), bool), params, model_cfg)
        seg_prob = out.seg_prob.data[0]
        topic_prob = out.topic_prob.data[0]
        if model_cfg.use_seg_loss:
            hyp = predict_boundaries(seg_prob, threshold)
        else:
            hyp = derive_boundaries_from_topics(topic_prob)
        entries.append((doc.id, doc.y_seg, hyp, doc.y_topic,
                        np.argmax(topic_prob, axis=1)))
    return summarize_predictions(entries, oov_id=oov_id)
