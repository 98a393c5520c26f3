"""Trainable encoder over frozen sentence embeddings with two heads.

The model reads the composed matrix S (one row per sentence), projects
it to d_model, adds a fixed sinusoidal positional table, and runs a
pre-norm transformer encoder stack.  Two linear heads sit on top: a
single-logit boundary head squashed by the logistic function and a K-way
topic head under softmax.  The training objective is the unweighted sum
of binary cross-entropy over masked-in positions and categorical
cross-entropy over all real positions.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (BadMagicError, ConfigError, ContractError,
                     DimensionError, FormatError)
from .fileio import (atomic_write_bytes, pack_f32_array, pack_u8, pack_u16,
                     pack_u32, read_exact, read_f32_array, read_u8, read_u16,
                     read_u32)

CHECKPOINT_MAGIC = b"T2CKPT01"
PROB_EPS = 1e-7
NON_TRAINABLE = {"pos_table"}


@dataclass
class ModelConfig:
    """Architecture and loss switches; all tensor shapes derive from this."""

    d_in: int
    n_topics: int
    d_model: int = 768
    n_layers: int = 5
    n_heads: int = 24
    d_ffn: int = 1024
    max_len: int = 150
    dropout: float = 0.1
    use_topic_loss: bool = True
    use_seg_loss: bool = True
    boundary_threshold: float = 0.5

    def validate(self) -> None:
        if self.d_in < 1:
            raise ConfigError(f"d_in must be positive, got {self.d_in}")
        if self.d_model < 2 or self.n_layers < 1 or self.d_ffn < 1 or self.max_len < 1:
            raise ConfigError("d_model/n_layers/d_ffn/max_len must be positive")
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not (self.use_topic_loss or self.use_seg_loss):
            raise ConfigError("at least one loss must be enabled")
        if self.n_topics < 1 or (self.use_topic_loss and self.n_topics < 2):
            raise ConfigError(
                f"n_topics must be >= 2 when the topic loss is enabled, got {self.n_topics}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "ModelConfig":
        cfg = ModelConfig(**obj)
        cfg.validate()
        return cfg


@dataclass
class ForwardOutput:
    """Per-position boundary probabilities and topic distributions.

    seg_prob has shape [n] (or [B, n] for a padded batch), topic_prob
    appends a K axis, and pad_mask marks real positions with True.
    Values at pad positions are meaningless by contract.
    """

    seg_prob: Tensor
    topic_prob: Tensor
    pad_mask: np.ndarray


def sinusoidal_positions(max_len: int, d_model: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos positional table of shape (max_len, d_model)."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(d_model, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / d_model)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(dtype)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every named tensor's shape, in deterministic order."""
    d, f, k = config.d_model, config.d_ffn, config.n_topics
    shapes: dict[str, tuple[int, ...]] = {
        "input_proj.w": (config.d_in, d),
        "input_proj.b": (d,),
        "pos_table": (config.max_len, d),
    }
    for i in range(config.n_layers):
        p = f"layer{i}"
        shapes[f"{p}.ln1.gain"] = (d,)
        shapes[f"{p}.ln1.bias"] = (d,)
        for proj in ("q", "k", "v", "o"):
            shapes[f"{p}.attn.w{proj}"] = (d, d)
            shapes[f"{p}.attn.b{proj}"] = (d,)
        shapes[f"{p}.ln2.gain"] = (d,)
        shapes[f"{p}.ln2.bias"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    shapes["final_norm.gain"] = (d,)
    shapes["final_norm.bias"] = (d,)
    shapes["seg_head.w"] = (d, 1)
    shapes["seg_head.b"] = (1,)
    shapes["topic_head.w"] = (d, k)
    shapes["topic_head.b"] = (k,)
    return shapes


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Glorot-uniform weights, zero biases, unit layer-norm gains.

    Deterministic in the seed: two calls with equal arguments return
    bit-identical tensors.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        if name == "pos_table":
            data = sinusoidal_positions(config.max_len, config.d_model, dtype)
        elif name.endswith(".gain"):
            data = np.ones(shape, dtype=dtype)
        elif len(shape) == 1:
            data = np.zeros(shape, dtype=dtype)
        else:
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-limit, limit, size=shape).astype(dtype)
        params[name] = Tensor(data, requires_grad=name not in NON_TRAINABLE)
    return params


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, w), b)


def multi_head_attention(x: Tensor, params: dict[str, Tensor], n_heads: int,
                         pad_mask: np.ndarray | None = None) -> Tensor:
    """Bidirectional scaled dot-product attention over sentence positions.

    Args:
        x: input of shape [n, d_model] or [B, n, d_model].
        params: the layer's projections under keys wq/bq/wk/bk/wv/bv/wo/bo.
        n_heads: head count; d_model must divide evenly.
        pad_mask: boolean [n] or [B, n], True at real positions.  Pad keys
            are excluded from every softmax row; a document with no real
            position is a contract violation.

    Returns:
        Tensor of the same shape as x.
    """
    single = x.ndim == 2
    if single:
        x = ad.reshape(x, (1,) + x.shape)
        if pad_mask is not None:
            pad_mask = np.asarray(pad_mask, bool)[None, :]
    batch, n, d = x.shape
    if d % n_heads != 0:
        raise ContractError(f"d_model {d} not divisible by {n_heads} heads")
    dh = d // n_heads

    def split_heads(t: Tensor) -> Tensor:
        return ad.transpose(ad.reshape(t, (batch, n, n_heads, dh)), (0, 2, 1, 3))

    q = split_heads(_linear(x, params["wq"], params["bq"]))
    k = split_heads(_linear(x, params["wk"], params["bk"]))
    v = split_heads(_linear(x, params["wv"], params["bv"]))
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    key_mask = None
    if pad_mask is not None:
        key_mask = np.asarray(pad_mask, bool)[:, None, None, :]
    weights = ad.softmax(scores, mask=key_mask)
    ctx = ad.reshape(ad.transpose(ad.matmul(weights, v), (0, 2, 1, 3)), (batch, n, d))
    out = _linear(ctx, params["wo"], params["bo"])
    if single:
        out = ad.reshape(out, (n, d))
    return out


def _layer_params(params: dict[str, Tensor], i: int) -> dict[str, Tensor]:
    p = f"layer{i}"
    return {key: params[f"{p}.attn.{key}"]
            for key in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}


def forward_batch(S: np.ndarray, pad_mask: np.ndarray, params: dict[str, Tensor],
                  config: ModelConfig, train_mode: bool = False,
                  rng: np.random.Generator | None = None) -> ForwardOutput:
    """Run the encoder on a padded batch of composed document matrices.

    Args:
        S: float array [B, n, d_in]; pad rows may hold anything.
        pad_mask: boolean [B, n], True at real sentence positions.
        params: named tensors from init_params or a checkpoint.
        config: architecture description matching the params.
        train_mode: enables dropout (requires rng).
        rng: generator driving dropout masks.

    Returns:
        ForwardOutput with seg_prob [B, n] and topic_prob [B, n, K].
    """
    S = np.asarray(S)
    pad_mask = np.asarray(pad_mask, bool)
    if S.ndim != 3 or pad_mask.shape != S.shape[:2]:
        raise ContractError(
            f"batch shapes disagree: S {S.shape}, pad_mask {pad_mask.shape}")
    if S.shape[2] != config.d_in:
        raise DimensionError(
            f"input width {S.shape[2]} does not match configured d_in {config.d_in}")
    if S.shape[1] > config.max_len:
        raise ContractError(
            f"document length {S.shape[1]} exceeds the {config.max_len}-sentence cap")
    if not pad_mask.any(axis=1).all():
        raise ContractError("a batch row has no real (non-pad) positions")
    if train_mode and config.dropout > 0 and rng is None:
        raise ContractError("train-mode forward needs an rng for dropout")

    n = S.shape[1]
    x = _linear(Tensor(S.astype(params["input_proj.w"].dtype, copy=False)),
                params["input_proj.w"], params["input_proj.b"])
    x = ad.add(x, Tensor(params["pos_table"].data[:n]))
    if train_mode:
        x = ad.dropout(x, config.dropout, rng, train=True)
    for i in range(config.n_layers):
        p = f"layer{i}"
        h = ad.layer_norm(x, params[f"{p}.ln1.gain"], params[f"{p}.ln1.bias"])
        x = ad.add(x, multi_head_attention(h, _layer_params(params, i),
                                           config.n_heads, pad_mask))
        h = ad.layer_norm(x, params[f"{p}.ln2.gain"], params[f"{p}.ln2.bias"])
        h = ad.gelu(_linear(h, params[f"{p}.ffn.w1"], params[f"{p}.ffn.b1"]))
        x = ad.add(x, _linear(h, params[f"{p}.ffn.w2"], params[f"{p}.ffn.b2"]))
    x = ad.layer_norm(x, params["final_norm.gain"], params["final_norm.bias"])

    seg_logit = _linear(x, params["seg_head.w"], params["seg_head.b"])
    seg_prob = ad.sigmoid(ad.reshape(seg_logit, S.shape[:2]))
    topic_prob = ad.softmax(_linear(x, params["topic_head.w"], params["topic_head.b"]))
    return ForwardOutput(seg_prob, topic_prob, pad_mask)


def forward(matrix, params: dict[str, Tensor], config: ModelConfig,
            train_mode: bool = False,
            rng: np.random.Generator | None = None) -> ForwardOutput:
    """Single-document forward pass; see forward_batch.

    Accepts an EmbeddingMatrix or a bare (n, d_in) array and returns
    seg_prob of shape [n] and topic_prob of shape [n, K].
    """
    S = matrix.S if hasattr(matrix, "S") else np.asarray(matrix)
    if S.ndim != 2:
        raise ContractError(f"expected one document of shape (n, d_in), got {S.shape}")
    if S.shape[0] < 1:
        raise ContractError("document has no sentences")
    out = forward_batch(S[None, :, :], np.ones((1, S.shape[0]), bool),
                        params, config, train_mode, rng)
    n = S.shape[0]
    return ForwardOutput(ad.reshape(out.seg_prob, (n,)),
                         ad.reshape(out.topic_prob, (n, config.n_topics)),
                         out.pad_mask[0])


def compute_loss(out: ForwardOutput, y_seg: np.ndarray, y_topic: np.ndarray,
                 loss_mask: np.ndarray, config: ModelConfig) -> Tensor:
    """Joint objective: masked binary + full categorical cross-entropy.

    The segmentation term averages binary cross-entropy over masked-in
    positions only; the topic term averages categorical cross-entropy
    over every real position.  Disabled terms contribute nothing, so no
    gradient reaches their head.  Probabilities are clamped to
    [1e-7, 1 - 1e-7] before the log.

    Args:
        out: forward output (single document or padded batch).
        y_seg: {0,1} boundary labels, same shape as out.seg_prob.
        y_topic: integer topic labels, same shape.
        loss_mask: boolean mask of positions contributing to the
            segmentation term; must be a subset of real positions.
        config: supplies the loss switches.

    Returns:
        Scalar Tensor on the active tape.
    """
    shape = out.seg_prob.data.shape
    pad = np.asarray(out.pad_mask, bool)
    y_seg = np.asarray(y_seg)
    y_topic = np.asarray(y_topic)
    loss_mask = np.asarray(loss_mask, bool)
    for name, arr in (("y_seg", y_seg), ("y_topic", y_topic), ("loss_mask", loss_mask)):
        if arr.shape != shape:
            raise ContractError(f"{name} shape {arr.shape} != predictions shape {shape}")
    if pad.shape != shape:
        raise ContractError(f"pad_mask shape {pad.shape} != predictions shape {shape}")
    if (loss_mask & ~pad).any():
        raise ContractError("loss_mask marks pad positions")

    dtype = out.seg_prob.dtype
    terms: list[Tensor] = []
    if config.use_seg_loss:
        m = int(loss_mask.sum())
        if m == 0:
            raise ContractError("segmentation loss enabled but loss_mask is empty")
        p = ad.clip(out.seg_prob, PROB_EPS, 1.0 - PROB_EPS)
        w_pos = ((loss_mask & (y_seg == 1)) / m).astype(dtype)
        w_neg = ((loss_mask & (y_seg == 0)) / m).astype(dtype)
        one = Tensor(np.ones(shape, dtype=dtype))
        pos_term = ad.tensor_sum(ad.mul(ad.log(p), Tensor(w_pos)))
        neg_term = ad.tensor_sum(ad.mul(ad.log(ad.add(one, ad.neg(p))), Tensor(w_neg)))
        terms.append(ad.neg(ad.add(pos_term, neg_term)))
    if config.use_topic_loss:
        n_real = int(pad.sum())
        onehot = np.eye(config.n_topics, dtype=dtype)[np.clip(y_topic, 0,
                                                              config.n_topics - 1)]
        if (y_topic[pad] >= config.n_topics).any() or (y_topic[pad] < 0).any():
            raise ContractError(f"topic labels out of range [0, {config.n_topics})")
        weights = onehot * (pad / n_real).astype(dtype)[..., None]
        pt = ad.clip(out.topic_prob, PROB_EPS, 1.0 - PROB_EPS)
        terms.append(ad.neg(ad.tensor_sum(ad.mul(ad.log(pt), Tensor(weights)))))
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return total


def predict_boundaries(seg_prob: np.ndarray, threshold: float) -> np.ndarray:
    """Threshold decode; position 0 is forced to 1 (a document starts a segment)."""
    probs = np.asarray(seg_prob, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 1:
        raise ContractError(f"seg_prob must be a non-empty vector, got shape {probs.shape}")
    out = (probs >= threshold).astype(np.int64)
    out[0] = 1
    return out


def derive_boundaries_from_topics(topic_prob: np.ndarray) -> np.ndarray:
    """Boundary wherever the argmax topic label changes (ties take the
    lowest index); used in place of the boundary head when the
    segmentation loss is ablated."""
    probs = np.asarray(topic_prob)
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise ContractError(f"topic_prob must be (n, K), got shape {probs.shape}")
    labels = np.argmax(probs, axis=1)
    out = np.zeros(probs.shape[0], dtype=np.int64)
    out[0] = 1
    out[1:] = labels[1:] != labels[:-1]
    return out


# ---------------------------------------------------------------------------
# Checkpoint format
# ---------------------------------------------------------------------------

def save_checkpoint(path: str, params: dict[str, Tensor], config: ModelConfig,
                    vocabulary: list[str], blocks: dict[str, int]) -> None:
    """Serialize params + config + topic vocabulary + embedding layout.

    The header JSON is canonical (sorted keys, no whitespace) and tensors
    follow in sorted name order as float32, so save -> load -> save is
    byte-identical.
    """
    header = {"config": config.to_dict(), "vocabulary": list(vocabulary),
              "blocks": dict(blocks)}
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(pack_u32(len(header_bytes)))
    buf.write(header_bytes)
    for name in sorted(params):
        data = params[name].data
        encoded = name.encode("utf-8")
        buf.write(pack_u16(len(encoded)))
        buf.write(encoded)
        buf.write(pack_u8(data.ndim))
        for dim in data.shape:
            buf.write(pack_u32(dim))
        buf.write(pack_f32_array(data))
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str):
    """Read a checkpoint; returns (params, config, vocabulary, blocks).

    Tensor shapes are validated against the config so a corrupt or
    mismatched file fails loudly instead of mispredicting.
    """
    with open(path, "rb") as fh:
        magic = read_exact(fh, len(CHECKPOINT_MAGIC), "magic")
        if magic != CHECKPOINT_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        header_len = read_u32(fh, "header length")
        try:
            header = json.loads(read_exact(fh, header_len, "header").decode("utf-8"))
            config = ModelConfig.from_dict(header["config"])
            vocabulary = [str(x) for x in header["vocabulary"]]
            blocks = {str(k): int(v) for k, v in header["blocks"].items()}
        except (json.JSONDecodeError, KeyError, TypeError, ConfigError) as e:
            raise FormatError(f"{path}: invalid checkpoint header: {e}") from e
        params: dict[str, Tensor] = {}
        expected = param_shapes(config)
        while True:
            raw = fh.read(2)
            if not raw:
                break
            if len(raw) != 2:
                raise FormatError(f"{path}: truncated tensor record")
            name_len = int.from_bytes(raw, "little")
            name = read_exact(fh, name_len, "tensor name").decode("utf-8")
            rank = read_u8(fh, f"rank of {name}")
            shape = tuple(read_u32(fh, f"dim of {name}") for _ in range(rank))
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = read_f32_array(fh, count, f"data of {name}").reshape(shape)
            if name not in expected:
                raise FormatError(f"{path}: unexpected tensor {name!r}")
            if shape != expected[name]:
                raise FormatError(
                    f"{path}: tensor {name!r} has shape {shape}, expected {expected[name]}")
            params[name] = Tensor(data, requires_grad=name not in NON_TRAINABLE)
    missing = sorted(set(expected) - set(params))
    if missing:
        raise FormatError(f"{path}: missing tensors {missing}")
    return params, config, vocabulary, blocks
