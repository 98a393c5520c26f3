"""Reverse-mode automatic differentiation over a recorded operation tape.

Tensors wrap dense numpy arrays (float64 in tests, float32 in training
paths).  Every differentiable operation executed while a Graph is active
appends one node to the tape; ``backward`` replays the tape in exact
reverse execution order and accumulates gradients into leaf tensors.

Components:
    Tensor              - array + requires_grad flag + gradient accumulator
    Graph               - ordered record of executed operations
    op functions        - matmul, add, mul, softmax, layer_norm, gelu, ...
    backward            - reverse sweep from a scalar loss
    finite_diff_check   - central-difference gradient verifier
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

_GRAPH_STACK: list["Graph"] = []


class Tensor:
    """Dense real-valued array with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Sugar used by the model code; all routing goes through the op functions.
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


class Graph:
    """Ordered tape of executed operations.

    Usable as a context manager; ops executed inside the ``with`` block are
    recorded when their output depends on a ``requires_grad`` tensor.
    Recording preserves execution order, so inputs of any node precede it.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._output_ids: set[int] = set()

    def record(self, output: Tensor, inputs: Sequence[Tensor],
               backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]) -> None:
        """Append one executed operation to the tape.

        ``backward_fn`` maps the output gradient to one gradient (or None)
        per input, in input order.
        """
        self._nodes.append((output, tuple(inputs), backward_fn))
        self._output_ids.add(id(output))

    def __len__(self) -> int:
        return len(self._nodes)

    def __enter__(self) -> "Graph":
        _GRAPH_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _GRAPH_STACK.pop()


def _active_graph() -> Graph | None:
    return _GRAPH_STACK[-1] if _GRAPH_STACK else None


def _result(data: np.ndarray, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap an op result, recording it on the active tape when needed."""
    graph = _active_graph()
    needs = graph is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        graph.record(out, inputs, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def backward(loss: Tensor, graph: Graph) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``.grad``.

    Visits tape nodes in exact reverse execution order.  Repeated calls
    without ``zero_grad`` add gradients; intermediate node gradients are
    transient per call.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if len(graph) and id(loss) not in graph._output_ids:
        raise ContractError("loss tensor was not produced on the given graph")
    transient: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for output, inputs, backward_fn in reversed(graph._nodes):
        g_out = transient.pop(id(output), None)
        if g_out is None:
            continue
        for inp, g_in in zip(inputs, backward_fn(g_out)):
            if g_in is None or not inp.requires_grad:
                continue
            if id(inp) in graph._output_ids:
                prev = transient.get(id(inp))
                transient[id(inp)] = g_in if prev is None else prev + g_in
            elif inp.grad is None:
                inp.grad = g_in.copy()
            else:
                inp.grad = inp.grad + g_in


def zero_grad(tensors) -> None:
    """Reset the gradient accumulator of every given tensor."""
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    data = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _result(data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a Python scalar (not a tracked tensor)."""
    return _result(a.data * factor, (a,), lambda g: (g * factor,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    data = a.data * b.data
    a_data, b_data = a.data, b.data

    def bwd(g):
        return (_unbroadcast(g * b_data, a_data.shape),
                _unbroadcast(g * a_data, b_data.shape))

    return _result(data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; stacked (batched) operands follow numpy semantics."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(
            f"matmul requires matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    data = a.data @ b.data
    a_data, b_data = a.data, b.data

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(b_data, -1, -2), a_data.shape)
        gb = _unbroadcast(np.swapaxes(a_data, -1, -2) @ g, b_data.shape)
        return ga, gb

    return _result(data, (a, b), bwd)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    original = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(original),))


def tensor_sum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a_shape, a_dtype = a.data.shape, a.data.dtype
    return _result(np.asarray(a.data.sum(), dtype=a_dtype), (a,),
                   lambda g: (np.broadcast_to(g, a_shape).astype(a_dtype, copy=False),))


def softmax(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along the last axis, max-subtracted for stability.

    ``mask`` is a boolean array broadcastable to ``x`` marking valid
    entries; invalid entries get probability exactly zero and receive no
    gradient.  A slice with no valid entry is a contract violation.
    """
    if mask is None:
        shifted = x.data - x.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
    else:
        m = np.broadcast_to(mask, x.data.shape)
        if not m.any(axis=-1).all():
            raise ContractError("softmax slice with no valid (unmasked) entries")
        neg_inf = np.array(-np.inf, dtype=x.data.dtype)
        valid = np.where(m, x.data, neg_inf)
        shifted = valid - valid.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        return (p * (g - dot),)

    return _result(p, (x,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if x.shape[-1] < 2:
        raise ContractError("layer_norm needs at least 2 features on the last axis")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = xhat * gain.data + bias.data
    gain_data = gain.data

    def bwd(g):
        gx = g * gain_data
        gxhat_mean = gx.mean(axis=-1, keepdims=True)
        gx_xhat_mean = (gx * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (gx - gxhat_mean - xhat * gx_xhat_mean)
        sum_axes = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=sum_axes) if g.ndim > 1 else g * xhat
        dbias = g.sum(axis=sum_axes) if g.ndim > 1 else g.copy()
        return dx, dgain, dbias

    return _result(data, (x, gain, bias), bwd)


_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


def gelu(x: Tensor) -> Tensor:
    """GELU activation (tanh approximation)."""
    xd = x.data
    u = _GELU_C * (xd + _GELU_A * xd**3)
    t = np.tanh(u)
    data = 0.5 * xd * (1.0 + t)

    def bwd(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * xd**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du),)

    return _result(data, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, evaluated stably on both tails."""
    xd = x.data
    s = np.empty_like(xd)
    pos = xd >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    e = np.exp(xd[~pos])
    s[~pos] = e / (1.0 + e)

    def bwd(g):
        return (g * s * (1.0 - s),)

    return _result(s, (x,), bwd)


def log(x: Tensor) -> Tensor:
    xd = x.data

    def bwd(g):
        return (g / xd,)

    return _result(np.log(xd), (x,), bwd)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only through unclamped entries."""
    data = np.clip(x.data, lo, hi)
    passthrough = (x.data >= lo) & (x.data <= hi)

    def bwd(g):
        return (g * passthrough,)

    return _result(data, (x,), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator,
            train: bool = True) -> Tensor:
    """Bernoulli keep-mask scaled by 1/keep; identity when not training."""
    if not train or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) >= rate).astype(x.data.dtype) / keep
    return _result(x.data * mask, (x,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor,
                      h: float = 1e-5) -> float:
    """Compare the analytic gradient of f at x against central differences.

    Returns max over coordinates of |analytic - central| / max(1, |analytic|).
    ``f`` must be scalar-valued and smooth near x; evaluation order restores
    x exactly after probing.
    """
    if h <= 0:
        raise ContractError("finite_diff_check step h must be positive")
    was_requiring = x.requires_grad
    x.requires_grad = True
    x.grad = None
    with Graph() as graph:
        out = f(x)
        if out.data.size != 1:
            x.requires_grad = was_requiring
            raise ContractError("finite_diff_check requires a scalar-valued function")
        backward(out, graph)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad
    worst = 0.0
    flat = x.data.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        f_plus = f(x).item()
        flat[i] = saved - h
        f_minus = f(x).item()
        flat[i] = saved
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = float(analytic.reshape(-1)[i])
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    x.requires_grad = was_requiring
    x.grad = None
    return worst
