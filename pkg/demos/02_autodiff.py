"""The reverse-mode tape: record a computation, walk it backwards, and
verify every gradient against central finite differences."""

import numpy as np

from topseg import Graph, Tensor, backward, finite_diff_check, zero_grad
from topseg import autodiff as ad

rng = np.random.default_rng(0)

# Leaves are Tensors; requires_grad marks what we differentiate with
# respect to.  float64 keeps the finite-difference comparison sharp.
w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)
x = Tensor(rng.normal(size=(5, 4)))

# Operations only record while a Graph is active.
with Graph() as g:
    h = ad.gelu(ad.add(ad.matmul(x, w), b))
    p = ad.softmax(h)
    loss = ad.scale(ad.tensor_sum(ad.mul(p, p)), 0.5)
    backward(loss, g)

print("loss =", float(loss.data))
print("dL/dw row 0:", w.grad[0])
print("dL/db:     ", b.grad)

# Gradients accumulate across backward calls until cleared.
zero_grad([w, b])
print("after zero_grad:", w.grad)

# finite_diff_check reruns the function while wiggling one coordinate at
# a time; the return value is the worst relative disagreement.
def f(t: Tensor) -> Tensor:
    h = ad.gelu(ad.add(ad.matmul(x, t), b))
    return ad.tensor_sum(ad.mul(ad.softmax(h), h))

err = finite_diff_check(f, w)
print(f"max relative gradient error: {err:.2e}")
assert err < 1e-6

# The same machinery covers masked attention weights: pad keys get an
# exactly-zero probability and no gradient flows through them.
scores = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
mask = np.array([[True, True, True, False],
                 [True, True, False, False]])
with Graph() as g:
    weights = ad.softmax(scores, mask=mask)
    backward(ad.tensor_sum(ad.mul(weights, weights)), g)
print("masked weights:\n", weights.data)
print("pad-key gradients:\n", scores.grad[~mask])
