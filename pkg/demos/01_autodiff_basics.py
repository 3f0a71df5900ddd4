"""Walkthrough of the float64 tensor core and reverse-mode differentiation.

Run:  python demos/01_autodiff_basics.py
"""

import numpy as np

from trimodal import tensor as T
from trimodal.errors import NumericError
from trimodal.tensor import Tensor, backward

print("== tensors are dense float64 arrays ==")
a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
b = Tensor([[0.0, 1.0], [1.0, 0.0]], requires_grad=True)
print("a:", a, "\nb:", b)

print("\n== ops build a graph; backward fills leaf gradients ==")
loss = T.sum_all(T.matmul(a, b))
backward(loss)
print("loss =", loss.item())
print("d loss / d a =\n", a.grad)  # row sums of b.T
print("d loss / d b =\n", b.grad)  # column sums of a replicated

print("\n== the product rule, the classic way ==")
x = Tensor([2.0], requires_grad=True)
y = Tensor([3.0], requires_grad=True)
backward(T.sum_all(T.mul(x, y)))
print(f"d(x*y)/dx = {x.grad[0]} (y's value), d(x*y)/dy = {y.grad[0]} (x's value)")

print("\n== gradients agree with central finite differences ==")
w = Tensor(np.linspace(-1, 1, 12).reshape(3, 4), requires_grad=True)


def f():
    return T.logsumexp_all(T.softmax_rows(w))


backward(f())
analytic = w.grad.copy()
h = 1e-5
fd = np.zeros_like(w.data)
flat, fdflat = w.data.reshape(-1), fd.reshape(-1)
for i in range(flat.size):
    keep = flat[i]
    flat[i] = keep + h
    up = f().item()
    flat[i] = keep - h
    down = f().item()
    flat[i] = keep
    fdflat[i] = (up - down) / (2 * h)
print("max |analytic - finite difference| =", np.abs(analytic - fd).max())

print("\n== non-finite values are rejected at op boundaries ==")
try:
    T.exp(Tensor([1000.0]))
except NumericError as e:
    print("caught:", e)

print("\n== rows normalize exactly to unit length ==")
z = T.l2_normalize_rows(Tensor([[3.0, 4.0], [5.0, 12.0]]))
print(z.data, "row norms:", np.linalg.norm(z.data, axis=1))
