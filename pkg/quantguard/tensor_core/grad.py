"""
Reverse-mode propagation rules (vector-Jacobian products) for tensor_core ops.

Each rule takes the forward operands and the upstream gradient and returns the
gradient for every operand, in operand order.
"""
import numpy as np

from quantguard.errors import ShapeError
from quantguard.tensor_core.tensor import Tensor, as_tensor


def matmul_vjp(a, b, upstream):
    """Gradients of a @ b: (g @ bᵀ, aᵀ @ g)."""
    a, b, g = as_tensor(a).data, as_tensor(b).data, as_tensor(upstream).data
    if g.shape != (a.shape[0], b.shape[1]):
        raise ShapeError(f"upstream {list(g.shape)} does not match product [{a.shape[0]}x{b.shape[1]}]")
    return Tensor.wrap(g @ b.T), Tensor.wrap(a.T @ g)


def ste_mask(pre_activation):
    """Straight-through window: 1 where |x| <= 1, else 0."""
    x = as_tensor(pre_activation).data
    return (np.abs(x) <= 1).astype(x.dtype)


def _reduce_to(grad, operand):
    # scalar operands receive the summed gradient
    if operand.size == 1 and grad.size != 1:
        return np.asarray(grad.sum(), dtype=grad.dtype).reshape(operand.shape)
    return grad


def elementwise_vjp(op, inputs, upstream):
    g = as_tensor(upstream).data
    arrays = [as_tensor(x).data for x in inputs]
    if op == "add":
        grads = [g, g]
    elif op == "sub":
        grads = [g, -g]
    elif op == "mul":
        left, right = arrays
        grads = [g * right, g * left]
    elif op == "relu":
        grads = [g * (arrays[0] > 0)]
    elif op in ("hardtanh", "sign"):
        # sign is differentiated through its hardtanh surrogate
        grads = [g * ste_mask(arrays[0])]
    elif op == "exp":
        grads = [g * np.exp(arrays[0])]
    elif op == "log":
        grads = [g / arrays[0]]
    else:
        raise ValueError(f"No gradient rule for '{op}'")
    return tuple(Tensor.wrap(_reduce_to(gr, arr)) for gr, arr in zip(grads, arrays))
