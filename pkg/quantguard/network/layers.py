"""
Layer kinds of a ModelGraph.

Every layer exposes forward(x, mode, surrogate) -> (y, aux) and
backward(x, aux, upstream) -> (grad_input, param_grads). `surrogate=True`
swaps each binarizer for the function its straight-through gradient
differentiates (hardtanh for sign activations, the latent weight for sign(W)).
"""
import math
from dataclasses import dataclass

import numpy as np

from quantguard.errors import ShapeError
from quantguard.tensor_core import (
    Tensor,
    elementwise,
    elementwise_vjp,
    matmul,
    matmul_vjp,
    real_dtype,
    transpose,
    uniform,
)

LAYER_KINDS = ("dense", "binary_dense", "relu", "sign_act", "hardtanh", "batchnorm", "softmax_xent_head")
DENSE_KINDS = ("dense", "binary_dense")

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    fan_in: int = 0
    fan_out: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind '{self.kind}', expected one of {LAYER_KINDS}")
        if self.kind in DENSE_KINDS and (self.fan_in <= 0 or self.fan_out <= 0):
            raise ShapeError(f"{self.kind} needs positive fan_in/fan_out, got {self.fan_in}/{self.fan_out}")

    def output_dim(self, input_dim):
        if self.kind in DENSE_KINDS:
            if input_dim != self.fan_in:
                raise ShapeError(f"{self.kind} expects {self.fan_in} inputs, previous layer gives {input_dim}")
            return self.fan_out
        if self.kind == "batchnorm" and self.fan_in and self.fan_in != input_dim:
            raise ShapeError(f"batchnorm over {self.fan_in} features placed after {input_dim}")
        return input_dim


class Layer:
    def __init__(self, spec):
        self.spec = spec
        self.params = {}
        self.buffers = {}

    @property
    def kind(self):
        return self.spec.kind

    def forward(self, x, mode, surrogate=False):
        raise NotImplementedError

    def backward(self, x, aux, upstream):
        raise NotImplementedError


class Dense(Layer):
    """y = x · Wᵀ + b, with W stored [fan_out, fan_in]; binary kinds use sign(W)."""

    def __init__(self, spec, rng=None):
        super().__init__(spec)
        limit = math.sqrt(6.0 / (spec.fan_in + spec.fan_out))
        if rng is None:
            self.params["W"] = Tensor.zeros((spec.fan_out, spec.fan_in))
        else:
            self.params["W"] = uniform(rng, -limit, limit, (spec.fan_out, spec.fan_in))
        self.params["b"] = Tensor.zeros((spec.fan_out,))

    @property
    def binarized(self):
        return self.kind == "binary_dense"

    def effective_weight(self, surrogate=False):
        if self.binarized and not surrogate:
            return elementwise("sign", self.params["W"])
        return self.params["W"]

    def forward(self, x, mode, surrogate=False):
        weight = self.effective_weight(surrogate)
        z = matmul(x, transpose(weight))
        return Tensor.wrap(z.data + self.params["b"].data), weight

    def backward(self, x, weight, upstream):
        # input path through sign(W); weight path straight through to the latent W
        grad_input, grad_weight_t = matmul_vjp(x, transpose(weight), upstream)
        grads = {
            "W": transpose(grad_weight_t),
            "b": Tensor.wrap(upstream.data.sum(axis=0)),
        }
        return grad_input, grads


class BatchNorm(Layer):
    def __init__(self, spec, width):
        super().__init__(spec)
        self.width = width
        self.params["gamma"] = Tensor(np.ones(width))
        self.params["beta"] = Tensor.zeros((width,))
        self.buffers["running_mean"] = Tensor.zeros((width,))
        self.buffers["running_var"] = Tensor(np.ones(width))

    def forward(self, x, mode, surrogate=False):
        values = x.data
        if mode == "train":
            mean = values.mean(axis=0)
            var = values.var(axis=0)
        else:
            mean = self.buffers["running_mean"].data
            var = self.buffers["running_var"].data
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (values - mean) * inv_std
        out = xhat * self.params["gamma"].data + self.params["beta"].data
        aux = {"mode": mode, "xhat": xhat, "inv_std": inv_std, "mean": mean, "var": var}
        return Tensor.wrap(out), aux

    def backward(self, x, aux, upstream):
        g = upstream.data
        xhat, inv_std = aux["xhat"], aux["inv_std"]
        grads = {
            "gamma": Tensor.wrap((g * xhat).sum(axis=0)),
            "beta": Tensor.wrap(g.sum(axis=0)),
        }
        dxhat = g * self.params["gamma"].data
        if aux["mode"] == "train":
            n = g.shape[0]
            dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dx = dxhat * inv_std
        return Tensor.wrap(dx), grads

    def batch_moments(self, aux):
        """Mean and unbiased variance of a train-mode batch, for the running update."""
        n = aux["xhat"].shape[0]
        var = aux["var"] * (n / (n - 1)) if n > 1 else aux["var"]
        return aux["mean"], var


class Activation(Layer):
    """relu, sign_act and hardtanh; sign_act is trained through its hardtanh STE."""

    OPS = {"relu": "relu", "sign_act": "sign", "hardtanh": "hardtanh"}

    def forward(self, x, mode, surrogate=False):
        op = self.OPS[self.kind]
        if surrogate and op == "sign":
            op = "hardtanh"
        return elementwise(op, x), None

    def backward(self, x, aux, upstream):
        (grad_input,) = elementwise_vjp(self.OPS[self.kind], [x], upstream)
        return grad_input, {}


class SoftmaxXentHead(Layer):
    """Identity on logits; owns the softmax cross-entropy loss."""

    def forward(self, x, mode, surrogate=False):
        return x, None

    def backward(self, x, aux, upstream):
        return upstream, {}


def softmax_xent(logits, labels):
    """Mean cross-entropy of softmax(logits) and its gradient w.r.t. logits."""
    z = logits.data
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (z.shape[0],):
        raise ShapeError(f"{labels.shape[0] if labels.ndim else 0} labels for {z.shape[0]} logit rows")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(z.shape[0])
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1
    grad /= z.shape[0]
    return loss, Tensor.wrap(grad.astype(real_dtype(), copy=False))


def make_layer(spec, width, rng=None):
    if spec.kind in DENSE_KINDS:
        return Dense(spec, rng)
    if spec.kind == "batchnorm":
        return BatchNorm(spec, width)
    if spec.kind == "softmax_xent_head":
        return SoftmaxXentHead(spec)
    return Activation(spec)
