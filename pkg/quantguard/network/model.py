import logging
from dataclasses import dataclass, field

import numpy as np

from quantguard.errors import ShapeError, StaleCacheError
from quantguard.network.layers import (
    DENSE_KINDS,
    BatchNorm,
    Dense,
    LayerSpec,
    make_layer,
    softmax_xent,
)
from quantguard.tensor_core import Rng, Tensor, as_tensor

logger = logging.getLogger(__name__)

ARCHITECTURES = {
    "FCN1": (6144, 6144, 6144, 6144),
    "FCN2": (600, 600, 600, 600),
}
INPUT_DIM = 784
NUM_CLASSES = 10
MODES = ("train", "eval")


@dataclass
class ModelGraph:
    arch: str
    layers: list
    binarized: bool
    version: int = 0

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self):
        return self.layers[0].spec.fan_in

    @property
    def hidden_widths(self):
        dense = [layer.spec.fan_out for layer in self.layers if layer.kind in DENSE_KINDS]
        return tuple(dense[:-1])

    def named_params(self):
        for index, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield index, name, value

    def parameter_count(self):
        return sum(value.size for _, _, value in self.named_params())

    def set_param(self, index, name, value):
        layer = self.layers[index]
        if name not in layer.params:
            raise KeyError(f"layer {index} ({layer.kind}) has no parameter '{name}'")
        value = as_tensor(value)
        if value.shape != layer.params[name].shape:
            raise ShapeError(f"{name} of layer {index} is {list(layer.params[name].shape)}, got {list(value.shape)}")
        layer.params[name] = value
        self.version += 1

    def first_dense_index(self):
        return next(i for i, layer in enumerate(self.layers) if layer.kind in DENSE_KINDS)


@dataclass
class ForwardCache:
    """Per-layer inputs and auxiliaries of one forward pass."""

    model_ref: int
    version: int
    mode: str
    surrogate: bool
    inputs: list = field(default_factory=list)
    aux: list = field(default_factory=list)
    logits: Tensor = None

    def layer_output(self, index):
        """Output of layer `index` (the input of the next one)."""
        if index + 1 < len(self.inputs):
            return self.inputs[index + 1]
        return self.logits


@dataclass
class Gradients:
    params: dict
    grad_input: Tensor
    loss: float
    moments: dict = field(default_factory=dict)


def hidden_block(width_in, width_out, binarized):
    dense_kind = "binary_dense" if binarized else "dense"
    activation = "sign_act" if binarized else "relu"
    return [
        LayerSpec(dense_kind, width_in, width_out),
        LayerSpec("batchnorm", width_out, width_out),
        LayerSpec(activation),
    ]


def architecture_specs(widths, binarized, input_dim=INPUT_DIM, num_classes=NUM_CLASSES):
    if not widths or any(w <= 0 for w in widths):
        raise ShapeError(f"hidden widths must be positive, got {list(widths)}")
    specs = []
    fan_in = input_dim
    for width in widths:
        specs.extend(hidden_block(fan_in, width, binarized))
        fan_in = width
    specs.append(LayerSpec("binary_dense" if binarized else "dense", fan_in, num_classes))
    if binarized:
        specs.append(LayerSpec("batchnorm", num_classes, num_classes))
    specs.append(LayerSpec("softmax_xent_head"))
    return specs


def infer_arch(widths):
    for name, arch_widths in ARCHITECTURES.items():
        if tuple(widths) == arch_widths:
            return name
    return "custom"


def build_from_specs(specs, init_seed=None, arch="custom"):
    """Instantiate layers; init_seed=None leaves dense weights at zero."""
    if not specs or specs[0].kind not in DENSE_KINDS:
        raise ShapeError("a model must start with a dense layer")
    rng = Rng(init_seed) if init_seed is not None else None
    layers = []
    width = specs[0].fan_in
    for index, spec in enumerate(specs):
        layer_rng = rng.child(index) if rng is not None else None
        width = spec.output_dim(width)
        layers.append(make_layer(spec, width, layer_rng))
    binarized = any(spec.kind == "binary_dense" for spec in specs)
    return ModelGraph(arch=arch, layers=layers, binarized=binarized)


def build(arch, binarized, init_seed, widths=None, input_dim=INPUT_DIM):
    """
    FCN1 = 784-6144(x4)-10, FCN2 = 784-600(x4)-10, or `custom` with explicit widths.
    Hidden blocks are dense -> batchnorm -> relu (or sign with hardtanh STE).
    """
    if arch == "custom":
        if widths is None:
            raise ShapeError("custom architecture needs explicit widths")
        widths = tuple(int(w) for w in widths)
    elif arch in ARCHITECTURES:
        widths = ARCHITECTURES[arch]
    else:
        raise ShapeError(f"unknown architecture '{arch}', expected FCN1, FCN2 or custom")
    model = build_from_specs(architecture_specs(widths, binarized, input_dim), init_seed, arch)
    logger.debug("Built %s (%s) with %d parameters", arch, "binarized" if binarized else "full", model.parameter_count())
    return model


def forward(m, x, mode="eval", surrogate=False):
    """Run the layer sequence; returns (logits, cache)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
    x = as_tensor(x)
    if x.data.ndim != 2 or x.shape[1] != m.input_dim:
        raise ShapeError(f"input must be [batch x {m.input_dim}], got {list(x.shape)}")
    cache = ForwardCache(model_ref=id(m), version=m.version, mode=mode, surrogate=surrogate)
    current = x
    for layer in m.layers:
        cache.inputs.append(current)
        current, aux = layer.forward(current, mode, surrogate)
        cache.aux.append(aux)
    cache.logits = current
    return current, cache


def backward(m, cache, labels):
    """Cross-entropy gradients for every parameter, plus the input gradient."""
    if cache.model_ref != id(m) or cache.version != m.version:
        raise StaleCacheError(
            f"cache from model version {cache.version}, model is at version {m.version}"
        )
    loss, upstream = softmax_xent(cache.logits, labels)
    params = {}
    moments = {}
    for index in reversed(range(len(m.layers))):
        layer = m.layers[index]
        upstream, grads = layer.backward(cache.inputs[index], cache.aux[index], upstream)
        for name, grad in grads.items():
            params[(index, name)] = grad
        if isinstance(layer, BatchNorm) and cache.mode == "train":
            moments[index] = layer.batch_moments(cache.aux[index])
    return Gradients(params=params, grad_input=upstream, loss=loss, moments=moments)


def loss(m, x, labels, mode="eval", surrogate=False):
    logits, _ = forward(m, x, mode, surrogate)
    value, _ = softmax_xent(logits, labels)
    return value


def predict(m, x, batch_size=1000):
    """Eval-mode class predictions, computed in fixed-size chunks."""
    x = as_tensor(x)
    out = []
    for start in range(0, len(x), batch_size):
        logits, _ = forward(m, x.rows(slice(start, start + batch_size)), "eval")
        out.append(np.argmax(logits.data, axis=1))
    return np.concatenate(out)


def accuracy(m, x, labels, batch_size=1000):
    """Percentage of correctly classified rows."""
    labels = np.asarray(labels)
    return float(100.0 * np.mean(predict(m, x, batch_size) == labels))


def binary_weights_in_range(m):
    return all(
        float(np.max(np.abs(layer.params["W"].data))) <= 1.0
        for layer in m.layers
        if isinstance(layer, Dense) and layer.binarized
    )
