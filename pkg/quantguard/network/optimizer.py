import logging
from dataclasses import dataclass, field

import numpy as np

from quantguard.errors import DivergenceError
from quantguard.network.layers import BN_MOMENTUM, Dense
from quantguard.tensor_core import Tensor

logger = logging.getLogger(__name__)


@dataclass
class SGDState:
    """Momentum buffers keyed by (layer index, parameter name)."""

    velocity: dict = field(default_factory=dict)


def _check_finite(grads):
    for (index, name), grad in grads.params.items():
        if not np.all(np.isfinite(grad.data)):
            bad = int(np.size(grad.data) - np.count_nonzero(np.isfinite(grad.data)))
            raise DivergenceError(f"non-finite gradient in layer {index} '{name}' ({bad} entries)")


def sgd_step(m, grads, lr, weight_decay=0.0, momentum=0.0, state=None):
    """
    W <- W - lr * (grad + weight_decay * W), optionally with momentum; then latent
    binary weights are clamped to [-1, +1] and batchnorm running moments absorb the
    batch moments of a train-mode pass.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    _check_finite(grads)
    if momentum and state is None:
        raise ValueError("momentum needs an SGDState to hold velocity")

    for (index, name), grad in grads.params.items():
        layer = m.layers[index]
        weight = layer.params[name].data
        direction = grad.data + weight_decay * weight if weight_decay else grad.data
        if momentum:
            previous = state.velocity.get((index, name))
            direction = direction if previous is None else momentum * previous + direction
            state.velocity[(index, name)] = direction
        updated = weight - lr * direction
        if name == "W" and isinstance(layer, Dense) and layer.binarized:
            updated = np.clip(updated, -1.0, 1.0)
        layer.params[name] = Tensor.wrap(updated)

    for index, (mean, var) in grads.moments.items():
        buffers = m.layers[index].buffers
        buffers["running_mean"] = Tensor.wrap((1 - BN_MOMENTUM) * buffers["running_mean"].data + BN_MOMENTUM * mean)
        buffers["running_var"] = Tensor.wrap((1 - BN_MOMENTUM) * buffers["running_var"].data + BN_MOMENTUM * var)

    m.version += 1
    return m


def step_decay_lr(base_lr, epoch, epochs, milestones=(0.5, 0.75), gamma=0.1):
    """Learning rate for a 0-based epoch: x gamma at each milestone fraction of the run."""
    passed = sum(1 for fraction in milestones if epoch >= max(1, int(fraction * epochs)))
    return base_lr * gamma**passed
