"""
White-box single-step attacks.

Adversaries are crafted on continuous normalized pixels in [0, 1] and
re-quantized by the victim's own input pipeline before every forward pass.
The pixel quantizer is crossed with an identity (straight-through) gradient.
"""
import logging
from dataclasses import dataclass

import numpy as np

from quantguard.data_pipeline import dataset_inputs, normalize_images
from quantguard.errors import AttackError
from quantguard.network import accuracy, backward, forward
from quantguard.tensor_core import Rng, Tensor, as_tensor, elementwise, gaussian, real_dtype

logger = logging.getLogger(__name__)

FAMILIES = ("none", "fgsm", "rfgsm")
QUANTIZER_GRADIENT = "straight_through"
DEFAULT_ALPHA_FRACTION = 0.5


@dataclass(frozen=True)
class AttackSpec:
    family: str = "none"
    epsilon: float = 0.0
    alpha_fraction: float = DEFAULT_ALPHA_FRACTION
    seed: int = 0
    quantizer_gradient: str = QUANTIZER_GRADIENT

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise AttackError(f"attack family must be one of {FAMILIES}, got '{self.family}'")
        if self.epsilon < 0:
            raise AttackError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.family == "none" and self.epsilon != 0:
            raise AttackError(f"family 'none' needs epsilon 0, got {self.epsilon}")
        if not 0 <= self.alpha_fraction < 1:
            raise AttackError(f"alpha_fraction must lie in [0, 1), got {self.alpha_fraction}")
        if self.quantizer_gradient != QUANTIZER_GRADIENT:
            raise AttackError(f"only the '{QUANTIZER_GRADIENT}' quantizer gradient is supported")

    @property
    def alpha(self):
        return self.alpha_fraction * self.epsilon

    @property
    def effective_family(self):
        return "none" if self.epsilon == 0 else self.family


def input_gradient(m, pipeline, x_raw, y_true):
    """dL/dx at the quantized input, passed straight through the quantizer."""
    logits, cache = forward(m, pipeline.quantize(x_raw), "eval")
    return backward(m, cache, y_true).grad_input


def _step(x, magnitude, direction):
    return np.clip(x + real_dtype()(magnitude) * elementwise("sign", direction).data, 0.0, 1.0)


def _project(x_adv, x_raw, epsilon):
    # guards the L-inf budget against float rounding of the two-step path
    eps = real_dtype()(epsilon)
    return Tensor.wrap(np.clip(np.clip(x_adv, x_raw - eps, x_raw + eps), 0.0, 1.0))


def fgsm(m, pipeline, x_raw, y_true, epsilon):
    """x_adv = clip(x + eps * sign(grad_x L(theta, x, y)), 0, 1)."""
    if epsilon < 0:
        raise AttackError(f"epsilon must be >= 0, got {epsilon}")
    x_raw = as_tensor(x_raw)
    if epsilon == 0:
        return x_raw
    g = input_gradient(m, pipeline, x_raw, y_true)
    return _project(_step(x_raw.data, epsilon, g), x_raw.data, epsilon)


def rfgsm(m, pipeline, x_raw, y_true, epsilon, alpha, rng=None, noise=None):
    """
    Random step of size alpha along sign(N(0, I)), then a gradient-sign step of
    size (epsilon - alpha) taken at the randomized point.
    """
    if not 0 <= alpha < epsilon:
        raise AttackError(f"rfgsm needs 0 <= alpha < epsilon, got alpha={alpha}, epsilon={epsilon}")
    x_raw = as_tensor(x_raw)
    if noise is None:
        if rng is None:
            raise AttackError("rfgsm needs an rng or explicit noise")
        noise = gaussian(rng, x_raw.shape)
    x_prime = Tensor.wrap(_step(x_raw.data, alpha, as_tensor(noise)))
    g = input_gradient(m, pipeline, x_prime, y_true)
    return _project(_step(x_prime.data, epsilon - alpha, g), x_raw.data, epsilon)


def sample_noise(seed, indices, dim, *key):
    """Gaussian rows drawn from per-sample streams keyed by (seed, *key, index)."""
    base = Rng(seed).child(*key) if key else Rng(seed)
    return Tensor.wrap(np.stack([base.child(int(i)).normal_array((dim,)) for i in indices]))


def perturb(m, pipeline, x_raw, y_true, spec, indices, *key):
    """Apply `spec` to one batch; rfgsm noise comes from per-sample streams."""
    family = spec.effective_family
    if family == "none":
        return as_tensor(x_raw)
    if family == "fgsm":
        return fgsm(m, pipeline, x_raw, y_true, spec.epsilon)
    noise = sample_noise(spec.seed, indices, as_tensor(x_raw).shape[1], *key)
    return rfgsm(m, pipeline, x_raw, y_true, spec.epsilon, spec.alpha, noise=noise)


@dataclass(frozen=True)
class AdversarialSet:
    x_adv: Tensor  # continuous, pre-discretization, [N x pixels]
    labels: np.ndarray
    spec: AttackSpec

    def __len__(self):
        return self.labels.shape[0]

    def model_inputs(self, pipeline):
        return pipeline.quantize(self.x_adv)

    def accuracy(self, m, pipeline):
        return accuracy(m, self.model_inputs(pipeline), self.labels)


def adversarial_testset(m, pipeline, ds, spec, batch_size=500):
    """One white-box adversary per test item, crafted against `m` itself."""
    labels = ds.labels.astype(np.int64)
    parts = []
    for start in range(0, len(ds), batch_size):
        index = np.arange(start, min(start + batch_size, len(ds)))
        x_raw = normalize_images(ds.images[index])
        parts.append(perturb(m, pipeline, x_raw, labels[index], spec, index).data)
    x_adv = Tensor.wrap(np.concatenate(parts, axis=0))
    logger.debug("Crafted %d %s adversaries at eps=%g", len(labels), spec.effective_family, spec.epsilon)
    return AdversarialSet(x_adv=x_adv, labels=labels, spec=spec)


def clean_accuracy(m, pipeline, ds):
    inputs, labels = dataset_inputs(ds, pipeline)
    return accuracy(m, inputs, labels)
