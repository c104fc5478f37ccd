"""
Input-bit discretization and deterministic batching.

Raw intensities I in [0, 255] are mapped to bin centers

    I_d = floor(I / w) * w + w / 2,    w = 256 / 2**input_bits

and scaled by 1/256 into [0, 1]. The same map is applied at train time, at
test time and to adversarial images before they reach the model.
"""
from dataclasses import dataclass

import numpy as np

from quantguard.errors import DomainError, EmptyDatasetError
from quantguard.tensor_core import Rng, Tensor, as_tensor, real_dtype

VALID_INPUT_BITS = (2, 3, 4, 8)
PIXEL_SCALE = 256.0
MAX_INTENSITY = 255.0


@dataclass(frozen=True)
class PipelineConfig:
    input_bits: int = 8
    shuffle_seed: int = 0
    batch_size: int = 100

    def __post_init__(self):
        if self.input_bits not in VALID_INPUT_BITS:
            raise DomainError(f"input_bits must be one of {VALID_INPUT_BITS}, got {self.input_bits}")
        if self.batch_size <= 0:
            raise DomainError(f"batch_size must be positive, got {self.batch_size}")

    def quantize(self, x):
        return quantize_normalized(x, self.input_bits)


def bin_width(input_bits):
    if input_bits not in VALID_INPUT_BITS:
        raise DomainError(f"input_bits must be one of {VALID_INPUT_BITS}, got {input_bits}")
    return PIXEL_SCALE / 2**input_bits


def discretize_pixels(x, input_bits):
    """
    Map intensities to the bin centers of their 2**input_bits bins.

    Intensities lie in [0, 255]. Values in (255, 256) are tolerated only so that
    8-bit bin centers such as 255.5 map to themselves; 256 and above are rejected.
    """
    values = as_tensor(x).data
    inside = (values >= 0) & (values < PIXEL_SCALE)
    if not np.all(inside):
        bad = values[~inside].flat[0]
        raise DomainError(
            f"pixel intensity {float(bad)} outside [0, 255] (only bin centers below 256 are tolerated above 255)"
        )
    width = bin_width(input_bits)
    return Tensor.wrap(np.floor(values / width) * width + width / 2)


def normalize_images(images):
    """uint8 images [N, ...] -> Tensor [N, pixels] of I/256 (pre-discretization)."""
    flat = np.asarray(images).reshape(len(images), -1)
    return Tensor.wrap(flat.astype(real_dtype()) / real_dtype()(PIXEL_SCALE))


def quantize_normalized(x, input_bits):
    """Re-quantize continuous normalized pixels the way the input pipeline does."""
    intensities = np.clip(as_tensor(x).data * real_dtype()(PIXEL_SCALE), 0.0, MAX_INTENSITY)
    binned = discretize_pixels(Tensor.wrap(intensities), input_bits).data
    return Tensor.wrap(binned / real_dtype()(PIXEL_SCALE))


def batch_order(n, cfg, epoch, shuffle=True):
    if not shuffle:
        return np.arange(n)
    return Rng(cfg.shuffle_seed).child(epoch).permutation(n)


def raw_batches(ds, cfg, epoch, shuffle=True):
    """Yield (normalized pre-discretization pixels, labels, dataset indices)."""
    if len(ds) == 0:
        raise EmptyDatasetError(f"{ds.split} dataset is empty")
    order = batch_order(len(ds), cfg, epoch, shuffle)
    for start in range(0, len(order), cfg.batch_size):
        index = order[start:start + cfg.batch_size]
        yield normalize_images(ds.images[index]), ds.labels[index].astype(np.int64), index


def batches(ds, cfg, epoch, shuffle=True):
    """
    Yield (model inputs in [0, 1], labels) batches.

    Order is a pure function of (shuffle_seed, epoch); the final short batch is kept.
    """
    for raw, labels, _ in raw_batches(ds, cfg, epoch, shuffle):
        yield cfg.quantize(raw), labels


def dataset_inputs(ds, cfg):
    """Whole dataset as one (inputs, labels) pair, in dataset order."""
    if len(ds) == 0:
        raise EmptyDatasetError(f"{ds.split} dataset is empty")
    return cfg.quantize(normalize_images(ds.images)), ds.labels.astype(np.int64)
