"""
Adversarial test sets on disk, with the checkpoint's header discipline.

    4s magic "DQA1", u16 version, 32s config hash, u32 count, u32 pixels,
    f64 epsilon, f64 alpha_fraction, u64 seed, u8 family tag,
    f32[count * pixels] images, u8[count] labels
"""
import logging
import struct
from pathlib import Path

import numpy as np

from quantguard.attacks.fgsm import FAMILIES, AdversarialSet, AttackSpec
from quantguard.errors import CheckpointError
from quantguard.network.checkpoint import FORMAT_VERSION, hash_bytes
from quantguard.tensor_core import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"DQA1"
HEADER = struct.Struct("<4sH32sIIddQB")


def save_adversarial_set(advset, path, config_hash=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spec = advset.spec
    count, pixels = advset.x_adv.shape
    header = HEADER.pack(
        MAGIC, FORMAT_VERSION, hash_bytes(config_hash), count, pixels,
        spec.epsilon, spec.alpha_fraction, spec.seed, FAMILIES.index(spec.family),
    )
    body = np.ascontiguousarray(advset.x_adv.data, dtype="<f4").tobytes()
    path.write_bytes(header + body + advset.labels.astype(np.uint8).tobytes())
    logger.info("Adversarial set (%d items) written to %s", count, path)
    return path


def load_adversarial_set(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise CheckpointError(f"{path}: truncated header, expected {HEADER.size} bytes, got {len(raw)}")
    magic, version, config_hash, count, pixels, epsilon, alpha_fraction, seed, tag = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, this reader handles version {FORMAT_VERSION}")
    expected = HEADER.size + 4 * count * pixels + count
    if len(raw) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, got {len(raw)}")
    offset = HEADER.size
    images = np.frombuffer(raw, dtype="<f4", count=count * pixels, offset=offset).reshape(count, pixels)
    labels = np.frombuffer(raw, dtype=np.uint8, offset=offset + 4 * count * pixels).astype(np.int64)
    spec = AttackSpec(family=FAMILIES[tag], epsilon=epsilon, alpha_fraction=alpha_fraction, seed=seed)
    return AdversarialSet(x_adv=Tensor(images), labels=labels, spec=spec), config_hash
