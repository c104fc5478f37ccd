"""
Binary checkpoint container.

Layout (little endian):
    4s   magic "DQN1"
    u16  format version
    32s  config hash (SHA-256, zeros when unknown)
    u32  layer count
    per layer:
        u8 kind tag, u32 fan_in, u32 fan_out, u8 tensor count
        per tensor: u8 name length, name, u8 ndim, u32[ndim] extents, f32[] payload
"""
import logging
import struct
from pathlib import Path

import numpy as np

from quantguard.errors import CheckpointError
from quantguard.network.layers import LayerSpec
from quantguard.network.model import build_from_specs, infer_arch
from quantguard.tensor_core import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"DQN1"
FORMAT_VERSION = 1
HASH_BYTES = 32
HEADER = struct.Struct("<4sH32sI")
LAYER_HEADER = struct.Struct("<BIIB")

KIND_TAGS = {
    "dense": 1,
    "binary_dense": 2,
    "relu": 3,
    "sign_act": 4,
    "hardtanh": 5,
    "batchnorm": 6,
    "softmax_xent_head": 7,
}
TAG_KINDS = {tag: kind for kind, tag in KIND_TAGS.items()}


def hash_bytes(config_hash):
    if config_hash is None:
        return bytes(HASH_BYTES)
    if isinstance(config_hash, str):
        config_hash = bytes.fromhex(config_hash)
    if len(config_hash) != HASH_BYTES:
        raise CheckpointError(f"config hash must be {HASH_BYTES} bytes, got {len(config_hash)}")
    return config_hash


def encode_checkpoint(m, config_hash=None):
    chunks = [HEADER.pack(MAGIC, FORMAT_VERSION, hash_bytes(config_hash), len(m.layers))]
    for layer in m.layers:
        tensors = {**layer.params, **layer.buffers}
        spec = layer.spec
        chunks.append(LAYER_HEADER.pack(KIND_TAGS[spec.kind], spec.fan_in, spec.fan_out, len(tensors)))
        for name, value in tensors.items():
            encoded = name.encode("ascii")
            chunks.append(struct.pack("<B", len(encoded)) + encoded)
            chunks.append(struct.pack(f"<B{value.data.ndim}I", value.data.ndim, *value.shape))
            chunks.append(np.ascontiguousarray(value.data, dtype="<f4").tobytes())
    return b"".join(chunks)


def save_checkpoint(m, path, config_hash=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(m, config_hash))
    logger.info("Checkpoint written to %s", path)
    return path


class _Reader:
    def __init__(self, raw, path):
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.raw):
            raise CheckpointError(
                f"{self.path}: truncated at byte {self.offset}, need {size} more, {len(self.raw) - self.offset} left"
            )
        values = struct.unpack_from(fmt, self.raw, self.offset)
        self.offset += size
        return values

    def take_bytes(self, size):
        if self.offset + size > len(self.raw):
            raise CheckpointError(
                f"{self.path}: truncated at byte {self.offset}, need {size} more, {len(self.raw) - self.offset} left"
            )
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk


def read_header(raw, path="<memory>"):
    reader = _Reader(raw, path)
    magic, version, config_hash, layer_count = reader.take(HEADER.format)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, this reader handles version {FORMAT_VERSION}")
    return reader, config_hash, layer_count


def decode_checkpoint(raw, path="<memory>", expected_hash=None):
    reader, config_hash, layer_count = read_header(raw, path)
    if expected_hash is not None and config_hash != hash_bytes(expected_hash):
        raise CheckpointError(
            f"{path}: config hash {config_hash.hex()} does not match expected {hash_bytes(expected_hash).hex()}"
        )

    specs, stored = [], []
    for _ in range(layer_count):
        tag, fan_in, fan_out, tensor_count = reader.take(LAYER_HEADER.format)
        if tag not in TAG_KINDS:
            raise CheckpointError(f"{path}: unknown layer kind tag {tag}")
        specs.append(LayerSpec(TAG_KINDS[tag], fan_in, fan_out))
        tensors = {}
        for _ in range(tensor_count):
            (name_len,) = reader.take("<B")
            name = reader.take_bytes(name_len).decode("ascii")
            (ndim,) = reader.take("<B")
            shape = reader.take(f"<{ndim}I")
            payload = reader.take_bytes(4 * int(np.prod(shape)))
            tensors[name] = Tensor(np.frombuffer(payload, dtype="<f4").reshape(shape))
        stored.append(tensors)
    if reader.offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - reader.offset} trailing bytes after last layer")

    dense_widths = [s.fan_out for s in specs if s.kind in ("dense", "binary_dense")][:-1]
    m = build_from_specs(specs, init_seed=None, arch=infer_arch(dense_widths))
    for layer, tensors in zip(m.layers, stored):
        for name, value in tensors.items():
            target = layer.params if name in layer.params else layer.buffers
            if name not in target:
                raise CheckpointError(f"{path}: {layer.kind} layer has no tensor '{name}'")
            if target[name].shape != value.shape:
                raise CheckpointError(
                    f"{path}: {layer.kind} '{name}' stored as {list(value.shape)}, expected {list(target[name].shape)}"
                )
            target[name] = value
    return m, config_hash


def load_checkpoint(path, expected_hash=None):
    """Read a checkpoint; returns (ModelGraph, config hash bytes)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found at: {path}")
    m, config_hash = decode_checkpoint(path.read_bytes(), path, expected_hash)
    logger.info("Loaded %s checkpoint from %s", m.arch, path)
    return m, config_hash
