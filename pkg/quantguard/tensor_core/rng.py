import numpy as np

from quantguard.tensor_core.tensor import Tensor, real_dtype

ALGORITHM = "PCG64"


class Rng:
    """
    Seeded random stream backed by numpy's PCG64 bit generator.

    Child streams are derived from (seed, *key) through SeedSequence spawn keys,
    so a per-sample stream depends only on the seed and the sample index.
    """

    algorithm = ALGORITHM

    def __init__(self, seed, key=()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, *key):
        return Rng(self.seed, self.key + tuple(key))

    def permutation(self, n):
        return self._generator.permutation(n)

    def normal_array(self, shape):
        return self._generator.standard_normal(shape, dtype=np.float64).astype(real_dtype())

    def uniform_array(self, low, high, shape):
        return self._generator.uniform(low, high, size=shape).astype(real_dtype())

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key}, algorithm={self.algorithm})"


def gaussian(rng, shape):
    """I.i.d. standard normal draws as a Tensor."""
    return Tensor.wrap(rng.normal_array(tuple(shape)))


def uniform(rng, low, high, shape):
    return Tensor.wrap(rng.uniform_array(low, high, tuple(shape)))
