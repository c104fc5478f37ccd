"""
Dense immutable tensors and the pointwise / matrix operations built on them.

All values are 32-bit reals. `double_precision()` temporarily switches the
element type to float64 for gradient checking only.
"""
import contextlib
import threading

import numpy as np

from quantguard.errors import DomainError, ShapeError

REAL = np.float32

_precision = threading.local()


def real_dtype():
    return getattr(_precision, "dtype", REAL)


@contextlib.contextmanager
def double_precision():
    """Build and run tensors in float64 inside the block (gradient checks)."""
    previous = real_dtype()
    _precision.dtype = np.float64
    try:
        yield
    finally:
        _precision.dtype = previous


class Tensor:
    """
    Row-major n-dimensional array of reals with shape metadata.

    Instances never change after construction; the backing array is marked
    read-only and every operation returns a new Tensor.
    """

    __slots__ = ("_data",)

    def __init__(self, data, copy=True):
        arr = np.array(data, dtype=real_dtype()) if copy else np.asarray(data, dtype=real_dtype())
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(extent <= 0 for extent in arr.shape):
            raise ShapeError(f"Tensor extents must be positive, got {arr.shape}")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def wrap(cls, arr):
        """Adopt a freshly computed array without copying it."""
        return cls(np.asarray(arr, dtype=real_dtype()), copy=False)

    @classmethod
    def zeros(cls, shape):
        return cls.wrap(np.zeros(shape, dtype=real_dtype()))

    @property
    def data(self):
        return self._data

    @property
    def shape(self):
        return self._data.shape

    @property
    def size(self):
        return self._data.size

    def numpy(self):
        """Writable copy of the values."""
        return np.array(self._data)

    def reshape(self, *shape):
        return Tensor.wrap(self._data.reshape(*shape))

    def rows(self, index):
        """Select rows (first axis) by index array or slice."""
        return Tensor.wrap(np.ascontiguousarray(self._data[index]))

    def __len__(self):
        return self._data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={list(self.shape)}, dtype={self._data.dtype.name})"

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def matmul(a, b):
    """Standard matrix product of a[m×k] and b[k×n]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {list(a.shape)} and {list(b.shape)}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner extents differ: [{a.shape[0]}x{a.shape[1]}] x [{b.shape[0]}x{b.shape[1]}]"
        )
    return Tensor.wrap(np.matmul(a.data, b.data))


def transpose(a):
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got {list(a.shape)}")
    return Tensor.wrap(np.ascontiguousarray(a.data.T))


def _sign(x):
    # sign(0) = +1 so the codomain is exactly {+1, -1}
    return np.where(x >= 0, 1.0, -1.0).astype(x.dtype, copy=False)


def _log(x):
    if np.any(x <= 0):
        bad = float(x[x <= 0].flat[0])
        raise DomainError(f"log of non-positive value {bad}")
    return np.log(x)


def _exp(x):
    with np.errstate(over="ignore"):
        out = np.exp(x)
    overflow = ~np.isfinite(out)
    if np.any(overflow):
        bad = float(np.asarray(x)[overflow].flat[0])
        raise DomainError(f"exp({bad}) overflows {np.dtype(real_dtype()).name}")
    return out


UNARY_OPS = {
    "relu": lambda x: np.maximum(x, 0),
    "sign": _sign,
    "hardtanh": lambda x: np.clip(x, -1, 1),
    "exp": _exp,
    "log": _log,
}

BINARY_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def _operand(value):
    if isinstance(value, Tensor):
        return value.data
    if np.isscalar(value):
        return np.asarray(value, dtype=real_dtype())
    return as_tensor(value).data


def _is_scalar(arr):
    return arr.ndim == 0 or arr.size == 1


def elementwise(op, *inputs):
    """
    Apply a pointwise operation.

    Binary ops accept two operands of identical shape, or one scalar operand.
    No other broadcasting is performed.
    """
    if op in UNARY_OPS:
        if len(inputs) != 1:
            raise ShapeError(f"{op} takes one operand, got {len(inputs)}")
        return Tensor.wrap(UNARY_OPS[op](_operand(inputs[0])))
    if op in BINARY_OPS:
        if len(inputs) != 2:
            raise ShapeError(f"{op} takes two operands, got {len(inputs)}")
        left, right = _operand(inputs[0]), _operand(inputs[1])
        if left.shape != right.shape and not (_is_scalar(left) or _is_scalar(right)):
            raise ShapeError(f"{op} operand shapes differ: {list(left.shape)} vs {list(right.shape)}")
        if _is_scalar(left) and not _is_scalar(right):
            left = left.reshape(())
        if _is_scalar(right) and not _is_scalar(left):
            right = right.reshape(())
        return Tensor.wrap(BINARY_OPS[op](left, right))
    raise ValueError(f"Unknown elementwise op '{op}'")


def clip(a, low, high):
    return Tensor.wrap(np.clip(as_tensor(a).data, low, high))


def concat_rows(parts):
    return Tensor.wrap(np.concatenate([as_tensor(p).data for p in parts], axis=0))
