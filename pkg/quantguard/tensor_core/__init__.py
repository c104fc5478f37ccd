from .tensor import (
    REAL,
    Tensor,
    as_tensor,
    clip,
    concat_rows,
    double_precision,
    elementwise,
    matmul,
    real_dtype,
    transpose,
)
from .rng import ALGORITHM, Rng, gaussian, uniform
from .grad import elementwise_vjp, matmul_vjp, ste_mask

__all__ = [
    "ALGORITHM",
    "REAL",
    "Rng",
    "Tensor",
    "as_tensor",
    "clip",
    "concat_rows",
    "double_precision",
    "elementwise",
    "elementwise_vjp",
    "gaussian",
    "matmul",
    "matmul_vjp",
    "real_dtype",
    "ste_mask",
    "transpose",
    "uniform",
]
