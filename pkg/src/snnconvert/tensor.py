"""Small deterministic dense-tensor kernels.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 and rank 1 to 3.
Every kernel here validates finiteness of its result, and ``matmul`` reduces
over the inner dimension strictly in ascending index order so that results do
not depend on BLAS blocking or threading.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(ArithmeticError):
    """A tensor contains NaN or Inf."""


def as_tensor(x) -> np.ndarray:
    """Convert ``x`` to a float64 array of rank 1-3 and check it is finite."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 3:
        raise DimensionError(f"rank {arr.ndim} tensors are not supported")
    return _finite(arr)


def _finite(arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("tensor contains non-finite values")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with a fixed ascending reduction order.

    ``a`` is ``(..., m, k)`` and ``b`` is ``(..., k, p)``; a leading batch
    dimension (rank 3) is allowed on either side and broadcasts.  Each output
    element is accumulated as ``((0 + a0*b0) + a1*b1) + ...``, which is what a
    naive triple loop computes.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim < 2 or b.ndim < 2 or a.ndim > 3 or b.ndim > 3:
        raise DimensionError(f"matmul needs rank 2 or 3 operands, got {a.shape} and {b.shape}")
    k = a.shape[-1]
    if b.shape[-2] != k:
        raise DimensionError(f"inner dimensions differ: {a.shape} x {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise DimensionError(f"batch dimensions differ: {a.shape} x {b.shape}")
    batch = a.shape[:-2] if a.ndim == 3 else b.shape[:-2]
    out = np.zeros(batch + (a.shape[-2], b.shape[-1]))
    for r in range(k):
        out += a[..., :, r, None] * b[..., None, r, :]
    return _finite(out)


def softmax(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return _finite(z / np.sum(z, axis=axis, keepdims=True))


def layernorm(x, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Normalise over the last axis, then apply ``gamma * x_hat + beta``."""
    x = np.asarray(x, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise DimensionError(
            f"gamma/beta must have shape ({x.shape[-1]},), got {gamma.shape} and {beta.shape}"
        )
    mean = np.mean(x, axis=-1, keepdims=True)
    centered = x - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    if eps == 0:
        # constant slices normalise to zero rather than 0/0
        var = np.where(var == 0, 1.0, var)
    return _finite(centered / np.sqrt(var + eps) * gamma + beta)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def add(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(a + b)


def sub(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(a - b)


def scale(a, factor: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(np.asarray(a, dtype=np.float64) * float(factor))
