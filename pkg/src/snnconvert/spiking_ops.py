"""Per-time-step operators whose outputs sum to the dense quantized result.

* ``aw_step``: stationary weight times the current spike charge.
* ``aa_step``: product of two spike-driven operands using the running sums
  ``S_a, S_b`` kept in the operator:  ``S_a b_t + a_t S_b - a_t b_t``.
* ``diff_step``: ``sigma(X_t) - sigma(X_{t-1})`` on the accumulated input,
  for softmax and layernorm.

All operands are threshold-scaled spike tensors (real multiples of each
layer's ``v_thr``), not raw +-1 values.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import DimensionError, layernorm, matmul, softmax


def aw_step(w, x_t, bias=None) -> np.ndarray:
    """``x_t @ w`` (tokens as rows), plus ``bias`` when it is being injected."""
    out = matmul(x_t, w)
    if bias is not None:
        out = out + bias
    return out


class AaState:
    """Running spike sums for one activation-activation product site.

    With ``transpose_b`` the product is ``a b^T`` (query-key); otherwise it is
    ``a b`` (attention-value).  A leading head axis is allowed.
    """

    def __init__(self, a_shape, b_shape, transpose_b: bool = True):
        self.transpose_b = transpose_b
        self.s_a = np.zeros(a_shape)
        self.s_b = np.zeros(b_shape)

    def _prod(self, a, b):
        return matmul(a, np.swapaxes(b, -1, -2) if self.transpose_b else b)


def aa_step(state: AaState, a_t, b_t) -> np.ndarray:
    a_t = np.asarray(a_t, dtype=np.float64)
    b_t = np.asarray(b_t, dtype=np.float64)
    if a_t.shape != state.s_a.shape or b_t.shape != state.s_b.shape:
        raise DimensionError(
            f"expected {state.s_a.shape} and {state.s_b.shape}, got {a_t.shape} and {b_t.shape}"
        )
    state.s_a = state.s_a + a_t
    state.s_b = state.s_b + b_t
    return state._prod(state.s_a, b_t) + state._prod(a_t, state.s_b) - state._prod(a_t, b_t)


def layernorm_fn(gamma, beta, eps: float = 1e-5) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: layernorm(x, gamma, beta, eps)


class DiffOpState:
    """Accumulated input and last output of one differential operator.

    ``o_prev`` starts at zero, so the first step emits ``sigma(x_1)`` in full.
    """

    def __init__(self, shape, sigma: Callable[[np.ndarray], np.ndarray]):
        self.sigma = sigma
        self.x_acc = np.zeros(shape)
        self.o_prev = np.zeros(shape)


def diff_step(state: DiffOpState, x_t) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != state.x_acc.shape:
        raise DimensionError(f"input shape {x_t.shape} != operator shape {state.x_acc.shape}")
    state.x_acc = state.x_acc + x_t
    o_new = state.sigma(state.x_acc)
    out = o_new - state.o_prev
    state.o_prev = o_new
    return out


def spike_softmax(shape) -> DiffOpState:
    return DiffOpState(shape, softmax)


def spike_layernorm(shape, gamma, beta, eps: float = 1e-5) -> DiffOpState:
    return DiffOpState(shape, layernorm_fn(gamma, beta, eps))
