"""Bipolar integrate-and-fire neurons with a bounded spike tracer.

Each element integrates its input charge, fires at most one spike per step,
and can retract earlier output with a negative spike.  The tracer ``S``
counts net spikes and is held inside ``[s_min, s_max]``, so after the input
stops the accumulated output ``v_thr * S`` settles at

    v_thr * clip(floor((total_input + v0) / v_thr), s_min, s_max)

With ``v0 = v_thr / 2`` that is round-half-up quantization of the total
input on a grid of step ``v_thr``.
"""

from __future__ import annotations

import numpy as np

from .quantization import QuantizerSpec, to_neuron_params
from .tensor import DimensionError


class NonConvergenceError(RuntimeError):
    """Simulation hit ``t_max`` before every neuron became static."""

    def __init__(self, message, state=None, partial=None):
        super().__init__(message)
        self.state = state
        self.partial = partial


class StBifState:
    """Membrane potential and spike tracer of one neuron layer.

    ``v_thr``, ``s_min``, ``s_max`` and ``v0`` are scalars for a converted
    layer, but anything broadcastable to ``shape`` works, which lets a single
    state hold many independent neurons with different parameters.
    """

    def __init__(self, shape, v_thr, s_min, s_max, v0=None):
        self.shape = tuple(shape)
        self.v_thr = np.asarray(v_thr, dtype=np.float64)
        self.s_min = np.asarray(s_min, dtype=np.int64)
        self.s_max = np.asarray(s_max, dtype=np.int64)
        if np.any(self.v_thr <= 0):
            raise ValueError("v_thr must be positive")
        if np.any(self.s_min > 0) or np.any(self.s_max < 0) or np.any(self.s_min >= self.s_max):
            raise ValueError("need s_min <= 0 <= s_max and s_min < s_max")
        self.v0 = self.v_thr / 2 if v0 is None else np.asarray(v0, dtype=np.float64)
        self.reset()

    @classmethod
    def from_quantizer(cls, shape, q: QuantizerSpec, v0=None) -> "StBifState":
        v_thr, s_min, s_max = to_neuron_params(q)
        return cls(shape, v_thr, s_min, s_max, v0)

    def reset(self) -> None:
        self.v = np.broadcast_to(self.v0, self.shape).astype(np.float64)
        self.s_tracer = np.zeros(self.shape, dtype=np.int64)

    def step(self, v_in) -> np.ndarray:
        """Integrate one step of input and return the spikes (-1, 0 or +1)."""
        v_in = np.asarray(v_in, dtype=np.float64)
        if v_in.shape != self.shape:
            raise DimensionError(f"input shape {v_in.shape} != layer shape {self.shape}")
        u = self.v + v_in
        fire_pos = (u >= self.v_thr) & (self.s_tracer < self.s_max)
        fire_neg = (u < 0) & (self.s_tracer > self.s_min)
        theta = fire_pos.astype(np.int8) - fire_neg.astype(np.int8)
        self.v = u - self.v_thr * theta
        self.s_tracer += theta
        return theta

    def can_fire(self) -> np.ndarray:
        """Elements that would still spike if fed zero input."""
        up = (self.v >= self.v_thr) & (self.s_tracer < self.s_max)
        down = (self.v < 0) & (self.s_tracer > self.s_min)
        return up | down

    def is_static(self) -> bool:
        return not bool(np.any(self.can_fire()))

    @property
    def output(self) -> np.ndarray:
        """Accumulated output charge ``v_thr * S``."""
        return self.v_thr * self.s_tracer


def run_to_equilibrium(state: StBifState, v_in_seq, t_max: int):
    """Feed ``v_in_seq`` one entry per step, then zeros, until nothing can fire.

    Returns ``(accumulated_output, t_eq)`` where ``t_eq`` is the later of the
    input duration and the last step that emitted a spike.  The sum of
    ``v_thr * theta`` is formed as ``v_thr`` times the net tracer change, which
    is the same quantity without step-by-step rounding.
    """
    v_in_seq = [np.broadcast_to(np.asarray(v, dtype=np.float64), state.shape) for v in v_in_seq]
    t_off = len(v_in_seq)
    if t_max < t_off:
        raise ValueError(f"t_max={t_max} is shorter than the input ({t_off} steps)")
    zero = np.zeros(state.shape)
    start = state.s_tracer.copy()

    def accumulated():
        return state.v_thr * (state.s_tracer - start).astype(np.float64)

    t_eq = t_off
    for t in range(1, t_max + 1):
        theta = state.step(v_in_seq[t - 1] if t <= t_off else zero)
        if np.any(theta):
            t_eq = t
        if t >= t_off and state.is_static():
            return accumulated(), t_eq
    raise NonConvergenceError(f"no equilibrium within {t_max} steps", state=state, partial=accumulated())


def closed_form(total_input, v_thr, s_min, s_max, v0=None) -> np.ndarray:
    """Equilibrium output of a neuron that received ``total_input`` in total."""
    v_thr = np.asarray(v_thr, dtype=np.float64)
    v0 = v_thr / 2 if v0 is None else np.asarray(v0, dtype=np.float64)
    total_input = np.asarray(total_input, dtype=np.float64)
    return v_thr * np.clip(np.floor((total_input + v0) / v_thr), s_min, s_max)
