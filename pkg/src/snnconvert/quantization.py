"""Uniform activation quantizer and max-abs post-hoc calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCALE_FLOOR = 1e-12


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizerSpec:
    """``x -> s * clamp(round(x / s), alpha, beta)`` with integer bounds."""

    s: float
    alpha: int
    beta: int
    signed: bool = False

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"scale must be positive, got {self.s}")
        if not self.alpha < self.beta:
            raise ValueError(f"need alpha < beta, got {self.alpha}, {self.beta}")
        if not self.alpha <= 0 <= self.beta:
            raise ValueError("clamp range must contain zero")
        if not self.signed and self.alpha != 0:
            raise ValueError("unsigned quantizers have alpha == 0")

    @property
    def levels(self) -> int:
        return self.beta - self.alpha + 1

    def to_dict(self) -> dict:
        return {"s": self.s, "alpha": self.alpha, "beta": self.beta, "signed": self.signed}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizerSpec":
        return cls(float(d["s"]), int(d["alpha"]), int(d["beta"]), bool(d["signed"]))


def round_half_away(x):
    """Round to nearest integer, ties away from zero (``np.round`` ties to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(x, q: QuantizerSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return q.s * np.clip(round_half_away(x / q.s), q.alpha, q.beta)


def calibrate(samples, levels: int, signed: bool) -> QuantizerSpec:
    """Pick the scale so that the largest observed magnitude maps to ``beta``.

    Unsigned quantizers use the full ``[0, levels - 1]`` range; signed ones use
    the symmetric range ``[-b, b]`` with ``b = (levels - 1) // 2``.
    """
    if levels < 2:
        raise CalibrationError(f"levels must be >= 2, got {levels}")
    samples = list(samples)
    if not samples:
        raise CalibrationError("no calibration samples")
    peak = max(float(np.max(np.abs(np.asarray(x, dtype=np.float64)))) for x in samples)
    if signed:
        beta = (levels - 1) // 2
        alpha = -beta
    else:
        alpha, beta = 0, levels - 1
    if beta < 1:
        raise CalibrationError(f"levels={levels} leaves no positive level for a signed quantizer")
    s = max(peak / beta, SCALE_FLOOR)
    return QuantizerSpec(s, alpha, beta, signed)


def to_neuron_params(q: QuantizerSpec) -> tuple[float, int, int]:
    """Map a quantizer onto neuron ``(v_thr, s_min, s_max)``."""
    return q.s, q.alpha, q.beta


def from_neuron_params(v_thr: float, s_min: int, s_max: int, signed: bool | None = None) -> QuantizerSpec:
    if signed is None:
        signed = s_min < 0
    return QuantizerSpec(v_thr, s_min, s_max, signed)
