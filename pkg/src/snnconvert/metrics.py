"""Spike accounting, power estimate and operator complexity table.

Post-synaptic spikes are the events neurons emit.  Pre-synaptic spikes are
the deliveries those events make through matrix-product synapses:

* linear layer: ``R_src * f_in * N_neu`` with ``f_in = n_in`` and
  ``N_neu = tokens * n_out``, i.e. every input spike reaches ``n_out`` outputs;
* convolution: ``R_src * (C_in K_H K_W) * (C_out O_H O_W)``;
* activation-activation product ``O = a @ b`` (``m x p`` per head), computed
  as ``S_a b_t + a_t S_b - a_t b_t``: a spike of the left operand enters two
  of the three products and touches one output row of length ``p`` in each,
  so it delivers ``2 p`` events; a right-operand spike delivers ``2 m``.

Firing rates are always taken from the recorded log, so the formulas are
evaluated exactly with rationals.  Spikes into softmax/layernorm operators
and residual additions are not counted as synaptic events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_ALPHA = 0.9e-12  # joules per spike event
STEP_SECONDS = 1e-3


class AccountingError(ValueError):
    pass


@dataclass(frozen=True)
class Synapse:
    """A spike-carrying connection from neuron layer ``source``."""

    source: str
    target: str
    kind: str  # "linear" | "conv" | "aa"
    params: tuple = ()

    @classmethod
    def linear(cls, source, target, tokens, n_in, n_out):
        return cls(source, target, "linear", (("tokens", tokens), ("n_in", n_in), ("n_out", n_out)))

    @classmethod
    def conv(cls, source, target, c_in, kh, kw, c_out, oh, ow):
        return cls(source, target, "conv",
                   (("c_in", c_in), ("kh", kh), ("kw", kw), ("c_out", c_out), ("oh", oh), ("ow", ow)))

    @classmethod
    def aa(cls, source, target, side, heads, rows, inner, cols):
        return cls(source, target, "aa",
                   (("side", side), ("heads", heads), ("rows", rows), ("inner", inner), ("cols", cols)))

    @property
    def p(self) -> dict:
        return dict(self.params)

    def fan_in(self) -> int:
        p = self.p
        if self.kind == "linear":
            return p["n_in"]
        if self.kind == "conv":
            return p["c_in"] * p["kh"] * p["kw"]
        raise AccountingError(f"fan-in is not defined for {self.kind} synapses")

    def target_neurons(self) -> int:
        p = self.p
        if self.kind == "linear":
            return p["tokens"] * p["n_out"]
        if self.kind == "conv":
            return p["c_out"] * p["oh"] * p["ow"]
        return p["heads"] * p["rows"] * p["cols"]

    def source_neurons(self) -> int:
        p = self.p
        if self.kind == "linear":
            return p["tokens"] * p["n_in"]
        if self.kind == "aa":
            if p["side"] == "left":
                return p["heads"] * p["rows"] * p["inner"]
            return p["heads"] * p["inner"] * p["cols"]
        raise AccountingError("conv source size is carried by the rate, not the descriptor")

    def pre_events(self, rate: Fraction, n_src: int | None = None) -> Fraction:
        """Pre-synaptic events delivered when the source fires at ``rate``."""
        p = self.p
        if self.kind in ("linear", "conv"):
            return rate * self.fan_in() * self.target_neurons()
        if self.kind == "aa":
            n_src = self.source_neurons() if n_src is None else n_src
            fanout = 2 * (p["cols"] if p["side"] == "left" else p["rows"])
            return rate * n_src * fanout
        raise AccountingError(f"unknown synapse kind {self.kind!r}")


def conv_pre(c_in, kh, kw, c_out, oh, ow, rate=1) -> Fraction:
    return Synapse.conv("", "", c_in, kh, kw, c_out, oh, ow).pre_events(Fraction(rate))


def linear_pre(n_in, n_out, rate=1, tokens=1) -> Fraction:
    return Synapse.linear("", "", tokens, n_in, n_out).pre_events(Fraction(rate))


@dataclass
class SpikeActivityLog:
    """Per-step fired-spike counts of every neuron layer in one run."""

    sites: list[str]
    n_neu: dict[str, int]
    synapses: list[Synapse]
    record_events: bool = False
    counts: list[list[int]] = field(default_factory=list)
    events: list[tuple[int, str, np.ndarray, np.ndarray]] = field(default_factory=list)
    t_eq: int | None = None
    attention: list | None = None

    def record(self, t: int, fired: dict[str, np.ndarray]) -> None:
        self.counts.append([int(np.count_nonzero(fired[s])) for s in self.sites])
        if self.record_events:
            for s in self.sites:
                flat = fired[s].ravel()
                idx = np.flatnonzero(flat)
                if idx.size:
                    self.events.append((t, s, idx, flat[idx].copy()))

    @property
    def steps(self) -> int:
        return len(self.counts)

    def fired(self, site: str, t: int) -> int:
        return self.counts[t - 1][self.sites.index(site)]

    def rate(self, site: str, t: int) -> Fraction:
        return Fraction(self.fired(site, t), self.n_neu[site])

    def to_dict(self) -> dict:
        return {"sites": list(self.sites), "n_neu": dict(self.n_neu), "counts": self.counts,
                "t_eq": self.t_eq}


def count_post(log: SpikeActivityLog, t: int | None = None) -> int:
    """Neuron-emitted spikes, ``sum_i R_i * N_neu_i`` over layers (and steps)."""
    steps = range(1, log.steps + 1) if t is None else [t]
    total = Fraction(0)
    for step in steps:
        for s in log.sites:
            total += log.rate(s, step) * log.n_neu[s]
    return _as_int(total)


def count_pre(log: SpikeActivityLog, t: int | None = None) -> int:
    steps = range(1, log.steps + 1) if t is None else [t]
    total = Fraction(0)
    for step in steps:
        for syn in log.synapses:
            if syn.source not in log.n_neu:
                raise AccountingError(f"no neuron layer {syn.source!r} for synapse into {syn.target}")
            total += syn.pre_events(log.rate(syn.source, step), log.n_neu[syn.source])
    return _as_int(total)


def _as_int(x: Fraction) -> int:
    if x.denominator != 1:
        raise AccountingError(f"non-integral spike count {x}")
    return int(x)


def total_spikes(log: SpikeActivityLog, t: int | None = None) -> int:
    return count_pre(log, t) + count_post(log, t)


@dataclass(frozen=True)
class PowerReport:
    total_spikes_per_step: float
    alpha_energy: float = DEFAULT_ALPHA
    step_seconds: float = STEP_SECONDS

    @property
    def power_watts(self) -> float:
        return self.total_spikes_per_step / self.step_seconds * self.alpha_energy

    def to_dict(self) -> dict:
        return {"total_spikes_per_step": self.total_spikes_per_step,
                "alpha_energy": self.alpha_energy, "step_seconds": self.step_seconds,
                "power_watts": self.power_watts}


def estimate_power(total_spikes_per_step: float, alpha: float = DEFAULT_ALPHA) -> PowerReport:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return PowerReport(float(total_spikes_per_step), float(alpha))


def spike_report(log: SpikeActivityLog, alpha: float = DEFAULT_ALPHA) -> dict:
    """Pre/post/total counts per step and overall, with the mean-step power."""
    per_step = []
    for t in range(1, log.steps + 1):
        pre, post = count_pre(log, t), count_post(log, t)
        per_step.append({"t": t, "pre": pre, "post": post, "total": pre + post})
    pre = sum(r["pre"] for r in per_step)
    post = sum(r["post"] for r in per_step)
    steps = max(log.t_eq or log.steps, 1)
    mean = (pre + post) / steps
    return {"steps": log.steps, "t_eq": log.t_eq, "pre": pre, "post": post, "total": pre + post,
            "per_step": per_step, "power": estimate_power(mean, alpha).to_dict()}


def complexity_report(config, t: int, gamma: float = 1.0, log: SpikeActivityLog | None = None) -> dict:
    """Spatial/temporal operation counts per operator for sequence ``n``, width ``d``.

    ``gamma`` is the cost of one ANN operation relative to one SNN operation;
    it is a caller-supplied knob and is not measured.
    """
    n, d = config.n, config.d
    rows = [
        {"network": "SNN", "operator": "AW-Mult", "spatial": n * d + d * d, "temporal": t * n * d * d},
        {"network": "SNN", "operator": "AA-Mult", "spatial": n * d, "temporal": t * n * d * d},
        {"network": "SNN", "operator": "SSoftmax", "spatial": n * n, "temporal": t * n * n},
        {"network": "SNN", "operator": "SLayerNorm", "spatial": n * d, "temporal": t * n * d},
        {"network": "QANN", "operator": "AW-Mult", "spatial": n * d + d * d, "temporal": gamma * n * d * d},
        {"network": "QANN", "operator": "AA-Mult", "spatial": n * d, "temporal": gamma * n * d * d},
        {"network": "QANN", "operator": "Softmax", "spatial": 1, "temporal": gamma * n * n},
        {"network": "QANN", "operator": "LayerNorm", "spatial": 1, "temporal": gamma * n * d},
    ]
    measured = None
    if log is not None:
        measured = {"pre": count_pre(log), "post": count_post(log)}
        measured["total"] = measured["pre"] + measured["post"]
    return {"n": n, "d": d, "T": t, "gamma": gamma, "rows": rows, "measured_spikes": measured}
