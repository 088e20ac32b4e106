"""A small pre-LN encoder in float, quantized and spiking form.

Quantizer sites, in forward order (``L`` is the block index)::

    embed                 token embedding + position, before the first block
    blocks.L.ln1          layernorm output, input of the Q/K/V linears
    blocks.L.q/k/v        Q/K/V linear outputs
    blocks.L.attn         softmax output (attention array), unsigned
    blocks.L.attnv        attention x value product, input of the projection
    blocks.L.proj         projection output, added to the residual stream
    blocks.L.ln2          layernorm output, input of the first MLP linear
    blocks.L.mlp_mid      first MLP linear output, unsigned (acts as ReLU)
    blocks.L.mlp_out      second MLP linear output, added to the residual
    head_in               final layernorm output, input of the head

The spiking view replaces every site by a neuron layer with
``(v_thr, s_min, s_max) = (s, alpha, beta)``, both attention products by
activation-activation operators, and softmax/layernorm by differential
operators.  All layers advance on one global clock; external charge (the
embedding and every bias) is injected on the first step only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .metrics import SpikeActivityLog, Synapse
from .neuron import NonConvergenceError, StBifState
from .quantization import QuantizerSpec, calibrate, quantize, to_neuron_params
from .spiking_ops import AaState, aa_step, aw_step, diff_step, spike_layernorm, spike_softmax
from .tensor import DimensionError, as_tensor, layernorm, matmul, softmax

BLOCK_SITES = ("ln1", "q", "k", "v", "attn", "attnv", "proj", "ln2", "mlp_mid", "mlp_out")
UNSIGNED_SITES = frozenset({"attn", "mlp_mid"})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    n: int = 8
    d: int = 16
    heads: int = 2
    d_ff: int = 64
    layers: int = 2
    levels: int = 16
    classes: int = 10
    d_in: int | None = None
    eps: float = 1e-5

    def __post_init__(self):
        if self.d_in is None:
            object.__setattr__(self, "d_in", self.d)
        for name in ("n", "d", "heads", "d_ff", "layers", "classes", "d_in"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d % self.heads:
            raise ConfigError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.levels < 2:
            raise ConfigError("levels must be >= 2")

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("n", "d", "heads", "d_ff", "layers", "levels", "classes", "d_in", "eps")}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def site_names(config: EncoderConfig) -> list[str]:
    names = ["embed"]
    for layer in range(config.layers):
        names += [f"blocks.{layer}.{s}" for s in BLOCK_SITES]
    names.append("head_in")
    return names


def site_is_signed(site: str) -> bool:
    return site.rsplit(".", 1)[-1] not in UNSIGNED_SITES


def weight_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    c = config
    shapes = {"embed.w": (c.d_in, c.d), "embed.b": (c.d,), "pos": (c.n, c.d)}
    for layer in range(c.layers):
        p = f"blocks.{layer}"
        shapes.update({
            f"{p}.ln1.gamma": (c.d,), f"{p}.ln1.beta": (c.d,),
            f"{p}.attn.wq": (c.d, c.d), f"{p}.attn.bq": (c.d,),
            f"{p}.attn.wk": (c.d, c.d), f"{p}.attn.bk": (c.d,),
            f"{p}.attn.wv": (c.d, c.d), f"{p}.attn.bv": (c.d,),
            f"{p}.attn.wo": (c.d, c.d), f"{p}.attn.bo": (c.d,),
            f"{p}.ln2.gamma": (c.d,), f"{p}.ln2.beta": (c.d,),
            f"{p}.mlp.w1": (c.d, c.d_ff), f"{p}.mlp.b1": (c.d_ff,),
            f"{p}.mlp.w2": (c.d_ff, c.d), f"{p}.mlp.b2": (c.d,),
        })
    shapes.update({"ln_f.gamma": (c.d,), "ln_f.beta": (c.d,),
                   "head.w": (c.d, c.classes), "head.b": (c.classes,)})
    return shapes


def _check_weights(config: EncoderConfig, weights: dict) -> None:
    expected = weight_shapes(config)
    if set(weights) != set(expected):
        missing = sorted(set(expected) - set(weights))
        extra = sorted(set(weights) - set(expected))
        raise ConfigError(f"weight names do not match config (missing {missing}, unexpected {extra})")
    for name, shape in expected.items():
        if weights[name].shape != shape:
            raise ConfigError(f"{name}: shape {weights[name].shape}, expected {shape}")


@dataclass
class AnnModel:
    config: EncoderConfig
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        _check_weights(self.config, self.weights)


@dataclass
class QannModel:
    config: EncoderConfig
    weights: dict[str, np.ndarray]
    quantizers: dict[str, QuantizerSpec]

    def __post_init__(self):
        _check_weights(self.config, self.weights)
        if list(self.quantizers) != site_names(self.config):
            raise ConfigError("quantizer sites do not match the site enumeration")


@dataclass(frozen=True)
class NeuronParams:
    v_thr: float
    s_min: int
    s_max: int
    v0: float

    def to_dict(self) -> dict:
        return {"v_thr": self.v_thr, "s_min": self.s_min, "s_max": self.s_max, "v0": self.v0}

    @classmethod
    def from_dict(cls, d: dict) -> "NeuronParams":
        return cls(float(d["v_thr"]), int(d["s_min"]), int(d["s_max"]), float(d["v0"]))


@dataclass
class SnnModel:
    config: EncoderConfig
    weights: dict[str, np.ndarray]
    neurons: dict[str, NeuronParams]

    def __post_init__(self):
        _check_weights(self.config, self.weights)
        if list(self.neurons) != site_names(self.config):
            raise ConfigError("neuron layers do not match the site enumeration")


# --------------------------------------------------------------------------
# dense forward (ANN and QANN share one body; only the site hook differs)


def _check_input(config: EncoderConfig, x) -> np.ndarray:
    x = as_tensor(x)
    if x.shape != (config.n, config.d_in):
        raise DimensionError(f"input shape {x.shape}, expected {(config.n, config.d_in)}")
    return x


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    heads, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, heads * dh)


def _dense_forward(config: EncoderConfig, w: dict, x, site: Callable[[str, np.ndarray], np.ndarray]):
    x = _check_input(config, x)
    attn_scale = 1.0 / math.sqrt(config.head_dim)
    h = site("embed", aw_step(w["embed.w"], x, w["embed.b"]) + w["pos"])
    for layer in range(config.layers):
        p = f"blocks.{layer}"
        y = site(f"{p}.ln1", layernorm(h, w[f"{p}.ln1.gamma"], w[f"{p}.ln1.beta"], config.eps))
        q = site(f"{p}.q", aw_step(w[f"{p}.attn.wq"], y, w[f"{p}.attn.bq"]))
        k = site(f"{p}.k", aw_step(w[f"{p}.attn.wk"], y, w[f"{p}.attn.bk"]))
        v = site(f"{p}.v", aw_step(w[f"{p}.attn.wv"], y, w[f"{p}.attn.bv"]))
        qh, kh, vh = (_split_heads(t, config.heads) for t in (q, k, v))
        scores = matmul(qh, np.swapaxes(kh, -1, -2)) * attn_scale
        a = site(f"{p}.attn", softmax(scores))
        av = site(f"{p}.attnv", _merge_heads(matmul(a, vh)))
        o = site(f"{p}.proj", aw_step(w[f"{p}.attn.wo"], av, w[f"{p}.attn.bo"]))
        h = h + o
        y2 = site(f"{p}.ln2", layernorm(h, w[f"{p}.ln2.gamma"], w[f"{p}.ln2.beta"], config.eps))
        m = site(f"{p}.mlp_mid", aw_step(w[f"{p}.mlp.w1"], y2, w[f"{p}.mlp.b1"]))
        m2 = site(f"{p}.mlp_out", aw_step(w[f"{p}.mlp.w2"], m, w[f"{p}.mlp.b2"]))
        h = h + m2
    z = site("head_in", layernorm(h, w["ln_f.gamma"], w["ln_f.beta"], config.eps))
    return _head(w, z, with_bias=True)


def _head(w: dict, z: np.ndarray, with_bias: bool) -> np.ndarray:
    pooled = np.mean(z, axis=0, keepdims=True)
    return aw_step(w["head.w"], pooled, w["head.b"] if with_bias else None)[0]


def _ann_site(name: str, x: np.ndarray) -> np.ndarray:
    if name.endswith(".mlp_mid"):
        return np.maximum(x, 0.0)
    return x


def forward_ann(model: AnnModel, x, capture: dict | None = None) -> np.ndarray:
    """Float forward pass.  ``capture`` (if given) receives every site activation."""
    def site(name, value):
        value = _ann_site(name, value)
        if capture is not None:
            capture[name] = value
        return value
    return _dense_forward(model.config, model.weights, x, site)


def forward_qann(model: QannModel, x, capture: dict | None = None) -> np.ndarray:
    def site(name, value):
        value = quantize(value, model.quantizers[name])
        if capture is not None:
            capture[name] = value
        return value
    return _dense_forward(model.config, model.weights, x, site)


def quantize_model(ann: AnnModel, calib_inputs, levels: int | None = None) -> QannModel:
    """Calibrate one quantizer per site from float activations on ``calib_inputs``."""
    calib_inputs = list(calib_inputs)
    if not calib_inputs:
        from .quantization import CalibrationError
        raise CalibrationError("no calibration inputs")
    config = ann.config
    if levels is not None and levels != config.levels:
        config = EncoderConfig(**{**config.to_dict(), "levels": levels})
    samples: dict[str, list] = {name: [] for name in site_names(config)}
    for x in calib_inputs:
        acts: dict = {}
        forward_ann(ann, x, capture=acts)
        for name, value in acts.items():
            samples[name].append(value)
    quantizers = {name: calibrate(samples[name], config.levels, site_is_signed(name))
                  for name in site_names(config)}
    return QannModel(config, dict(ann.weights), quantizers)


def convert(qann: QannModel) -> SnnModel:
    """Map each quantizer onto a neuron layer; the weights are shared unchanged."""
    neurons = {}
    for name, q in qann.quantizers.items():
        v_thr, s_min, s_max = to_neuron_params(q)
        neurons[name] = NeuronParams(v_thr, s_min, s_max, v_thr / 2)
    return SnnModel(qann.config, dict(qann.weights), neurons)


# --------------------------------------------------------------------------
# spiking forward


def site_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    c = config
    shapes = {"embed": (c.n, c.d)}
    for layer in range(c.layers):
        p = f"blocks.{layer}"
        for s in ("ln1", "q", "k", "v", "attnv", "proj", "ln2", "mlp_out"):
            shapes[f"{p}.{s}"] = (c.n, c.d)
        shapes[f"{p}.attn"] = (c.heads, c.n, c.n)
        shapes[f"{p}.mlp_mid"] = (c.n, c.d_ff)
    shapes["head_in"] = (c.n, c.d)
    return {name: shapes[name] for name in site_names(config)}


def synapses(config: EncoderConfig) -> list[Synapse]:
    """Spike-carrying connections into matrix-product operators."""
    c = config
    dh = c.head_dim
    out = []
    for layer in range(c.layers):
        p = f"blocks.{layer}"
        for proj in ("q", "k", "v"):
            out.append(Synapse.linear(f"{p}.ln1", f"{p}.w{proj}", tokens=c.n, n_in=c.d, n_out=c.d))
        # q·k^T per head: q spike (h,i,r) touches row i, k spike (h,j,r) touches column j
        out.append(Synapse.aa(f"{p}.q", f"{p}.qk", "left", heads=c.heads, rows=c.n, inner=dh, cols=c.n))
        out.append(Synapse.aa(f"{p}.k", f"{p}.qk", "right", heads=c.heads, rows=c.n, inner=dh, cols=c.n))
        out.append(Synapse.aa(f"{p}.attn", f"{p}.av", "left", heads=c.heads, rows=c.n, inner=c.n, cols=dh))
        out.append(Synapse.aa(f"{p}.v", f"{p}.av", "right", heads=c.heads, rows=c.n, inner=c.n, cols=dh))
        out.append(Synapse.linear(f"{p}.attnv", f"{p}.wo", tokens=c.n, n_in=c.d, n_out=c.d))
        out.append(Synapse.linear(f"{p}.ln2", f"{p}.w1", tokens=c.n, n_in=c.d, n_out=c.d_ff))
        out.append(Synapse.linear(f"{p}.mlp_mid", f"{p}.w2", tokens=c.n, n_in=c.d_ff, n_out=c.d))
    out.append(Synapse.linear("head_in", "head", tokens=c.n, n_in=c.d, n_out=c.classes))
    return out


class SnnRun(NamedTuple):
    logits: np.ndarray
    t_eq: int
    log: SpikeActivityLog
    history: np.ndarray  # (steps, classes): accumulated head charge after each step

    def logits_at(self, t: int) -> np.ndarray:
        """Head charge accumulated after ``t`` steps (final value once ``t >= t_eq``)."""
        if t < 1:
            raise ValueError("t must be >= 1")
        return self.history[min(t, len(self.history)) - 1]


@dataclass
class _SnnState:
    neurons: dict[str, StBifState]
    ln1: list
    ln2: list
    qk: list
    av: list
    softmax: list
    ln_f: object = None
    attention: list = field(default_factory=list)


def _fresh_state(model: SnnModel) -> _SnnState:
    c, w = model.config, model.weights
    shapes = site_shapes(c)
    neurons = {name: StBifState(shapes[name], p.v_thr, p.s_min, p.s_max, p.v0)
               for name, p in model.neurons.items()}
    dh = c.head_dim
    return _SnnState(
        neurons=neurons,
        ln1=[spike_layernorm((c.n, c.d), w[f"blocks.{l}.ln1.gamma"], w[f"blocks.{l}.ln1.beta"], c.eps)
             for l in range(c.layers)],
        ln2=[spike_layernorm((c.n, c.d), w[f"blocks.{l}.ln2.gamma"], w[f"blocks.{l}.ln2.beta"], c.eps)
             for l in range(c.layers)],
        qk=[AaState((c.heads, c.n, dh), (c.heads, c.n, dh), transpose_b=True) for _ in range(c.layers)],
        av=[AaState((c.heads, c.n, c.n), (c.heads, c.n, dh), transpose_b=False) for _ in range(c.layers)],
        softmax=[spike_softmax((c.heads, c.n, c.n)) for _ in range(c.layers)],
        ln_f=spike_layernorm((c.n, c.d), w["ln_f.gamma"], w["ln_f.beta"], c.eps),
        attention=[np.zeros((c.heads, c.n, c.n)) for _ in range(c.layers)],
    )


def forward_snn(model: SnnModel, x, t_max: int | None = None, strict: bool = True,
                record_events: bool = False) -> SnnRun:
    """Run the spiking network until every neuron is static.

    With ``strict=False`` hitting ``t_max`` returns the truncated state instead
    of raising, which is how partial-time readouts are taken.
    """
    c, w = model.config, model.weights
    x = _check_input(c, x)
    if t_max is None:
        t_max = 16 * c.levels
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    st = _fresh_state(model)
    names = site_names(c)
    shapes = site_shapes(c)
    log = SpikeActivityLog(names, {k: int(np.prod(v)) for k, v in shapes.items()},
                           synapses(c), record_events=record_events)
    attn_scale = 1.0 / math.sqrt(c.head_dim)
    embed_charge = aw_step(w["embed.w"], x, w["embed.b"]) + w["pos"]
    logits = np.zeros(c.classes)
    history = []
    last_active = 0
    converged = False

    for t in range(1, t_max + 1):
        inject = t == 1
        fired = {}

        def fire(name, v_in):
            neuron = st.neurons[name]
            theta = neuron.step(v_in)
            fired[name] = theta
            return neuron.v_thr * theta

        def bias(key):
            return w[key] if inject else None

        h = fire("embed", embed_charge if inject else np.zeros((c.n, c.d)))
        for layer in range(c.layers):
            p = f"blocks.{layer}"
            y = fire(f"{p}.ln1", diff_step(st.ln1[layer], h))
            q = fire(f"{p}.q", aw_step(w[f"{p}.attn.wq"], y, bias(f"{p}.attn.bq")))
            k = fire(f"{p}.k", aw_step(w[f"{p}.attn.wk"], y, bias(f"{p}.attn.bk")))
            v = fire(f"{p}.v", aw_step(w[f"{p}.attn.wv"], y, bias(f"{p}.attn.bv")))
            qh, kh, vh = (_split_heads(u, c.heads) for u in (q, k, v))
            scores = aa_step(st.qk[layer], qh, kh) * attn_scale
            a = fire(f"{p}.attn", diff_step(st.softmax[layer], scores))
            st.attention[layer] = st.attention[layer] + a
            av = fire(f"{p}.attnv", _merge_heads(aa_step(st.av[layer], a, vh)))
            o = fire(f"{p}.proj", aw_step(w[f"{p}.attn.wo"], av, bias(f"{p}.attn.bo")))
            h = h + o
            y2 = fire(f"{p}.ln2", diff_step(st.ln2[layer], h))
            m = fire(f"{p}.mlp_mid", aw_step(w[f"{p}.mlp.w1"], y2, bias(f"{p}.mlp.b1")))
            m2 = fire(f"{p}.mlp_out", aw_step(w[f"{p}.mlp.w2"], m, bias(f"{p}.mlp.b2")))
            h = h + m2
        z = fire("head_in", diff_step(st.ln_f, h))
        logits = logits + _head(w, z, with_bias=inject)
        history.append(logits.copy())
        log.record(t, fired)

        if any(np.any(theta) for theta in fired.values()):
            last_active = t
        if all(n.is_static() for n in st.neurons.values()):
            converged = True
            break

    t_eq = max(1, last_active)
    log.t_eq = t_eq
    log.attention = [a.copy() for a in st.attention]
    run = SnnRun(logits, t_eq, log, np.array(history))
    if not converged and strict:
        raise NonConvergenceError(f"spiking network not static after {t_max} steps",
                                  state=st, partial=run)
    return run


# --------------------------------------------------------------------------
# time-step sweep


def sweep_timesteps(qann: QannModel, snn: SnnModel, inputs, t_list, t_max: int | None = None,
                    runs: list | None = None) -> list[dict]:
    """Argmax agreement and max abs logit error of the SNN truncated at each T."""
    inputs = list(inputs)
    if runs is None:
        runs = [forward_snn(snn, x, t_max=t_max) for x in inputs]
    reference = [forward_qann(qann, x) for x in inputs]
    rows = []
    for t in t_list:
        agree = 0
        err = 0.0
        for run, ref in zip(runs, reference):
            out = run.logits_at(t)
            agree += int(np.argmax(out) == np.argmax(ref))
            err = max(err, float(np.max(np.abs(out - ref))))
        rows.append({"T": int(t), "agreement": agree / len(inputs), "max_abs_err": err})
    return rows
