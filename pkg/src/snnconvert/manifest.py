"""JSON manifest + raw float64 blob storage, and seeded random generation.

A manifest describes either a model (``kind: "model"``) or a stack of input
tensors (``kind: "inputs"``).  Tensor data lives in a sidecar blob next to
the manifest: little-endian float64, row-major, tensors back to back in the
order listed.  Each entry records its byte ``offset`` and element ``length``.

Random tensors come from numpy's Philox counter-based generator.  The seed is
expanded with ``SeedSequence`` and each tensor draws from its own spawned
child stream (the i-th tensor in manifest order uses child i), so adding a
tensor never perturbs the others.  Gaussians are numpy's
``Generator.standard_normal``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quantization import QuantizerSpec
from .transformer import (AnnModel, ConfigError, EncoderConfig, NeuronParams, QannModel,
                          SnnModel, site_names, weight_shapes)

FORMAT_VERSION = 1
DTYPE = "<f8"


class ManifestError(OSError):
    """Manifest or blob is missing, malformed or inconsistent."""


@dataclass
class ModelManifest:
    config: EncoderConfig
    tensors: dict[str, np.ndarray]
    kind: str = "model"
    seed: int | None = None
    quantizers: dict[str, QuantizerSpec] | None = None
    neurons: dict[str, NeuronParams] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def view(self) -> str:
        if self.kind != "model":
            return self.kind
        if self.neurons is not None:
            return "snn"
        return "qann" if self.quantizers is not None else "ann"

    def ann(self) -> AnnModel:
        return AnnModel(self.config, self.tensors)

    def qann(self) -> QannModel:
        if self.quantizers is None:
            raise ConfigError("model has no quantizers; run calibrate first")
        return QannModel(self.config, self.tensors, self.quantizers)

    def snn(self) -> SnnModel:
        if self.neurons is None:
            raise ConfigError("model has no neuron parameters; run convert first")
        return SnnModel(self.config, self.tensors, self.neurons)

    @classmethod
    def from_model(cls, model, seed=None) -> "ModelManifest":
        m = cls(model.config, dict(model.weights), seed=seed)
        if isinstance(model, QannModel):
            m.quantizers = dict(model.quantizers)
        if isinstance(model, SnnModel):
            m.neurons = dict(model.neurons)
        return m


def _blob_path(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".blob")


def dumps(m: ModelManifest, blob_name: str) -> tuple[str, bytes]:
    entries = []
    chunks = []
    offset = 0
    for name, arr in m.tensors.items():
        data = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f64",
                        "offset": offset, "length": int(arr.size)})
        chunks.append(data)
        offset += len(data)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": m.kind,
        "view": m.view,
        "seed": m.seed,
        "config": m.config.to_dict(),
        "blob": blob_name,
        "tensors": entries,
        "quantizers": None if m.quantizers is None else {k: q.to_dict() for k, q in m.quantizers.items()},
        "neurons": None if m.neurons is None else {k: p.to_dict() for k, p in m.neurons.items()},
    }
    doc.update(m.extra)
    return json.dumps(doc, indent=2) + "\n", b"".join(chunks)


def save(m: ModelManifest, path) -> Path:
    path = Path(path)
    blob = _blob_path(path)
    text, data = dumps(m, blob.name)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        blob.write_bytes(data)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot write {path}: {exc}") from exc
    return path


def load(path) -> ModelManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        raw = (path.parent / doc["blob"]).read_bytes()
    except (OSError, ValueError, KeyError) as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise ManifestError(f"unsupported format_version {doc.get('format_version')!r}")
    config = EncoderConfig.from_dict(doc["config"])
    tensors = {}
    for e in doc["tensors"]:
        if e["dtype"] != "f64":
            raise ManifestError(f"{e['name']}: unsupported dtype {e['dtype']}")
        shape = tuple(e["shape"])
        if int(np.prod(shape)) != e["length"]:
            raise ManifestError(f"{e['name']}: shape {shape} does not hold {e['length']} elements")
        end = e["offset"] + 8 * e["length"]
        if e["offset"] < 0 or end > len(raw):
            raise ManifestError(f"{e['name']}: byte range [{e['offset']}, {end}) outside blob")
        tensors[e["name"]] = np.frombuffer(raw, dtype=DTYPE, count=e["length"],
                                           offset=e["offset"]).astype(np.float64).reshape(shape)
    kind = doc.get("kind", "model")
    m = ModelManifest(config, tensors, kind=kind, seed=doc.get("seed"))
    if doc.get("quantizers") is not None:
        m.quantizers = {k: QuantizerSpec.from_dict(v) for k, v in doc["quantizers"].items()}
    if doc.get("neurons") is not None:
        m.neurons = {k: NeuronParams.from_dict(v) for k, v in doc["neurons"].items()}
    if kind == "model":
        _validate_model(m)
    return m


def _validate_model(m: ModelManifest) -> None:
    expected = weight_shapes(m.config)
    if set(m.tensors) != set(expected):
        raise ManifestError("tensor names do not match the config")
    for name, shape in expected.items():
        if m.tensors[name].shape != shape:
            raise ManifestError(f"{name}: shape {m.tensors[name].shape}, config implies {shape}")
    sites = site_names(m.config)
    for block in (m.quantizers, m.neurons):
        if block is not None and list(block) != sites:
            raise ManifestError("site names do not match the site enumeration")


# --------------------------------------------------------------------------
# seeded generation


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def generate_weights(config: EncoderConfig, seed: int) -> dict[str, np.ndarray]:
    """Random encoder weights: matrices ~ N(0, 1/fan_in), biases/shifts ~ N(0, 0.01)."""
    shapes = weight_shapes(config)
    weights = {}
    for rng, (name, shape) in zip(_streams(seed, len(shapes)), shapes.items()):
        z = rng.standard_normal(shape)
        if name.endswith(".gamma"):
            weights[name] = 1.0 + 0.1 * z
        elif len(shape) == 2 and name != "pos":
            weights[name] = z / np.sqrt(shape[0])
        else:
            weights[name] = 0.1 * z
    return weights


def generate_model(config: EncoderConfig, seed: int) -> ModelManifest:
    return ModelManifest(config, generate_weights(config, seed), seed=seed)


def generate_inputs(config: EncoderConfig, count: int, seed: int) -> np.ndarray:
    """Synthetic token embeddings, shape ``(count, n, d_in)``, standard normal."""
    (rng,) = _streams(seed, 1)
    return rng.standard_normal((count, config.n, config.d_in))


def inputs_manifest(config: EncoderConfig, inputs: np.ndarray, seed: int | None = None) -> ModelManifest:
    return ModelManifest(config, {"inputs": np.asarray(inputs, dtype=np.float64)}, kind="inputs", seed=seed)


def load_inputs(path) -> np.ndarray:
    m = load(path)
    if m.kind != "inputs" or "inputs" not in m.tensors:
        raise ManifestError(f"{path} is not an inputs manifest")
    arr = m.tensors["inputs"]
    return arr.reshape((1,) + arr.shape) if arr.ndim == 2 else arr


def worker_count() -> int:
    """Size of the evaluation pool from ``SPIKEZIP_THREADS`` (0 or unset: sequential)."""
    raw = os.environ.get("SPIKEZIP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SPIKEZIP_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigError("SPIKEZIP_THREADS must be >= 0")
    return n
