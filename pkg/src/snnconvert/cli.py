"""Command-line front end.

Exit codes: 0 ok, 2 configuration/usage, 3 numeric or non-convergence,
4 I/O, 5 equivalence check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import manifest as mf
from .metrics import DEFAULT_ALPHA, AccountingError, complexity_report, estimate_power, spike_report
from .neuron import NonConvergenceError
from .quantization import CalibrationError
from .tensor import DimensionError, NonFiniteError
from .transformer import (ConfigError, EncoderConfig, convert, forward_ann, forward_qann,
                          forward_snn, quantize_model)

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO, EXIT_EQUIV = 2, 3, 4, 5


class EquivalenceFailure(Exception):
    pass


def _map(fn, items):
    """Evaluate ``fn`` over ``items`` on the worker pool, preserving order."""
    workers = mf.worker_count()
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _floats(a) -> list:
    return [float(v) for v in np.ravel(a)]


def _load_config(value: str | None) -> EncoderConfig:
    if value is None:
        return EncoderConfig()
    path = Path(value)
    try:
        text = path.read_text(encoding="utf-8") if path.exists() else value
        doc = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"--config is neither a JSON file nor inline JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("--config must be a JSON object")
    return EncoderConfig.from_dict(doc)


def _inputs_arg(value: str, config: EncoderConfig, seed: int) -> np.ndarray:
    """``--inputs`` is either a count of random inputs or an inputs manifest."""
    if Path(value).exists():
        return mf.load_inputs(value)
    try:
        count = int(value)
    except ValueError as exc:
        raise mf.ManifestError(f"--inputs {value!r}: no such file") from exc
    if count < 1:
        raise ConfigError("--inputs count must be >= 1")
    return mf.generate_inputs(config, count, seed)


def _snn_pair(args):
    q = mf.load(args.qann)
    s = mf.load(args.snn) if args.snn else None
    qann = q.qann()
    snn = s.snn() if s is not None else convert(qann)
    return qann, snn


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_model(args):
    config = _load_config(args.config)
    mf.save(mf.generate_model(config, args.seed), args.out)


def cmd_gen_input(args):
    config = mf.load(args.model).config
    inputs = mf.generate_inputs(config, args.count, args.seed)
    mf.save(mf.inputs_manifest(config, inputs, args.seed), args.out)


def cmd_calibrate(args):
    m = mf.load(args.model)
    inputs = mf.load_inputs(args.inputs)
    qann = quantize_model(m.ann(), list(inputs), levels=args.levels)
    mf.save(mf.ModelManifest.from_model(qann, seed=m.seed), args.out or args.model)


def cmd_convert(args):
    m = mf.load(args.qann)
    snn = convert(m.qann())
    out = mf.ModelManifest.from_model(snn, seed=m.seed)
    out.quantizers = dict(m.quantizers)
    mf.save(out, args.out)


def cmd_run(args):
    m = mf.load(args.model)
    inputs = mf.load_inputs(args.input)
    if args.index is not None:
        inputs = inputs[args.index:args.index + 1]
    start = time.perf_counter()
    if args.mode == "ann":
        model = m.ann()
        fn = lambda x: {"logits": _floats(forward_ann(model, x))}
    elif args.mode == "qann":
        model = m.qann()
        def fn(x):
            acts = {}
            row = {"logits": _floats(forward_qann(model, x, capture=acts))}
            if args.attention:
                row["attention"] = [acts[f"blocks.{l}.attn"].tolist() for l in range(model.config.layers)]
            return row
    else:
        snn = m.snn() if m.neurons is not None else convert(m.qann())
        qann = m.qann() if m.quantizers is not None else None
        def fn(x):
            run = forward_snn(snn, x, t_max=args.t_max)
            row = {"logits": _floats(run.logits), "t_eq": run.t_eq}
            if qann is not None:
                ref = forward_qann(qann, x)
                row["qann_logits"] = _floats(ref)
                row["max_abs_err"] = float(np.max(np.abs(run.logits - ref)))
            report = spike_report(run.log)
            row["spikes"] = {k: report[k] for k in ("pre", "post", "total")}
            row["power"] = report["power"]
            if args.attention:
                row["attention"] = [a.tolist() for a in run.log.attention]
            return row
    rows = _map(fn, list(inputs))
    report = {"mode": args.mode, "model": m.view, "inputs": [{"index": i, **r} for i, r in enumerate(rows)]}
    if args.timing:
        report["wall_time_s"] = time.perf_counter() - start
    _emit_json(report)


def cmd_check_equiv(args):
    qann, snn = _snn_pair(args)
    inputs = _inputs_arg(args.inputs, qann.config, args.seed)

    def fn(x):
        run = forward_snn(snn, x, t_max=args.t_max)
        ref = forward_qann(qann, x)
        return float(np.max(np.abs(run.logits - ref))), bool(np.argmax(run.logits) == np.argmax(ref)), run.t_eq

    results = _map(fn, list(inputs))
    errs = [r[0] for r in results]
    worst = int(np.argmax(errs))
    summary = {"inputs": len(results), "tol": args.tol, "max_abs_err": errs[worst],
               "worst_index": worst, "argmax_agreement": sum(r[1] for r in results) / len(results),
               "max_t_eq": max(r[2] for r in results), "pass": errs[worst] <= args.tol}
    _emit_json(summary)
    if not summary["pass"]:
        raise EquivalenceFailure(f"max abs error {errs[worst]:.3e} > tol {args.tol:.3e}")


def cmd_sweep(args):
    qann, snn = _snn_pair(args)
    inputs = list(_inputs_arg(args.inputs, qann.config, args.seed))
    t_list = [int(t) for t in args.t_list.split(",") if t.strip()]
    if not t_list or min(t_list) < 1:
        raise ConfigError("--t-list needs positive integers")
    pairs = _map(lambda x: (forward_snn(snn, x, t_max=args.t_max), forward_qann(qann, x)), inputs)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["T", "agreement", "max_abs_err"])
    for t in t_list:
        agree = sum(int(np.argmax(r.logits_at(t)) == np.argmax(ref)) for r, ref in pairs) / len(pairs)
        err = max(float(np.max(np.abs(r.logits_at(t) - ref))) for r, ref in pairs)
        writer.writerow([t, repr(agree), repr(err)])


def cmd_spikes(args):
    m = mf.load(args.snn)
    snn = m.snn() if m.neurons is not None else convert(m.qann())
    inputs = mf.load_inputs(args.input)
    x = inputs[args.index]
    run = forward_snn(snn, x, t_max=args.t_max)
    report = spike_report(run.log, args.alpha)
    report["complexity"] = complexity_report(snn.config, run.t_eq, gamma=args.gamma, log=run.log)
    _emit_json(report)


def cmd_power(args):
    if args.spikes_per_step is not None:
        report = estimate_power(args.spikes_per_step, args.alpha).to_dict()
    elif args.snn and args.input:
        m = mf.load(args.snn)
        snn = m.snn() if m.neurons is not None else convert(m.qann())
        x = mf.load_inputs(args.input)[args.index]
        report = spike_report(forward_snn(snn, x, t_max=args.t_max).log, args.alpha)["power"]
    else:
        raise ConfigError("power needs --spikes-per-step or both --snn and --input")
    _emit_json(report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnconvert",
                                     description="Quantized transformer to spiking network conversion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="generate a random float model")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="JSON file or inline JSON with EncoderConfig fields")
    p.add_argument("out", help="output .manifest path")
    p.set_defaults(fn=cmd_gen_model)

    p = sub.add_parser("gen-input", help="generate random input token embeddings")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("out")
    p.set_defaults(fn=cmd_gen_input)

    p = sub.add_parser("calibrate", help="attach activation quantizers to a model")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True, help="inputs manifest used for calibration")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--out", help="output manifest (default: overwrite --model)")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("convert", help="convert a calibrated model to its spiking form")
    p.add_argument("--qann", required=True)
    p.add_argument("out")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("run", help="forward pass, JSON report on stdout")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--index", type=int)
    p.add_argument("--mode", choices=("ann", "qann", "snn"), required=True)
    p.add_argument("--t-max", type=int)
    p.add_argument("--attention", action="store_true", help="include attention arrays")
    p.add_argument("--timing", action="store_true", help="include wall time (output no longer reproducible)")
    p.set_defaults(fn=cmd_run)

    for name, fn, help_ in (("check-equiv", cmd_check_equiv, "compare SNN and QANN logits"),
                            ("sweep", cmd_sweep, "agreement vs truncation time, CSV on stdout")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--qann", required=True)
        p.add_argument("--snn", help="converted manifest (default: convert --qann on the fly)")
        p.add_argument("--inputs", default="10", help="count of random inputs, or an inputs manifest")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--t-max", type=int)
        if name == "check-equiv":
            p.add_argument("--tol", type=float, default=1e-6)
        else:
            p.add_argument("--t-list", default="1,2,4,8,16,32,64")
        p.set_defaults(fn=fn)

    p = sub.add_parser("spikes", help="spike counts, power and complexity for one input")
    p.add_argument("--snn", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--t-max", type=int)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--gamma", type=float, default=1.0)
    p.set_defaults(fn=cmd_spikes)

    p = sub.add_parser("power", help="power estimate from a spike rate or a run")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--spikes-per-step", type=float)
    p.add_argument("--snn")
    p.add_argument("--input")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--t-max", type=int)
    p.set_defaults(fn=cmd_power)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, CalibrationError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, NonFiniteError, ArithmeticError, AccountingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EquivalenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EQUIV
    return 0


if __name__ == "__main__":
    sys.exit(main())
