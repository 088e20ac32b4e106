"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that the terminal summary prints.
"""

import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import ACCEPTANCE_RESULTS, BASE, SMALL, build_pair
from oracles import enumerate_counts
from snnconvert import manifest as mf
from snnconvert.cli import main
from snnconvert.metrics import count_post, count_pre, estimate_power
from snnconvert.neuron import StBifState, closed_form, run_to_equilibrium
from snnconvert.quantization import QuantizerSpec, quantize
from snnconvert.spiking_ops import AaState, aa_step, diff_step, spike_layernorm, spike_softmax
from snnconvert.tensor import layernorm, softmax
from snnconvert.transformer import AnnModel, forward_ann, forward_qann, forward_snn, quantize_model


def record(name, ok, detail):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


def _params(rng, m):
    v_thr = rng.uniform(0.05, 3.0, m)
    s_min = rng.integers(-8, 1, m)
    s_max = rng.integers(1, 9, m)
    v0 = rng.uniform(0, 1, m) * v_thr
    return v_thr, s_min, s_max, v0


def test_c1_neuron_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for steps in range(1, 9):
        m = 1250
        v_thr, s_min, s_max, v0 = _params(rng, m)
        xs = [rng.uniform(-6, 6, m) * v_thr for _ in range(steps)]
        n = StBifState((m,), v_thr, s_min, s_max, v0)
        acc, _ = run_to_equilibrium(n, xs, t_max=steps + 20)
        total = np.zeros(m)
        for x in xs:
            total = total + x
        worst = max(worst, float(np.max(np.abs(acc - closed_form(total, v_thr, s_min, s_max, v0)))))
        cases += m
    elapsed = time.perf_counter() - start
    record("C1 neuron closed form", worst <= 1e-12 and elapsed < 5,
           f"{cases} cases, max err {worst:.1e}, {elapsed:.2f}s")


def test_c2_quantizer_identity():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    mismatches, cases = 0, 0
    for _ in range(10):
        s = rng.uniform(0.01, 2.0)
        beta = int(rng.integers(1, 64))
        q = QuantizerSpec(s, -beta, beta, signed=True) if rng.random() < 0.5 else QuantizerSpec(s, 0, 2 * beta)
        x = rng.uniform(-1.5, 1.5, 1000) * s * q.beta
        frac = np.abs((x / s) % 1.0 - 0.5)
        x = x[frac > 1e-6]  # off the rounding boundaries
        steps = int(rng.integers(1, 5))
        parts = rng.dirichlet(np.ones(steps), size=x.size).T * x
        acc, _ = run_to_equilibrium(StBifState.from_quantizer(x.shape, q), list(parts),
                                    t_max=steps + q.levels + 2)
        mismatches += int(np.count_nonzero(acc != quantize(x, q)))
        cases += x.size
    # boundary grid: pinned convention floor(x/s + 1/2), i.e. ties toward +inf
    q = QuantizerSpec(0.5, -8, 8, signed=True)
    grid = (np.arange(-7, 7) + 0.5) * q.s
    acc, _ = run_to_equilibrium(StBifState.from_quantizer(grid.shape, q), [grid], t_max=40)
    pinned = q.s * np.clip(np.floor(grid / q.s + 0.5), q.alpha, q.beta)
    boundary_ok = np.array_equal(acc, pinned) and np.array_equal(acc[grid > 0], quantize(grid[grid > 0], q))
    elapsed = time.perf_counter() - start
    record("C2 quantizer identity", mismatches == 0 and boundary_ok and cases >= 9000 and elapsed < 5,
           f"{cases} off-boundary cases, {mismatches} mismatches, boundary grid "
           f"{'ok' if boundary_ok else 'MISMATCH'}, {elapsed:.2f}s")


def _spike_train(rng, steps, shape):
    thr = rng.uniform(0.01, 2.0)
    return [thr * rng.integers(-1, 2, size=shape).astype(float) for _ in range(steps)]


def _seq_sum(xs):
    acc = np.zeros_like(xs[0])
    for x in xs:
        acc = acc + x
    return acc


def test_c3_sesa_equivalence():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n, d = rng.choice([1, 2, 4, 8], size=2)
        steps = int(rng.integers(1, 17))
        qs, ks = _spike_train(rng, steps, (n, d)), _spike_train(rng, steps, (n, d))
        state = AaState((n, d), (n, d))
        total = _seq_sum([aa_step(state, q, k) for q, k in zip(qs, ks)])
        worst = max(worst, float(np.max(np.abs(total - _seq_sum(qs) @ _seq_sum(ks).T))))
    elapsed = time.perf_counter() - start
    record("C3 SESA equivalence", worst <= 1e-10 and elapsed < 10,
           f"1000 cases, max err {worst:.1e}, {elapsed:.2f}s")


def test_c4_differential_operators():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    worst = {"softmax": 0.0, "layernorm": 0.0}
    for _ in range(1000):
        rows, cols, steps = int(rng.integers(1, 9)), int(rng.integers(2, 17)), int(rng.integers(1, 17))
        xs = [rng.normal(scale=2.0, size=(rows, cols)) for _ in range(steps)]
        gamma, beta = 1 + 0.1 * rng.standard_normal(cols), 0.1 * rng.standard_normal(cols)
        for name, state, sigma in (
                ("softmax", spike_softmax((rows, cols)), softmax),
                ("layernorm", spike_layernorm((rows, cols), gamma, beta), lambda x: layernorm(x, gamma, beta))):
            total = _seq_sum([diff_step(state, x) for x in xs])
            worst[name] = max(worst[name], float(np.max(np.abs(total - sigma(_seq_sum(xs))))))
    elapsed = time.perf_counter() - start
    record("C4 spike softmax/layernorm", max(worst.values()) <= 1e-12 and elapsed < 10,
           f"1000 cases each, max err softmax {worst['softmax']:.1e} "
           f"layernorm {worst['layernorm']:.1e}, {elapsed:.2f}s")


def test_c5_end_to_end_losslessness():
    start = time.perf_counter()
    worst, agree, total, t_eq = 0.0, 0, 0, 0
    for model in range(50):
        _, qann, snn = build_pair(BASE, 1000 + model, calib=16)
        for x in mf.generate_inputs(BASE, 10, 5000 + model):
            run = forward_snn(snn, x)
            ref = forward_qann(qann, x)
            worst = max(worst, float(np.max(np.abs(run.logits - ref))))
            agree += int(np.argmax(run.logits) == np.argmax(ref))
            total += 1
            t_eq = max(t_eq, run.t_eq)
    elapsed = time.perf_counter() - start
    record("C5 end-to-end losslessness", worst <= 1e-6 and agree == total and elapsed < 120,
           f"{total} runs, max err {worst:.1e}, argmax {agree}/{total}, max T_eq {t_eq}, {elapsed:.1f}s")


def test_c6_timestep_sweep(base_pair):
    _, qann, snn = base_pair
    start = time.perf_counter()
    xs = mf.generate_inputs(BASE, 200, 606)
    runs = [forward_snn(snn, x) for x in xs]
    refs = [np.argmax(forward_qann(qann, x)) for x in xs]
    t_eq = max(r.t_eq for r in runs)

    def agreement(t):
        return float(np.mean([np.argmax(r.logits_at(t)) == ref for r, ref in zip(runs, refs)]))

    curve = [agreement(t) for t in range(1, t_eq + 1)]
    rho = spearmanr(np.arange(1, t_eq + 1), curve).statistic if t_eq > 1 else 1.0
    after = [agreement(t) for t in (t_eq, t_eq + 1, 2 * t_eq, 16 * BASE.levels)]
    elapsed = time.perf_counter() - start
    record("C6 timestep sweep", rho > 0.8 and all(a == 1.0 for a in after) and elapsed < 300,
           f"T_eq {t_eq}, spearman {rho:.3f}, agreement@1 {curve[0]:.3f}, at/after T_eq {after}, "
           f"{elapsed:.1f}s")


def test_c7_fine_grid(base_pair):
    ann, _, _ = base_pair
    start = time.perf_counter()
    xs = list(mf.generate_inputs(BASE, 100, 707))
    qann = quantize_model(ann, xs, levels=2**16)
    worst = max(float(np.max(np.abs(forward_qann(qann, x) - forward_ann(ann, x)))) for x in xs)
    elapsed = time.perf_counter() - start
    record("C7 fine-grid convergence", worst <= 1e-3 and elapsed < 60,
           f"100 inputs, max |QANN-ANN| {worst:.1e}, {elapsed:.1f}s")


def test_c8_accounting(base_pair, small_pair):
    mismatched, runs = 0, 0
    for config, (_, _, snn) in ((BASE, base_pair), (SMALL, small_pair)):
        for x in mf.generate_inputs(config, 10, 808):
            run = forward_snn(snn, x, record_events=True)
            if (count_pre(run.log), count_post(run.log)) != enumerate_counts(config, run.log):
                mismatched += 1
            runs += 1
    power = estimate_power(1e6, 0.9e-12).power_watts
    record("C8 spike accounting", mismatched == 0 and power == 9.0e-4,
           f"{runs} runs, {mismatched} formula/enumeration mismatches, power(1e6) = {power!r} W")


def _cli_transcript(tmp, capsys):
    """Run every subcommand once; return stdout per command and all written files."""
    cfg = '{"n": 8, "d": 16, "heads": 2, "d_ff": 64, "layers": 2, "levels": 16, "classes": 10}'
    m, inp, q, s = (str(tmp / f) for f in ("m.manifest", "in.manifest", "q.manifest", "s.manifest"))
    commands = [
        ["gen-model", "--seed", "9", "--config", cfg, m],
        ["gen-input", "--model", m, "--seed", "10", "--count", "8", inp],
        ["calibrate", "--model", m, "--inputs", inp, "--out", q],
        ["convert", "--qann", q, s],
        ["run", "--model", m, "--input", inp, "--mode", "ann"],
        ["run", "--model", q, "--input", inp, "--mode", "qann", "--attention"],
        ["run", "--model", s, "--input", inp, "--mode", "snn", "--attention"],
        ["check-equiv", "--qann", q, "--snn", s, "--inputs", "8", "--seed", "3"],
        ["sweep", "--qann", q, "--snn", s, "--inputs", inp, "--t-list", "1,2,4,8,16,32"],
        ["spikes", "--snn", s, "--input", inp, "--index", "3"],
        ["power", "--snn", s, "--input", inp],
        ["power", "--spikes-per-step", "1e6"],
    ]
    out = []
    capsys.readouterr()
    for argv in commands:
        code = main(argv)
        out.append((argv[0], code, capsys.readouterr().out))
    files = {p.name: p.read_bytes() for p in sorted(tmp.iterdir())}
    return out, files


def test_c9_determinism(tmp_path, capsys, monkeypatch):
    transcripts = []
    for i, threads in enumerate(("0", "0", "4")):
        monkeypatch.setenv("SPIKEZIP_THREADS", threads)
        work = tmp_path / str(i)
        work.mkdir()
        out, files = _cli_transcript(work, capsys)
        # manifests name their blob with a relative path, so directories compare equal
        transcripts.append(([(c, code, text.replace(str(work), "<dir>")) for c, code, text in out], files))
    ok_codes = all(code == 0 for c, code, _ in transcripts[0][0])
    same = transcripts[0] == transcripts[1] == transcripts[2]
    record("C9 CLI determinism", ok_codes and same,
           f"{len(transcripts[0][0])} commands, {len(transcripts[0][1])} files, reruns and "
           f"SPIKEZIP_THREADS=4 {'byte-identical' if same else 'DIFFER'}")
