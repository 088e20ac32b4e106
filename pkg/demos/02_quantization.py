"""Activation quantizers and their neuron counterparts.

Run:  python3 demos/02_quantization.py

A quantizer is calibrated from sample activations (max-abs), applied, and then
mapped to neuron parameters.  A neuron layer driven with the same values
reproduces the quantized activations exactly.
"""

import numpy as np

from snnconvert import (QuantizerSpec, StBifState, calibrate, quantize, run_to_equilibrium,
                        to_neuron_params)

rng = np.random.default_rng(0)
samples = [rng.normal(size=200) for _ in range(4)]

for signed in (False, True):
    q = calibrate(samples, levels=16, signed=signed)
    print(f"signed={signed}: s={q.s:.4f} range [{q.alpha}, {q.beta}]  "
          f"neuron (V_thr, S_min, S_max) = {to_neuron_params(q)}")

q = calibrate(samples, levels=16, signed=True)
x = rng.normal(size=10)
acc, t_eq = run_to_equilibrium(StBifState.from_quantizer(x.shape, q), [x / 3] * 3, t_max=40)
print("\n   x        quantize   neuron")
for xi, qi, ai in zip(x, quantize(x, q), acc):
    print(f"{xi:+.4f}   {qi:+.4f}   {ai:+.4f}")
print(f"equilibrium after {t_eq} steps, max diff {np.max(np.abs(acc - quantize(x, q))):.1e}")

print("\ntie handling:", quantize(np.array([0.5, 1.5, -0.5, -1.5]), QuantizerSpec(1.0, -4, 4, True)))
