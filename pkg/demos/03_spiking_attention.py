"""Spiking matrix products and differential softmax/layernorm.

Run:  python3 demos/03_spiking_attention.py

Query and key spike trains are multiplied step by step using running sums of
both operands.  The per-step outputs add up to the product of the summed
operands.  Softmax and layernorm emit the change of their output each step,
so their time-sum equals the function of the summed input.
"""

import numpy as np

from snnconvert import AaState, aa_step, diff_step, spike_layernorm, spike_softmax
from snnconvert.tensor import layernorm, softmax

rng = np.random.default_rng(1)
n, d, steps = 4, 6, 10
q_spikes = [0.25 * rng.integers(-1, 2, size=(n, d)) for _ in range(steps)]
k_spikes = [0.40 * rng.integers(-1, 2, size=(n, d)) for _ in range(steps)]

state = AaState((n, d), (n, d))
partial = np.zeros((n, n))
dense = sum(q_spikes) @ sum(k_spikes).T
for t, (q, k) in enumerate(zip(q_spikes, k_spikes), 1):
    partial += aa_step(state, q, k)
    print(f"t={t:2d}  |sum - dense(summed so far)| = "
          f"{np.max(np.abs(partial - sum(q_spikes[:t]) @ sum(k_spikes[:t]).T)):.1e}")
print(f"final error vs dense scores {np.max(np.abs(partial - dense)):.1e}")

scores = [rng.normal(size=(n, n)) for _ in range(steps)]
soft = spike_softmax((n, n))
out = sum(diff_step(soft, s) for s in scores)
print(f"\nspike-softmax error {np.max(np.abs(out - softmax(sum(scores)))):.1e}")
gamma, beta = np.ones(d), np.zeros(d)
ln = spike_layernorm((n, d), gamma, beta)
xs = [rng.normal(size=(n, d)) for _ in range(steps)]
out = sum(diff_step(ln, x) for x in xs)
print(f"spike-layernorm error {np.max(np.abs(out - layernorm(sum(xs), gamma, beta))):.1e}")
