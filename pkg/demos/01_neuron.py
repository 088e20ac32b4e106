"""A bipolar integrate-and-fire neuron with a spike tracer.

Run:  python3 demos/01_neuron.py

One neuron with threshold 1 and tracer range [0, 3] receives its input split
over a few steps.  After the input stops it keeps firing (or retracting with
negative spikes) until its accumulated output equals a clipped floor of the
total input.
"""

import numpy as np

from snnconvert import StBifState, closed_form, run_to_equilibrium

for inputs in ([0.7, 0.7], [1.2, -1.5], [10.0], [2.6, -0.4, 0.1]):
    neuron = StBifState((1,), v_thr=1.0, s_min=0, s_max=3, v0=0.0)
    thetas = []
    for t in range(8):
        thetas.append(int(neuron.step([inputs[t] if t < len(inputs) else 0.0])[0]))
    acc, t_eq = run_to_equilibrium(StBifState((1,), 1.0, 0, 3, 0.0), inputs, t_max=20)
    print(f"inputs {inputs}: spikes {thetas}  ->  output {acc[0]:g} at t_eq={t_eq}, "
          f"closed form {closed_form(sum(inputs), 1.0, 0, 3, v0=0.0):g}")

# with v0 = v_thr/2 the same neuron rounds instead of flooring
x = np.linspace(-1.2, 3.7, 8)
neuron = StBifState(x.shape, v_thr=1.0, s_min=-2, s_max=3)
acc, _ = run_to_equilibrium(neuron, [x], t_max=20)
print("\nhalf-threshold start:")
for xi, a in zip(x, acc):
    print(f"  {xi:+.3f} -> {a:+g}")
