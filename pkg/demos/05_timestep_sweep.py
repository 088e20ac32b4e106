"""How accuracy builds up over time steps.

Run:  python3 demos/05_timestep_sweep.py

Reading the head early gives a partial answer.  Agreement with the quantized
network climbs with the number of simulated steps and is exact once every
input has reached equilibrium.
"""

from snnconvert import AnnModel, EncoderConfig, convert, forward_snn, quantize_model, sweep_timesteps
from snnconvert.manifest import generate_inputs, generate_weights

config = EncoderConfig(n=8, d=16, heads=2, d_ff=64, layers=2, levels=16, classes=10)
ann = AnnModel(config, generate_weights(config, seed=3))
qann = quantize_model(ann, list(generate_inputs(config, 16, seed=100)))
snn = convert(qann)

inputs = list(generate_inputs(config, 100, seed=300))
runs = [forward_snn(snn, x) for x in inputs]
t_eq = max(r.t_eq for r in runs)
rows = sweep_timesteps(qann, snn, inputs, list(range(1, t_eq + 3)), runs=runs)
print(f"latest equilibrium: T={t_eq}\n")
print("   T  agreement  max|err|")
for row in rows:
    bar = "#" * int(40 * row["agreement"])
    print(f"{row['T']:4d}  {row['agreement']:9.2f}  {row['max_abs_err']:8.2e}  {bar}")
