"""Counting spikes and turning them into a power estimate.

Run:  python3 demos/06_spikes_and_power.py

Every neuron spike is a post-synaptic event.  Each spike entering a matrix
product also reaches several downstream accumulators, and those deliveries are
the pre-synaptic events.  Power is events per second times energy per event.
"""

from snnconvert import (AnnModel, EncoderConfig, complexity_report, convert, estimate_power,
                        forward_snn, quantize_model, spike_report)
from snnconvert.manifest import generate_inputs, generate_weights

config = EncoderConfig(n=8, d=16, heads=2, d_ff=64, layers=2, levels=16, classes=10)
ann = AnnModel(config, generate_weights(config, seed=3))
snn = convert(quantize_model(ann, list(generate_inputs(config, 16, seed=100))))

run = forward_snn(snn, generate_inputs(config, 1, seed=400)[0])
report = spike_report(run.log)
print(f"T_eq={run.t_eq}: {report['post']} neuron spikes, {report['pre']} synaptic deliveries")
for row in report["per_step"]:
    print(f"  t={row['t']:2d}  post={row['post']:5d}  pre={row['pre']:7d}")
print(f"mean-step power {report['power']['power_watts']:.3e} W")
print(f"1e6 events per 1 ms step at 0.9 pJ: {estimate_power(1e6, 0.9e-12).power_watts} W")

print("\noperator cost table at T=T_eq:")
for row in complexity_report(config, run.t_eq)["rows"]:
    print(f"  {row['network']:5s} {row['operator']:11s} spatial={row['spatial']:6} temporal={row['temporal']:8}")
