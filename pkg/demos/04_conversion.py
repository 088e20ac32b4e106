"""Float encoder -> quantized encoder -> spiking encoder.

Run:  python3 demos/04_conversion.py

A random two-layer encoder is calibrated on a handful of inputs, converted,
and evaluated on fresh inputs.  The spiking network's equilibrium logits
reproduce the quantized network's logits.
"""

import numpy as np

from snnconvert import (AnnModel, EncoderConfig, convert, forward_ann, forward_qann, forward_snn,
                        quantize_model)
from snnconvert.manifest import generate_inputs, generate_weights

config = EncoderConfig(n=8, d=16, heads=2, d_ff=64, layers=2, levels=16, classes=10)
ann = AnnModel(config, generate_weights(config, seed=3))
qann = quantize_model(ann, list(generate_inputs(config, 16, seed=100)))
snn = convert(qann)

print(f"{len(snn.neurons)} neuron layers, e.g. embed: {snn.neurons['embed']}")
print("\ninput  argmax(ANN/QANN/SNN)  |QANN-ANN|  |SNN-QANN|  T_eq")
for i, x in enumerate(generate_inputs(config, 8, seed=200)):
    a, q = forward_ann(ann, x), forward_qann(qann, x)
    run = forward_snn(snn, x)
    print(f"{i:5d}  {np.argmax(a):4d}{np.argmax(q):5d}{np.argmax(run.logits):5d}"
          f"      {np.max(np.abs(q - a)):.2e}   {np.max(np.abs(run.logits - q)):.1e}  {run.t_eq:4d}")
