"""Lossless conversion of quantized transformer encoders to spiking networks."""

from .metrics import (DEFAULT_ALPHA, PowerReport, SpikeActivityLog, Synapse, complexity_report,
                      count_post, count_pre, estimate_power, spike_report, total_spikes)
from .neuron import NonConvergenceError, StBifState, closed_form, run_to_equilibrium
from .quantization import (CalibrationError, QuantizerSpec, calibrate, from_neuron_params, quantize,
                           to_neuron_params)
from .spiking_ops import AaState, DiffOpState, aa_step, aw_step, diff_step, spike_layernorm, spike_softmax
from .transformer import (AnnModel, ConfigError, EncoderConfig, NeuronParams, QannModel, SnnModel,
                          SnnRun, convert, forward_ann, forward_qann, forward_snn, quantize_model,
                          site_names, sweep_timesteps)

__version__ = "0.1.0"
