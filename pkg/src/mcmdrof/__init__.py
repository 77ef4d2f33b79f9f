"""Multicarrier digital radio-over-fibre fronthaul simulator.

Unequal bit protection for quantized wireless samples via priority bit
allocation and power allocation across 16-QAM digital subcarriers, with an
analytic AWGN theory engine and a waveform-level coherent link simulator.
"""

from .codec import (CodewordFrame, IqBlock, SubcarrierPlan, allocate_bits,
                    deallocate_bits, deinterleave, dequantize, descramble,
                    interleave, quantize, scramble)
from .channel import ChannelConfig, awgn, bessel_lpf, freq_offset, phase_noise, rop_to_snr
from .harness import (ConfigError, ExperimentConfig, RunResult, compare_sc_mcm,
                      measure_recovered_snr, read_waveform, run_experiment,
                      theory_sweep_results, write_csv, write_waveform)
from .link import LinkResult, ModemParams, generate_payload, run_link
from .modem import PilotSpec, Waveform, demultiplex, multiplex, qam16_demap, qam16_map
from .rxdsp import (EqualizerDivergedError, PilotLostError, RxConfig,
                    carrier_phase_recover, equalize, estimate_freq_offset)
from .theory import (SignalModel, TheoryReport, WeightTable, ber_16qam_per_bit,
                     error_noise, optimize_power, q_function, recovered_snr,
                     subcarrier_snrs, sweep_channel_snr, weight_table)

__version__ = "0.1.0"
