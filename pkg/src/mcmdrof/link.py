"""End-to-end waveform link: codec + modem + channel + receiver DSP.

Two systems share the machinery: the multicarrier system maps each branch's
priority bit groups onto three 16-QAM subcarriers per spectral half, while
the single-carrier baseline streams the multiplexed I/Q codewords through
one full-rate 16-QAM carrier with the same fixed bit-position-to-rail
mapping (so both systems coincide in a flat AWGN channel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import codec, modem, rxdsp
from .channel import ChannelConfig, apply_channel, bessel_lpf, channel_snr_db
from .codec import CodewordFrame, IqBlock, SubcarrierPlan
from .modem import PilotSpec, Waveform
from .rxdsp import RxConfig

__all__ = [
    "ModemParams",
    "LinkResult",
    "generate_payload",
    "run_link",
]

INTERLEAVE_DEPTH = 64  # symbol groups per interleaver column
QAM_BITS = 4


@dataclass(frozen=True)
class ModemParams:
    """Line-side parameters shared by both systems."""

    total_baud: float = 30e9
    beta: float = 0.1
    rrc_span: int = 64
    osf_mcm: int = 8
    osf_sc: int = 2

    def r_sub(self, n_sub: int) -> float:
        return self.total_baud / (2 * n_sub)

    def sample_rate_mcm(self, n_sub: int) -> float:
        return self.osf_mcm * self.r_sub(n_sub)

    @property
    def sample_rate_sc(self) -> float:
        return self.osf_sc * self.total_baud

    def sc_pilot_slot(self, guard: float) -> float:
        """Out-of-band slot above the single-carrier RRC edge."""
        return (1.0 + self.beta) * self.total_baud / 2.0 + guard


@dataclass
class LinkResult:
    original: IqBlock
    recovered: IqBlock
    errors_per_bit: np.ndarray  # index m = 0 (LSB) .. L-1 (sign), both branches pooled
    bits_per_position: int
    snr_sub_measured_db: np.ndarray
    foc_estimate_hz: float | None
    extras: dict = field(default_factory=dict)

    @property
    def ber_per_bit(self) -> np.ndarray:
        return self.errors_per_bit / self.bits_per_position


def generate_payload(rng: np.random.Generator, n_samples: int,
                     rms: float = 0.253, peak: float = 1.0) -> IqBlock:
    """Seeded clipped-Gaussian I/Q payload with the default PAPR model."""
    x = rng.normal(0.0, rms * peak, n_samples) + 1j * rng.normal(0.0, rms * peak, n_samples)
    x = np.clip(x.real, -peak, peak) + 1j * np.clip(x.imag, -peak, peak)
    return IqBlock(x, peak)


def _training_symbols(seed: int, branch_idx: int, rank: int, n: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0x7E57, branch_idx, rank])
    bits = rng.integers(0, 2, n * QAM_BITS, dtype=np.uint8)
    return modem.qam16_map(bits)


def _scramble_seed(seed: int, branch_idx: int) -> int:
    return ((seed * 2 + branch_idx + 1) & 0x7FFFFF) or 1


def _gain_align(symbols: np.ndarray, train_ref: np.ndarray, n_train: int) -> np.ndarray:
    """Remove the complex gain left by the receiver using the training prefix."""
    y = symbols[:n_train]
    alpha = np.vdot(train_ref, y) / np.vdot(train_ref, train_ref)
    return symbols / alpha


def _count_errors(rx_frame: CodewordFrame, tx_frame: CodewordFrame) -> np.ndarray:
    """Bit error counts per codeword index m (LSB first)."""
    diff = rx_frame.bits != tx_frame.bits
    return diff.sum(axis=0)[::-1].astype(np.int64)


def _resolve_stage(flag: str, needed: bool) -> bool:
    if flag == "auto":
        return needed
    return flag == "on"


def run_link(block: IqBlock, *, system: str, plan: SubcarrierPlan,
             channel_cfg: ChannelConfig, rx_cfg: RxConfig,
             pilot: PilotSpec | None = None, params: ModemParams | None = None,
             seed: int = 0, bits_per_sample: int = 12,
             foc: str = "auto", cpr: str = "auto", eq: str = "auto",
             capture: dict | None = None) -> LinkResult:
    """Run one waveform trial through the full transmit/receive chain.

    ``foc``, ``cpr`` and ``eq`` are "auto" | "on" | "off"; in auto mode each
    stage runs only when the channel config gives it something to correct
    (offset, phase noise, or band limitation respectively).
    """
    params = params or ModemParams()
    pilot = pilot or PilotSpec()
    if system == "MCM":
        return _run_mcm(block, plan, channel_cfg, rx_cfg, pilot, params, seed,
                        bits_per_sample, foc, cpr, eq, capture)
    if system == "SC":
        return _run_sc(block, plan, channel_cfg, rx_cfg, pilot, params, seed,
                       bits_per_sample, foc, cpr, eq, capture)
    raise ValueError(f"unknown system {system!r}")


def _push_through_channel(data_wave: Waveform, pilot: PilotSpec,
                          channel_cfg: ChannelConfig, params: ModemParams,
                          seed: int, capture: dict | None = None):
    """Add the pilot, run the impairment chain, return the received waveform.

    The AWGN level is referenced to the pilot-free data power at the noise
    insertion point (after the transmit filter) over the aggregate
    symbol-rate bandwidth, which keeps the per-subcarrier symbol SNRs equal
    to the power-split prediction for any factors.
    """
    fs = data_wave.sample_rate
    n = data_wave.samples.size
    pilot_power = 10.0 ** (pilot.relative_power_db / 10.0) * data_wave.meta["mean_sub_power"]
    tone = np.sqrt(pilot_power) * np.exp(2j * np.pi * pilot.freq_slot * np.arange(n) / fs)
    composite = data_wave.replace(data_wave.samples + tone)

    if channel_cfg.bessel_3db is not None:
        p_ref = bessel_lpf(data_wave, channel_cfg.bessel_order,
                           channel_cfg.bessel_3db).power()
    else:
        p_ref = data_wave.power()
    snr_ch = channel_snr_db(channel_cfg, params.total_baud)
    snr_full = snr_ch - 10.0 * math.log10(fs / params.total_baud)
    received = apply_channel(composite, channel_cfg, snr_full_band_db=snr_full,
                             seed=seed, noise_ref_power=p_ref)
    if capture is not None:
        capture["tx"] = composite
        capture["rx"] = received
    return received


def _receive_front_end(wave: Waveform, pilot: PilotSpec, rx_cfg: RxConfig,
                       channel_cfg: ChannelConfig, foc: str, cpr: str):
    """Pilot-aided FOC then CPR on the composite, per the stage flags."""
    foc_on = _resolve_stage(foc, channel_cfg.freq_offset_hz != 0.0)
    cpr_on = _resolve_stage(cpr, foc_on or channel_cfg.combined_linewidth > 0.0)
    estimate = None
    if foc_on:
        estimate = rxdsp.estimate_freq_offset(wave, pilot, rx_cfg)
        n = np.arange(wave.samples.size)
        shift = np.exp(-2j * np.pi * estimate * n / wave.sample_rate)
        wave = wave.replace(wave.samples * shift)
    if cpr_on:
        wave = rxdsp.carrier_phase_recover(wave, pilot, rx_cfg)
    return wave, estimate


def _recover_streams(wave: Waveform, plan: SubcarrierPlan, params: ModemParams,
                     rx_cfg: RxConfig, channel_cfg: ChannelConfig, eq: str,
                     n_frame: int, r_sub: float, centers, two_branch: bool,
                     trainings):
    """Demultiplex and equalize every stream; returns gain-aligned symbols."""
    eq_on = _resolve_stage(eq, channel_cfg.bessel_3db is not None)
    sps = 2 if eq_on else 1
    streams_i, streams_q = modem.demultiplex(
        wave, plan, params.beta, r_sub, n_frame, params.rrc_span,
        sps_out=sps, centers=centers, two_branch=two_branch)
    out = []
    branches = [streams_i] if streams_q is None else [streams_i, streams_q]
    for b, streams in enumerate(branches):
        for r, stream in enumerate(streams):
            train = trainings[b][r]
            if eq_on:
                syms, _ = rxdsp.equalize(stream, train, rx_cfg)
            else:
                syms = stream
            syms = _gain_align(syms, train, train.size)
            out.append((b, r, syms))
    return out


def _finish(block, frames_tx, frames_rx, recovered_samples, snr_subs, estimate,
            extras):
    err_i = _count_errors(frames_rx[0], frames_tx[0])
    err_q = _count_errors(frames_rx[1], frames_tx[1])
    recovered = IqBlock(recovered_samples, block.peak)
    return LinkResult(
        original=block, recovered=recovered,
        errors_per_bit=err_i + err_q, bits_per_position=2 * len(block),
        snr_sub_measured_db=np.asarray(snr_subs, dtype=float),
        foc_estimate_hz=estimate, extras=extras)


def _run_mcm(block, plan, channel_cfg, rx_cfg, pilot, params, seed,
             bits_per_sample, foc, cpr, eq, capture=None):
    frame_i, frame_q = codec.quantize(block, bits_per_sample)
    scrambled = [codec.scramble(f, _scramble_seed(seed, b))
                 for b, f in enumerate((frame_i, frame_q))]
    streams_i, streams_q = codec.allocate_bits(scrambled[0], scrambled[1], plan)

    n_payload_bits = len(block) * plan.bits_per_subcarrier
    n_train = rx_cfg.train_symbols
    trainings = [[_training_symbols(seed, b, r, n_train) for r in range(plan.n_sub)]
                 for b in range(2)]
    tx_payload = {}

    def to_symbols(b, streams):
        frames = []
        for r, bits in enumerate(streams):
            inter = codec.interleave_groups(bits, QAM_BITS, INTERLEAVE_DEPTH)
            syms = modem.qam16_map(inter)
            tx_payload[(b, r)] = syms
            frames.append(np.concatenate([trainings[b][r], syms]))
        return frames

    tx_i = to_symbols(0, streams_i)
    tx_q = to_symbols(1, streams_q)
    r_sub = params.r_sub(plan.n_sub)
    fs = params.sample_rate_mcm(plan.n_sub)
    data_wave = modem.multiplex(tx_i, tx_q, plan, None, params.beta, r_sub, fs,
                                params.rrc_span,
                                centers=modem.subcarrier_centers(
                                    plan, r_sub, params.beta, pilot.guard))

    rx_wave = _push_through_channel(data_wave, pilot, channel_cfg, params, seed, capture)
    rx_wave, estimate = _receive_front_end(rx_wave, pilot, rx_cfg, channel_cfg, foc, cpr)

    n_frame = len(tx_i[0])
    centers = modem.subcarrier_centers(plan, r_sub, params.beta, pilot.guard)
    recovered = _recover_streams(rx_wave, plan, params, rx_cfg, channel_cfg, eq,
                                 n_frame, r_sub, centers, True, trainings)

    rx_streams = {0: [None] * plan.n_sub, 1: [None] * plan.n_sub}
    snr_acc = np.zeros(plan.n_sub)
    for b, r, syms in recovered:
        payload = syms[n_train:]
        snr_acc[r] += -modem.measure_evm_db(payload, tx_payload[(b, r)]) / 2.0
        bits = modem.qam16_demap(payload)
        rx_streams[b][r] = codec.deinterleave_groups(
            bits, QAM_BITS, INTERLEAVE_DEPTH, length=n_payload_bits)

    frame_rx_i, frame_rx_q = codec.deallocate_bits(
        rx_streams[0], rx_streams[1], plan, block.peak)
    descrambled = [codec.descramble(f, _scramble_seed(seed, b))
                   for b, f in enumerate((frame_rx_i, frame_rx_q))]
    samples = codec.dequantize(descrambled[0]) + 1j * codec.dequantize(descrambled[1])
    return _finish(block, (frame_i, frame_q), descrambled, samples, snr_acc,
                   estimate, {"system": "MCM"})


def _run_sc(block, plan, channel_cfg, rx_cfg, pilot, params, seed,
            bits_per_sample, foc, cpr, eq, capture=None):
    frame_i, frame_q = codec.quantize(block, bits_per_sample)
    scrambled = [codec.scramble(f, _scramble_seed(seed, b))
                 for b, f in enumerate((frame_i, frame_q))]
    # one serial stream: per sample, the I codeword then the Q codeword
    bits = np.hstack([scrambled[0].bits, scrambled[1].bits]).reshape(-1)
    n_payload_bits = bits.size

    inter = codec.interleave_groups(bits, QAM_BITS, INTERLEAVE_DEPTH)
    payload_syms = modem.qam16_map(inter)
    n_train = rx_cfg.train_symbols
    train = _training_symbols(seed, 0, 0, n_train)
    frame_syms = np.concatenate([train, payload_syms])

    sc_plan = SubcarrierPlan(n_sub=1, bits_per_subcarrier=QAM_BITS,
                             power_factors=(1.0,))
    fs = params.sample_rate_sc
    sc_pilot = PilotSpec(pilot.relative_power_db,
                         params.sc_pilot_slot(pilot.guard), pilot.guard)
    data_wave = modem.multiplex([frame_syms], None, sc_plan, None, params.beta,
                                params.total_baud, fs, params.rrc_span,
                                centers=np.array([0.0]))

    rx_wave = _push_through_channel(data_wave, sc_pilot, channel_cfg, params, seed, capture)
    rx_wave, estimate = _receive_front_end(rx_wave, sc_pilot, rx_cfg, channel_cfg,
                                           foc, cpr)

    recovered = _recover_streams(rx_wave, sc_plan, params, rx_cfg, channel_cfg, eq,
                                 len(frame_syms), params.total_baud,
                                 np.array([0.0]), False, [[train]])
    _, _, syms = recovered[0]
    payload = syms[n_train:]
    snr_db = -modem.measure_evm_db(payload, payload_syms)
    rx_bits = modem.qam16_demap(payload)
    rx_bits = codec.deinterleave_groups(rx_bits, QAM_BITS, INTERLEAVE_DEPTH,
                                        length=n_payload_bits)
    per_sample = rx_bits.reshape(len(block), 2 * bits_per_sample)
    frame_rx_i = CodewordFrame(per_sample[:, :bits_per_sample], bits_per_sample,
                               "I", block.peak)
    frame_rx_q = CodewordFrame(per_sample[:, bits_per_sample:], bits_per_sample,
                               "Q", block.peak)
    descrambled = [codec.descramble(f, _scramble_seed(seed, b))
                   for b, f in enumerate((frame_rx_i, frame_rx_q))]
    samples = codec.dequantize(descrambled[0]) + 1j * codec.dequantize(descrambled[1])
    return _finish(block, (frame_i, frame_q), descrambled, samples,
                   np.full(plan.n_sub, snr_db), estimate, {"system": "SC"})
