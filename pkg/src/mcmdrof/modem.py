"""Per-subcarrier 16-QAM modem with RRC shaping and digital multiplexing.

The composite line signal places I-branch subcarriers on positive
frequencies and Q-branch subcarriers mirrored on negative frequencies,
priority rank 0 innermost, with a CW pilot tone in a guard band for
frequency-offset compensation and carrier phase recovery downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .codec import SubcarrierPlan

__all__ = [
    "Waveform",
    "PilotSpec",
    "qam16_map",
    "qam16_demap",
    "rrc_taps",
    "subcarrier_centers",
    "multiplex",
    "demultiplex",
    "measure_evm_db",
]

_SQRT10 = np.sqrt(10.0)


@dataclass(frozen=True)
class Waveform:
    """Complex line-rate sample buffer with sample-rate metadata."""

    samples: np.ndarray
    sample_rate: float
    center: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("Waveform needs a non-empty 1-D sample vector")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return self.samples.size

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def replace(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate, self.center, dict(self.meta))


@dataclass(frozen=True)
class PilotSpec:
    """Pilot tone placement: power relative to the mean subcarrier power,
    frequency slot, and the guard band kept clear of subcarrier skirts."""

    relative_power_db: float = 10.0
    freq_slot: float = 0.0
    guard: float = 1.0e9

    def __post_init__(self):
        if self.guard <= 0:
            raise ValueError("guard must be positive")


def qam16_map(bits: np.ndarray) -> np.ndarray:
    """Gray-coded 16-QAM, unit mean symbol energy.

    Consumes 4 bits per symbol in the order (I-sign, Q-sign, I-inner,
    Q-inner): per rail the Gray pair (sign, inner) maps 00,01,11,10 to
    -3,-1,+1,+3 before the 1/sqrt(10) scaling.  The two sign positions are
    the better-protected (MSB-class) bit slots.
    """
    bits = np.asarray(bits)
    if bits.size % 4:
        raise ValueError("bit count must be divisible by 4")
    b = bits.reshape(-1, 4).astype(np.float64)
    lev_i = (2.0 * b[:, 0] - 1.0) * (3.0 - 2.0 * b[:, 2])
    lev_q = (2.0 * b[:, 1] - 1.0) * (3.0 - 2.0 * b[:, 3])
    return (lev_i + 1j * lev_q) / _SQRT10


def qam16_demap(symbols: np.ndarray) -> np.ndarray:
    """Minimum-distance hard decision, inverse bit order of :func:`qam16_map`."""
    s = np.asarray(symbols) * _SQRT10
    bits = np.empty((s.size, 4), dtype=np.uint8)
    bits[:, 0] = s.real > 0
    bits[:, 1] = s.imag > 0
    bits[:, 2] = np.abs(s.real) < 2
    bits[:, 3] = np.abs(s.imag) < 2
    return bits.reshape(-1)


def rrc_taps(beta: float, sps: int, span: int = 64) -> np.ndarray:
    """Root-raised-cosine taps, unit energy, odd length span*sps + 1."""
    if not 0 < beta < 1:
        raise ValueError("roll-off must be in (0, 1)")
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps
    h = np.empty(t.size)
    mid = t == 0
    spec = np.abs(np.abs(t) - 1.0 / (4.0 * beta)) < 1e-12
    rest = ~(mid | spec)
    h[mid] = 1.0 + beta * (4.0 / np.pi - 1.0)
    h[spec] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta)))
    tr = t[rest]
    num = np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    den = np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2)
    h[rest] = num / den
    return h / np.sqrt(np.sum(h ** 2))


def subcarrier_centers(plan: SubcarrierPlan, r_sub: float, beta: float,
                       guard: float) -> np.ndarray:
    """Center frequency per priority rank on the positive half (I branch).

    Slots are contiguous bands of width (1 + beta) * r_sub starting above the
    pilot guard; the plan's placement permutation maps rank to slot, rank 0
    innermost by default.  The Q branch mirror is the negation.
    """
    width = (1.0 + beta) * r_sub
    return np.array([guard + (plan.placement[r] + 0.5) * width
                     for r in range(plan.n_sub)])


def _shaped_subcarrier(symbols, taps, osf, freq, sample_rate, n_out):
    up = np.zeros(len(symbols) * osf, dtype=np.complex128)
    up[::osf] = symbols
    x = fftconvolve(up, taps)
    if x.size < n_out:
        x = np.pad(x, (0, n_out - x.size))
    x = x[:n_out]
    if freq:
        x = x * np.exp(2j * np.pi * freq * np.arange(n_out) / sample_rate)
    return x


def multiplex(streams_i, streams_q, plan: SubcarrierPlan, pilot: PilotSpec | None,
              beta: float, r_sub: float, sample_rate: float,
              rrc_span: int = 64, centers: np.ndarray | None = None) -> Waveform:
    """Shape, scale, and frequency-shift symbol streams into one composite.

    Each stream is RRC-filtered at roll-off ``beta``, scaled by
    sqrt(n_sub * p_i / sum p) so the composite mean power is independent of
    the power factors, and shifted to its spectral slot.  ``streams_q`` may
    be None for a single-branch (e.g. single-carrier) signal; ``centers``
    overrides the default symmetric slot layout.
    """
    osf = sample_rate / r_sub
    if abs(osf - round(osf)) > 1e-9 or round(osf) < 2:
        raise ValueError("sample_rate must be an integer multiple (>= 2) of the symbol rate")
    osf = int(round(osf))
    if centers is None:
        guard = pilot.guard if pilot is not None else 0.0
        centers = subcarrier_centers(plan, r_sub, beta, guard)
    centers = np.asarray(centers, dtype=float)
    edge = np.max(np.abs(centers)) + (1.0 + beta) * r_sub / 2.0
    if edge >= sample_rate / 2.0:
        raise ValueError("spectral overflow: subcarrier slots exceed Nyquist")

    lengths = {len(s) for s in streams_i} | ({len(s) for s in streams_q} if streams_q else set())
    if len(lengths) != 1:
        raise ValueError("all symbol streams must have equal length")
    n_sym = lengths.pop()
    taps = rrc_taps(beta, osf, rrc_span)
    n_out = n_sym * osf + taps.size - 1

    scales = plan.power_scales
    total = np.zeros(n_out, dtype=np.complex128)
    sub_powers = []
    branches = [(streams_i, 1.0)]
    if streams_q is not None:
        branches.append((streams_q, -1.0))
    for streams, sign in branches:
        if len(streams) != plan.n_sub:
            raise ValueError("stream count does not match the plan")
        for rank, syms in enumerate(streams):
            x = scales[rank] * _shaped_subcarrier(np.asarray(syms, dtype=np.complex128),
                                                  taps, osf, sign * centers[rank],
                                                  sample_rate, n_out)
            sub_powers.append(float(np.mean(np.abs(x) ** 2)))
            total += x
    data_power = float(np.mean(np.abs(total) ** 2))

    pilot_power = 0.0
    if pilot is not None:
        pilot_power = 10.0 ** (pilot.relative_power_db / 10.0) * float(np.mean(sub_powers))
        tone = np.sqrt(pilot_power) * np.exp(
            2j * np.pi * pilot.freq_slot * np.arange(n_out) / sample_rate)
        total += tone

    meta = {"n_symbols": n_sym, "osf": osf, "rrc_span": rrc_span,
            "data_power": data_power, "pilot_power": pilot_power,
            "mean_sub_power": float(np.mean(sub_powers)),
            "centers": centers.tolist()}
    return Waveform(total, sample_rate, 0.0, meta)


def demultiplex(wave: Waveform, plan: SubcarrierPlan, beta: float, r_sub: float,
                n_symbols: int, rrc_span: int = 64, sps_out: int = 1,
                centers: np.ndarray | None = None, two_branch: bool = True,
                guard: float = 0.0):
    """Down-shift, matched-filter, and decimate each subcarrier.

    Ideal shared-clock timing: with the transmit convention of
    :func:`multiplex`, symbol k of every stream sits at sample
    k * osf + span * osf after the matched filter.  Returns per-branch lists
    of symbol streams at ``sps_out`` samples per symbol (1 or 2).
    """
    osf = int(round(wave.sample_rate / r_sub))
    if sps_out not in (1, 2) or osf % sps_out:
        raise ValueError("sps_out must be 1 or 2 and divide the oversampling factor")
    if centers is None:
        centers = subcarrier_centers(plan, r_sub, beta, guard)
    centers = np.asarray(centers, dtype=float)
    taps = rrc_taps(beta, osf, rrc_span)
    base = rrc_span * osf
    n = np.arange(wave.samples.size)
    step = osf // sps_out

    def one(freq):
        y = wave.samples * np.exp(-2j * np.pi * freq * n / wave.sample_rate)
        z = fftconvolve(y, taps)
        need = base + (n_symbols - 1) * osf + (sps_out - 1) * step + 1
        if z.size < need:
            z = np.pad(z, (0, need - z.size))
        return z[base:base + n_symbols * osf:step][:n_symbols * sps_out]

    streams_i = [one(centers[r]) for r in range(plan.n_sub)]
    if not two_branch:
        return streams_i, None
    streams_q = [one(-centers[r]) for r in range(plan.n_sub)]
    return streams_i, streams_q


def measure_evm_db(received: np.ndarray, reference: np.ndarray) -> float:
    """EVM in dB after least-squares complex gain alignment to the reference."""
    received = np.asarray(received)
    reference = np.asarray(reference)
    alpha = np.vdot(received, reference) / np.vdot(received, received)
    err = alpha * received - reference
    return 10.0 * np.log10(np.mean(np.abs(err) ** 2) / np.mean(np.abs(reference) ** 2))
