"""Link impairments for the coherent fronthaul simulator.

Single polarization.  The impairment order is fixed and mirrors the
transceiver chain: transmitter Bessel filter, then laser/LO phase noise and
frequency offset, then receiver-referred additive noise, then the receiver
Bessel filter.  Every impairment with its parameter at zero is the identity,
and all randomness flows from explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import besselap

from .modem import Waveform

__all__ = [
    "ChannelConfig",
    "awgn",
    "bessel_lpf",
    "phase_noise",
    "freq_offset",
    "rop_to_snr",
    "apply_channel",
]

ELEMENTARY_CHARGE = 1.602e-19  # C


@dataclass(frozen=True)
class ChannelConfig:
    """Coherent link budget and impairment parameters.

    ``snr_awgn_db`` drives the additive noise directly; set it to None to
    derive the SNR from ``rop_dbm`` through the receiver noise budget.
    """

    snr_awgn_db: float | None = None
    rop_dbm: float | None = None
    bessel_order: int = 5
    bessel_3db: float | None = 14e9
    linewidth_tx: float = 100e3
    linewidth_lo: float = 100e3
    freq_offset_hz: float = 80e6
    lo_power_dbm: float = 12.0
    thermal_psd: float = 14e-12  # A / sqrt(Hz)
    responsivity: float = 1.0  # A / W
    seed: int = 0

    def __post_init__(self):
        if self.bessel_3db is not None and self.bessel_3db <= 0:
            raise ValueError("bessel_3db must be positive")
        if self.linewidth_tx < 0 or self.linewidth_lo < 0:
            raise ValueError("linewidths must be non-negative")
        if self.thermal_psd < 0:
            raise ValueError("thermal noise PSD must be non-negative")
        if self.snr_awgn_db is None and self.rop_dbm is None:
            raise ValueError("either snr_awgn_db or rop_dbm must be given")

    @property
    def combined_linewidth(self) -> float:
        return self.linewidth_tx + self.linewidth_lo


def awgn(wave: Waveform, snr_db: float, seed, signal_power: float | None = None) -> Waveform:
    """Add circularly-symmetric complex Gaussian noise at the given SNR.

    The SNR is the ratio of ``signal_power`` (measured over the buffer when
    not given) to the total added noise power, so the measured output SNR
    equals the request.  Deterministic per seed.
    """
    if not math.isfinite(snr_db):
        if snr_db > 0:
            return wave.replace(wave.samples.copy())
        raise ValueError("snr must be finite or +inf")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p_sig = wave.power() if signal_power is None else float(signal_power)
    sigma2 = p_sig / 10.0 ** (snr_db / 10.0)
    n = wave.samples.size
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return wave.replace(wave.samples + np.sqrt(sigma2 / 2.0) * noise)


def _bessel_response(freqs: np.ndarray, order: int, f_3db: float) -> np.ndarray:
    """Analog Bessel-Thomson transfer function on a frequency grid.

    Magnitude-normalized prototype evaluated at s = j f / f_3db, so
    |H(0)| = 1 and |H(f_3db)|^2 = 1/2 with no bilinear warping.
    """
    z, p, k = besselap(order, norm="mag")
    s = 1j * freqs / f_3db
    h = np.full(s.shape, k, dtype=np.complex128)
    for pole in p:
        h /= (s - pole)
    for zero in z:
        h *= (s - zero)
    return h


def bessel_lpf(wave: Waveform, order: int, f_3db: float) -> Waveform:
    """Apply the exact analog Bessel low-pass prototype in the frequency domain."""
    if f_3db >= 0.45 * wave.sample_rate:
        raise ValueError("bessel_3db too close to Nyquist for a faithful response")
    freqs = np.fft.fftfreq(wave.samples.size, d=1.0 / wave.sample_rate)
    h = _bessel_response(freqs, order, f_3db)
    out = np.fft.ifft(np.fft.fft(wave.samples) * h)
    return wave.replace(out)


def phase_noise(wave: Waveform, combined_linewidth: float, seed) -> Waveform:
    """Multiply by exp(j phi) with phi a Wiener process.

    Per-sample increment variance is 2*pi*linewidth/sample_rate, the standard
    Lorentzian laser model for the summed transmitter and LO linewidths.
    """
    if combined_linewidth < 0:
        raise ValueError("linewidth must be non-negative")
    if combined_linewidth == 0:
        return wave.replace(wave.samples.copy())
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    var = 2.0 * np.pi * combined_linewidth / wave.sample_rate
    phi = np.cumsum(rng.standard_normal(wave.samples.size) * np.sqrt(var))
    return wave.replace(wave.samples * np.exp(1j * phi))


def freq_offset(wave: Waveform, delta_f: float) -> Waveform:
    """Shift the spectrum by delta_f (carrier/LO frequency mismatch)."""
    if abs(delta_f) >= wave.sample_rate / 2:
        raise ValueError("frequency offset beyond Nyquist")
    if delta_f == 0:
        return wave.replace(wave.samples.copy())
    n = np.arange(wave.samples.size)
    return wave.replace(wave.samples * np.exp(2j * np.pi * delta_f * n / wave.sample_rate))


def rop_to_snr(cfg: ChannelConfig, signal_bandwidth: float) -> float:
    """Electrical SNR (dB) from received optical power, simplified budget.

    Signal photocurrent power scales as 2 R^2 P_lo P_rop; the noise current
    PSD is thermal_psd^2 plus the shot term 2 q R P_lo.  Thermal-dominated
    operation is linear in P_rop; shot-limited operation is independent of
    the LO power.  Absolute calibration intentionally carries unit
    responsivity, so only the shape of ROP sweeps is meaningful.
    """
    if cfg.rop_dbm is None:
        raise ValueError("rop_dbm not set")
    if signal_bandwidth <= 0:
        raise ValueError("signal bandwidth must be positive")
    p_rop = 1e-3 * 10.0 ** (cfg.rop_dbm / 10.0)
    p_lo = 1e-3 * 10.0 ** (cfg.lo_power_dbm / 10.0)
    if p_rop <= 0 or p_lo <= 0:
        raise ValueError("optical powers must be positive")
    r = cfg.responsivity
    signal = 2.0 * r * r * p_lo * p_rop
    noise_psd = cfg.thermal_psd ** 2 + 2.0 * ELEMENTARY_CHARGE * r * p_lo
    return 10.0 * math.log10(signal / (noise_psd * signal_bandwidth))


def channel_snr_db(cfg: ChannelConfig, reference_bandwidth: float) -> float:
    """Channel SNR over the aggregate symbol-rate bandwidth for this config."""
    if cfg.snr_awgn_db is not None:
        return float(cfg.snr_awgn_db)
    return rop_to_snr(cfg, reference_bandwidth)


def apply_channel(wave: Waveform, cfg: ChannelConfig, *, snr_full_band_db: float,
                  seed, noise_ref_power: float | None = None) -> Waveform:
    """Run the fixed impairment chain on a transmit waveform.

    Order: Tx Bessel -> phase noise -> frequency offset -> AWGN -> Rx Bessel.
    ``snr_full_band_db`` is the AWGN level over the full sampled band (the
    caller owns the bandwidth convention); ``noise_ref_power`` pins the
    signal power the SNR refers to (e.g. the pilot-free data power after the
    transmit filter), defaulting to the waveform power at the noise insertion
    point.  ``seed`` spawns independent streams for the phase noise and the
    additive noise.
    """
    ss = np.random.SeedSequence(seed)
    rng_pn, rng_awgn = [np.random.default_rng(s) for s in ss.spawn(2)]
    out = wave
    if cfg.bessel_3db is not None:
        out = bessel_lpf(out, cfg.bessel_order, cfg.bessel_3db)
    out = phase_noise(out, cfg.combined_linewidth, rng_pn)
    out = freq_offset(out, cfg.freq_offset_hz)
    out = awgn(out, snr_full_band_db, rng_awgn, signal_power=noise_ref_power)
    if cfg.bessel_3db is not None:
        out = bessel_lpf(out, cfg.bessel_order, cfg.bessel_3db)
    return out
