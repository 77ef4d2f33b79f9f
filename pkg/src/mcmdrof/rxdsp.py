"""Pilot-aided receiver DSP: frequency offset estimation, carrier phase
recovery, and per-subcarrier LMS equalization.

FOC and CPR operate on the composite waveform through the pilot tone only,
so their accuracy is independent of which subcarrier carries which priority.
Equalizers are per-subcarrier, fractionally spaced at 2 samples per symbol,
trained on a known prefix and frozen for the payload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import PilotSpec, Waveform

__all__ = [
    "RxConfig",
    "PilotLostError",
    "EqualizerDivergedError",
    "estimate_freq_offset",
    "carrier_phase_recover",
    "equalize",
]


class PilotLostError(RuntimeError):
    """No pilot peak above the detection threshold."""


class EqualizerDivergedError(RuntimeError):
    """LMS training MSE grew instead of converging."""


@dataclass(frozen=True)
class RxConfig:
    """Receiver DSP parameters.

    ``cpr_bandwidth`` is the full width of the pilot extraction filter; it
    must stay inside the pilot guard band.  A 200 kHz combined linewidth
    needs several hundred MHz of extraction bandwidth to push the untracked
    Wiener phase residual below 1e-3 rad^2, hence the default.
    """

    foc_fft_size: int = 1 << 16
    cpr_bandwidth: float = 800e6
    eq_taps: int = 31
    eq_step: float = 1e-3
    train_symbols: int = 4096
    pilot_threshold_db: float = 13.0

    def __post_init__(self):
        if self.eq_taps % 2 == 0 or self.eq_taps < 1:
            raise ValueError("eq_taps must be odd")
        if not 0 <= self.eq_step < 1:
            raise ValueError("eq_step must be in [0, 1)")
        if self.cpr_bandwidth <= 0 or self.foc_fft_size < 16:
            raise ValueError("bad cpr_bandwidth or foc_fft_size")


def _pilot_peak(wave: Waveform, pilot: PilotSpec, fft_size: int, threshold_db: float):
    """Locate the pilot line near its nominal slot; raise if buried."""
    n = min(fft_size, wave.samples.size)
    spec = np.abs(np.fft.fft(wave.samples[:n])) ** 2
    freqs = np.fft.fftfreq(n, d=1.0 / wave.sample_rate)
    window = np.abs(freqs - pilot.freq_slot) <= pilot.guard / 2.0
    if not np.any(window):
        raise PilotLostError("pilot search window is empty")
    idx = np.flatnonzero(window)
    sub = spec[idx]
    k = int(np.argmax(sub))
    floor = np.median(sub) + 1e-300
    if 10.0 * np.log10(sub[k] / floor) < threshold_db:
        raise PilotLostError("pilot lost: no peak above threshold near the pilot slot")
    # parabolic interpolation on log power refines the coarse bin
    i = idx[k]
    df = freqs[1] - freqs[0]
    if 0 < k < sub.size - 1:
        a, b, c = np.log(sub[k - 1] + 1e-300), np.log(sub[k]), np.log(sub[k + 1] + 1e-300)
        denom = a - 2.0 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        return freqs[i] + np.clip(shift, -0.5, 0.5) * df
    return freqs[i]


def _extract_tone(samples: np.ndarray, sample_rate: float, f_center: float,
                  half_bw: float) -> np.ndarray:
    """Brick-wall bandpass around f_center, returned still at f_center."""
    spec = np.fft.fft(samples)
    freqs = np.fft.fftfreq(samples.size, d=1.0 / sample_rate)
    delta = (freqs - f_center + sample_rate / 2.0) % sample_rate - sample_rate / 2.0
    spec[np.abs(delta) > half_bw] = 0.0
    return np.fft.ifft(spec)


def estimate_freq_offset(wave: Waveform, pilot: PilotSpec, cfg: RxConfig) -> float:
    """Estimate the carrier frequency offset from the pilot tone.

    Coarse stage: FFT peak near the expected pilot slot with parabolic
    interpolation.  Fine stage: least-squares slope of the unwrapped phase of
    the extracted pilot, decimated to keep the fit cheap.  Residual error is
    well under 1 MHz at link SNRs of 10 dB and above.
    """
    coarse = _pilot_peak(wave, pilot, cfg.foc_fft_size, cfg.pilot_threshold_db)
    tone = _extract_tone(wave.samples, wave.sample_rate, coarse, 25e6)
    step = max(1, int(wave.sample_rate // 100e6))
    dec = tone[::step] * np.exp(-2j * np.pi * coarse * np.arange(0, tone.size, step)
                                / wave.sample_rate)
    phase = np.unwrap(np.angle(dec))
    t = np.arange(phase.size) * step / wave.sample_rate
    slope = np.polyfit(t, phase, 1)[0]
    return float(coarse + slope / (2.0 * np.pi) - pilot.freq_slot)


def carrier_phase_recover(wave: Waveform, pilot: PilotSpec, cfg: RxConfig) -> Waveform:
    """Derotate the composite by the pilot's instantaneous phase.

    Assumes the frequency offset is already compensated to within the CPR
    bandwidth.  The pilot is isolated with a brick-wall filter of full width
    ``cfg.cpr_bandwidth`` around its slot; its angle tracks the common laser
    phase (and any residual offset), which is then removed from the whole
    waveform.  The derotated pilot collapses to a DC line in its guard band
    and is rejected later by the matched filters.
    """
    _pilot_peak(wave, pilot, cfg.foc_fft_size, cfg.pilot_threshold_db)
    tone = _extract_tone(wave.samples, wave.sample_rate, pilot.freq_slot,
                         cfg.cpr_bandwidth / 2.0)
    n = np.arange(wave.samples.size)
    tone = tone * np.exp(-2j * np.pi * pilot.freq_slot * n / wave.sample_rate)
    theta = np.angle(tone)
    return wave.replace(wave.samples * np.exp(-1j * theta))


def equalize(stream_2sps: np.ndarray, training: np.ndarray, cfg: RxConfig):
    """Fractionally spaced feed-forward LMS equalizer, train-then-freeze.

    ``stream_2sps`` holds the frame at 2 samples per symbol with symbol k at
    index 2k; ``training`` are the known leading symbols.  Taps adapt by LMS
    over the training prefix, are frozen, and then filter the whole frame.
    Returns (symbols_1sps, diagnostics).  Raises
    :class:`EqualizerDivergedError` when the training MSE grows by more than
    10x between the first and last quarter of the prefix.
    """
    x = np.asarray(stream_2sps, dtype=np.complex128)
    d = np.asarray(training, dtype=np.complex128)
    taps = cfg.eq_taps
    half = taps // 2
    n_sym = x.size // 2
    if d.size > n_sym:
        raise ValueError("training longer than the frame")
    scale = np.sqrt(np.mean(np.abs(x) ** 2)) or 1.0
    x = x / scale
    xp = np.pad(x, (half, half))
    w = np.zeros(taps, dtype=np.complex128)
    w[half] = 1.0

    err2 = np.empty(d.size)
    mu = cfg.eq_step
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(d.size):
            seg = xp[2 * k:2 * k + taps]
            y = w @ seg
            e = d[k] - y
            err2[k] = (e * e.conjugate()).real
            if mu:
                w += mu * e * seg.conjugate()

    if d.size >= 8:
        quarter = d.size // 4
        head = float(np.mean(err2[:quarter]))
        tail = float(np.mean(err2[-quarter:]))
        if not np.isfinite(tail) or (tail > 10.0 * head and tail > 1e-12):
            raise EqualizerDivergedError(
                f"eq diverged: training MSE grew from {head:.3e} to {tail:.3e}")

    # frozen taps over the whole frame; output at symbol instants only
    full = np.convolve(xp, w[::-1])
    out = full[taps - 1:taps - 1 + 2 * n_sym:2]
    diag = {"taps": w * 1.0, "train_mse": err2, "input_scale": scale}
    return out, diag
