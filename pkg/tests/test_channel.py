"""Channel impairment tests: AWGN, Bessel filter, phase noise, offsets, ROP."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from mcmdrof import channel
from mcmdrof.channel import ChannelConfig
from mcmdrof.modem import Waveform


def _tone(n=100_000, fs=40e9, f=3e9):
    t = np.arange(n)
    return Waveform(np.exp(2j * np.pi * f * t / fs), fs)


class TestAwgn:
    def test_infinite_snr_identity(self):
        w = _tone(1000)
        out = channel.awgn(w, math.inf, 1)
        assert np.array_equal(out.samples, w.samples)

    def test_measured_snr_matches_request(self):
        w = _tone(1_000_000)
        out = channel.awgn(w, 20.0, 42)
        noise = out.samples - w.samples
        snr = 10 * np.log10(w.power() / np.mean(np.abs(noise) ** 2))
        assert snr == pytest.approx(20.0, abs=0.05)

    def test_seed_determinism(self):
        w = _tone(10_000)
        a = channel.awgn(w, 15.0, 7)
        b = channel.awgn(w, 15.0, 7)
        assert np.array_equal(a.samples, b.samples)
        c = channel.awgn(w, 15.0, 8)
        assert not np.array_equal(a.samples, c.samples)


def _bessel5_mag_oracle(ratio):
    """|H| at f = ratio * f_3db from the order-5 reverse Bessel polynomial."""
    coeffs = [1.0, 15.0, 105.0, 420.0, 945.0, 945.0]  # theta_5(s)

    def mag(w):
        return abs(945.0 / np.polyval(coeffs, 1j * w))

    w3 = brentq(lambda w: mag(w) ** 2 - 0.5, 1.0, 4.0)
    return mag(ratio * w3)


class TestBessel:
    def test_dc_gain(self):
        w = Waveform(np.ones(4096, dtype=complex), 40e9)
        out = channel.bessel_lpf(w, 5, 14e9)
        mid = out.samples[1000:3000]
        assert np.allclose(np.abs(mid), 1.0, atol=1e-9)

    def test_minus_3db_at_cutoff(self):
        f3, fs = 8e9, 40e9
        w = _tone(65536, fs, f3)
        out = channel.bessel_lpf(w, 5, f3)
        gain = 20 * np.log10(np.abs(out.samples[2000:-2000]).mean())
        assert gain == pytest.approx(-3.0103, abs=0.01)

    def test_magnitude_at_twice_cutoff_matches_polynomial_oracle(self):
        oracle_db = 20 * math.log10(_bessel5_mag_oracle(2.0))
        f3, fs = 8e9, 40e9
        out = channel.bessel_lpf(_tone(65536, fs, 2 * f3), 5, f3)
        gain = 20 * np.log10(np.abs(out.samples[2000:-2000]).mean())
        assert gain == pytest.approx(oracle_db, abs=0.02)
        # the order-5 skirt at 2x cutoff sits near -14.06 dB
        assert oracle_db == pytest.approx(-14.06, abs=0.02)

    def test_rejects_cutoff_near_nyquist(self):
        with pytest.raises(ValueError):
            channel.bessel_lpf(_tone(1000), 5, 19e9)


class TestPhaseNoise:
    def test_zero_linewidth_identity(self):
        w = _tone(1000)
        out = channel.phase_noise(w, 0.0, 3)
        assert np.array_equal(out.samples, w.samples)

    def test_unit_modulus_rotation(self):
        w = _tone(10_000)
        out = channel.phase_noise(w, 200e3, 3)
        assert np.allclose(np.abs(out.samples), np.abs(w.samples))

    def test_wiener_increment_variance(self):
        fs, dv, lag = 40e9, 200e3, 2000
        n = 20_000_000
        w = Waveform(np.ones(n, dtype=complex), fs)
        out = channel.phase_noise(w, dv, 5)
        phi = np.unwrap(np.angle(out.samples[::lag]))
        inc = np.diff(phi)
        expected = 2 * np.pi * dv * lag / fs
        assert np.var(inc) == pytest.approx(expected, rel=0.05)


class TestFreqOffset:
    def test_zero_identity(self):
        w = _tone(1000)
        assert np.array_equal(channel.freq_offset(w, 0.0).samples, w.samples)

    def test_spectrum_shifts_by_delta(self):
        fs, f0, df = 40e9, 3e9, 80e6
        n = 1 << 18
        w = _tone(n, fs, f0)
        out = channel.freq_offset(w, df)
        spec = np.abs(np.fft.fft(out.samples))
        freqs = np.fft.fftfreq(n, 1 / fs)
        peak = freqs[np.argmax(spec)]
        assert peak == pytest.approx(f0 + df, abs=fs / n)

    def test_inverse_composition(self):
        w = _tone(5000)
        out = channel.freq_offset(channel.freq_offset(w, 80e6), -80e6)
        assert np.allclose(out.samples, w.samples, atol=1e-12)


class TestRopToSnr:
    def test_linear_in_rop_when_thermal_dominated(self):
        cfg = ChannelConfig(rop_dbm=-20.0, lo_power_dbm=-20.0)
        cfg3 = ChannelConfig(rop_dbm=-17.0, lo_power_dbm=-20.0)
        a = channel.rop_to_snr(cfg, 15e9)
        b = channel.rop_to_snr(cfg3, 15e9)
        assert b - a == pytest.approx(3.0, abs=0.1)

    def test_shot_limited_independent_of_lo(self):
        a = channel.rop_to_snr(ChannelConfig(rop_dbm=-18.0, thermal_psd=0.0,
                                             lo_power_dbm=12.0), 15e9)
        b = channel.rop_to_snr(ChannelConfig(rop_dbm=-18.0, thermal_psd=0.0,
                                             lo_power_dbm=20.0), 15e9)
        assert a == pytest.approx(b, abs=1e-9)

    def test_default_calibration_constant(self):
        # hand-evaluated budget at -18 dBm, 15 GHz: 2*P_lo*P_rop over
        # (thermal^2 + 2 q P_lo) * B with R = 1
        p_lo, p_rop = 10 ** (12 / 10) * 1e-3, 10 ** (-18 / 10) * 1e-3
        sig = 2 * p_lo * p_rop
        psd = (14e-12) ** 2 + 2 * 1.602e-19 * p_lo
        expected = 10 * math.log10(sig / (psd * 15e9))
        got = channel.rop_to_snr(ChannelConfig(rop_dbm=-18.0), 15e9)
        assert got == pytest.approx(expected, abs=1e-9)
        assert got == pytest.approx(38.0, abs=0.1)

    def test_monotone_in_rop(self):
        vals = [channel.rop_to_snr(ChannelConfig(rop_dbm=r), 15e9)
                for r in (-30, -24, -18, -12)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rejects_missing_rop(self):
        with pytest.raises(ValueError):
            channel.rop_to_snr(ChannelConfig(snr_awgn_db=18.0), 15e9)


class TestComposition:
    def test_all_impairments_off_is_identity_up_to_noise_inf(self):
        w = _tone(5000)
        cfg = ChannelConfig(snr_awgn_db=math.inf, bessel_3db=None,
                            linewidth_tx=0.0, linewidth_lo=0.0, freq_offset_hz=0.0)
        out = channel.apply_channel(w, cfg, snr_full_band_db=math.inf, seed=1)
        assert np.allclose(out.samples, w.samples)

    def test_seeded_chain_is_reproducible(self):
        w = _tone(5000)
        cfg = ChannelConfig(snr_awgn_db=18.0)
        a = channel.apply_channel(w, cfg, snr_full_band_db=18.0, seed=5)
        b = channel.apply_channel(w, cfg, snr_full_band_db=18.0, seed=5)
        assert np.array_equal(a.samples, b.samples)
