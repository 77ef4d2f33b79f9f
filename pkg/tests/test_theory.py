"""Theory engine tests: Q-function, 16-QAM BER, weights, Eq. machinery,
power optimization, and the channel-SNR sweep."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from mcmdrof import theory
from mcmdrof.theory import SignalModel, weight_table

# published weighting factors (dBm) for the 12-bit codeword, b11 first
TAB1_DB = [24.1, 24.0, 18.0, 11.9, 5.9, -0.1, -6.1, -12.1, -18.2, -24.2, -30.2, -36.2]
# published per-bit-pair BERs at 18 dB channel SNR, b11&b10 first
TAB2_NO_PA = [9.5e-5, 1.9e-4, 9.5e-5, 1.9e-4, 9.5e-5, 1.9e-4]
TAB2_PA = [8.3e-7, 1.7e-6, 7.9e-5, 1.6e-4, 1.7e-2, 3.5e-2]


def tab1_linear():
    return np.array([10 ** (v / 10) for v in TAB1_DB[::-1]])  # index m = 0..11


class TestQFunction:
    def test_symmetry_point(self):
        assert theory.q_function(0.0) == 0.5

    def test_limits(self):
        assert theory.q_function(-40.0) == pytest.approx(1.0, abs=1e-12)
        assert theory.q_function(40.0) >= 0.0

    def test_against_quadrature_oracle(self):
        # independent oracle: numerical integration of the normal density
        for x in (0.5, 1.0, 2.0, 3.553, 5.0):
            oracle, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                             x, 60.0)
            assert theory.q_function(x) == pytest.approx(oracle, rel=1e-10)

    def test_spec_point(self):
        assert theory.q_function(3.553) == pytest.approx(1.90e-4, rel=5e-3)


class TestBer16Qam:
    def test_tab2_no_pa_row(self):
        p_msb, p_lsb = theory.ber_16qam_per_bit(18.0)
        assert p_msb == pytest.approx(9.5e-5, rel=0.05)
        assert p_lsb == pytest.approx(1.9e-4, rel=0.05)

    def test_infinite_snr(self):
        p_msb, p_lsb = theory.ber_16qam_per_bit(400.0)
        assert p_msb == 0.0 and p_lsb == 0.0

    def test_low_snr_point_matches_tab2_lp(self):
        p_msb, p_lsb = theory.ber_16qam_per_bit(12.2)
        assert p_msb == pytest.approx(1.7e-2, rel=0.1)
        assert p_lsb == pytest.approx(3.5e-2, rel=0.1)

    @pytest.mark.parametrize("snr_db", [10.0, 14.0, 18.0])
    def test_against_monte_carlo_oracle(self, snr_db):
        # hard-decision Gray 16-QAM over AWGN, 1e7 symbols in chunks
        from mcmdrof.modem import qam16_demap, qam16_map
        rng = np.random.default_rng(123)
        n_total = 10_000_000
        chunk = 1_000_000
        sigma = math.sqrt(10 ** (-snr_db / 10) / 2)
        err_msb = err_lsb = 0
        for _ in range(n_total // chunk):
            bits = rng.integers(0, 2, 4 * chunk, dtype=np.uint8)
            syms = qam16_map(bits)
            noisy = syms + sigma * (rng.standard_normal(chunk)
                                    + 1j * rng.standard_normal(chunk))
            rx = qam16_demap(noisy).reshape(-1, 4)
            tx = bits.reshape(-1, 4)
            diff = rx != tx
            err_msb += diff[:, :2].sum()
            err_lsb += diff[:, 2:].sum()
        n_bits = 2 * n_total
        p_msb, p_lsb = theory.ber_16qam_per_bit(snr_db)
        for measured_err, p in ((err_msb, p_msb), (err_lsb, p_lsb)):
            sigma3 = 3 * math.sqrt(n_bits * p * (1 - p))
            assert abs(measured_err - n_bits * p) <= sigma3


class TestWeightTable:
    def test_magnitude_ladder_is_exact(self):
        table = weight_table(12)
        steps = np.diff(table.db[:11])
        assert np.allclose(steps, 20 * math.log10(2), atol=1e-12)

    def test_ratio_invariant(self):
        table = weight_table(12)
        ratios = table.weights[1:11] / table.weights[:10]
        assert np.allclose(ratios, 4.0)

    def test_sign_bit_gap_at_default_model(self):
        table = weight_table(12)
        gap = table.db[11] - table.db[10]
        assert gap == pytest.approx(0.103, abs=0.01)

    def test_sign_bit_gap_at_published_rms(self):
        table = weight_table(12, SignalModel(rms=0.253))
        assert table.db[11] - table.db[10] == pytest.approx(0.1, abs=0.02)

    def test_lsb_weight_is_delta_squared(self):
        table = weight_table(12)
        assert table.weights[0] == pytest.approx(2.0 ** -22)
        assert table.db[0] == pytest.approx(-66.2, abs=0.05)

    def test_matches_published_table_up_to_constant(self):
        table = weight_table(12)
        ours = table.db[::-1]  # b11 first
        offset = float(np.mean(np.array(TAB1_DB) - ours))
        residual = np.array(TAB1_DB) - ours - offset
        assert np.max(np.abs(residual)) <= 0.06
        assert offset == pytest.approx(30.0, abs=0.1)

    def test_monte_carlo_agrees_with_analytic(self):
        rng = np.random.default_rng(17)
        x = np.clip(rng.normal(0, 0.253, 2_000_000), -1, 1)
        mc = theory.weight_table_from_samples(12, x)
        an = weight_table(12, SignalModel(rms=0.253))
        assert mc.weights[11] == pytest.approx(an.weights[11], rel=2e-3)

    def test_degenerate_model_rejected(self):
        with pytest.raises(ValueError):
            SignalModel(rms=0.0)
        with pytest.raises(ValueError):
            theory.weight_table_from_samples(12, np.zeros(100))


class TestSubcarrierSnrs:
    def test_equal_split(self):
        out = theory.subcarrier_snrs(18.0, (1, 1, 1))
        assert np.allclose(out, 18.0)

    def test_tab2_backsolved_point(self):
        out = theory.subcarrier_snrs(18.0, (1.0, 0.6, 0.15))
        assert out[0] == pytest.approx(20.3408, abs=1e-3)
        assert out[1] == pytest.approx(18.1223, abs=1e-3)
        assert out[2] == pytest.approx(12.1017, abs=1e-3)

    def test_power_conservation(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            p = rng.uniform(0.05, 2.0, 3)
            p[0] = 1.0
            out = theory.subcarrier_snrs(17.0, p)
            total = np.sum(10 ** (out / 10))
            assert total == pytest.approx(3 * 10 ** 1.7, rel=1e-12)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            theory.subcarrier_snrs(18.0, (1.0, -0.1, 0.5))


class TestErrorNoise:
    def test_zero_bers(self):
        table = weight_table(12)
        assert theory.error_noise(np.zeros(12), table) == 0.0

    def test_uniform_ber_against_direct_sum(self):
        # direct summation oracle in the published table's own units
        w = tab1_linear()
        n_e = float(np.sum(1.43e-4 * w))
        assert n_e == pytest.approx(0.0847, abs=0.001)

    def test_tab2_pa_against_direct_sum(self):
        w = tab1_linear()
        ber = np.repeat(TAB2_PA[::-1], 2)  # index m = 0..11
        n_e = float(np.dot(ber, w))
        assert n_e == pytest.approx(1.35e-3, rel=0.02)

    def test_linearity_and_monotonicity(self):
        table = weight_table(12)
        rng = np.random.default_rng(5)
        a = rng.uniform(0, 1e-3, 12)
        b = rng.uniform(0, 1e-3, 12)
        na, nb = theory.error_noise(a, table), theory.error_noise(b, table)
        assert theory.error_noise(a + b, table) == pytest.approx(na + nb, rel=1e-12)
        bumped = a.copy()
        bumped[7] += 1e-4
        assert theory.error_noise(bumped, table) > na

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            theory.error_noise(np.zeros(10), weight_table(12))


class TestRecoveredSnr:
    def test_sqnr_ceiling_at_quarter_rms(self):
        model = SignalModel(rms=0.25)
        table = weight_table(12, model)
        snr = theory.recovered_snr(table.signal_power, table.quantization_noise, 0.0)
        assert snr == pytest.approx(65.0, abs=0.1)

    def test_equal_noises_cost_3db(self):
        ceiling = theory.recovered_snr(1.0, 1e-6, 0.0)
        assert theory.recovered_snr(1.0, 1e-6, 1e-6) == pytest.approx(
            ceiling - 10 * math.log10(2), rel=1e-12)

    def test_scale_invariance(self):
        a = theory.recovered_snr(0.06, 2e-8, 3e-6)
        b = theory.recovered_snr(0.12, 4e-8, 6e-6)
        assert a == pytest.approx(b, rel=1e-14)

    def test_zero_noise_sentinel(self):
        assert theory.recovered_snr(1.0, 0.0, 0.0) == math.inf


class TestOptimizePower:
    def test_18db_matches_tab2_within_factor_2(self):
        table = weight_table(12)
        report = theory.optimize_power(18.0, table)
        p2, p3 = report.power_factors[1], report.power_factors[2]
        assert p2 == pytest.approx(0.60, abs=0.05)
        assert p3 == pytest.approx(0.15, abs=0.05)
        pairs = report.ber_per_bit[::-1].reshape(6, 2).mean(axis=1)
        for ours, published in zip(pairs, TAB2_PA):
            if published > 0:
                assert published / 2 <= ours <= published * 2

    def test_priority_ordering_of_bers(self):
        table = weight_table(12)
        report = theory.optimize_power(18.0, table)
        hp = report.ber_per_bit[8:].mean()
        mp = report.ber_per_bit[4:8].mean()
        lp = report.ber_per_bit[:4].mean()
        assert hp < mp < lp

    def test_dominates_uniform(self):
        table = weight_table(12)
        for snr in (14.0, 18.0, 24.0, 30.0):
            opt = theory.optimize_power(snr, table)
            uniform = theory.evaluate_mcm(snr, 1.0, 1.0, table)
            assert opt.n_e <= uniform.n_e + 1e-30

    def test_high_snr_limit(self):
        table = weight_table(12)
        report = theory.optimize_power(60.0, table)
        assert report.n_e == 0.0
        assert report.snr_r_db == pytest.approx(
            theory.recovered_snr(table.signal_power, table.quantization_noise, 0.0))


class TestSweep:
    def test_headline_gain_at_18db(self):
        table = weight_table(12)
        point = theory.sweep_channel_snr([18.0], table)[0]
        assert point.mcm_pa.gain_over_sc_db == pytest.approx(16.66, abs=0.1)
        # in-band for the published 16.1 +/- 2 dB window
        assert 14.1 <= point.mcm_pa.gain_over_sc_db <= 18.1

    def test_gain_non_negative_and_vanishing(self):
        table = weight_table(12)
        points = theory.sweep_channel_snr([14, 18, 22, 26, 30, 35], table)
        for pt in points:
            assert pt.mcm_pa.gain_over_sc_db >= -1e-9
        assert points[-1].mcm_pa.gain_over_sc_db == pytest.approx(0.0, abs=0.1)

    def test_high_snr_convergence_to_sqnr(self):
        table = weight_table(12)
        pt = theory.sweep_channel_snr([35.0], table)[0]
        ceiling = theory.recovered_snr(table.signal_power, table.quantization_noise, 0.0)
        for report in (pt.sc, pt.mcm_no_pa, pt.mcm_pa):
            assert report.snr_r_db == pytest.approx(ceiling, abs=0.1)

    def test_sc_equals_uniform_mcm_in_flat_awgn(self):
        table = weight_table(12)
        pt = theory.sweep_channel_snr([18.0], table)[0]
        assert pt.sc.snr_r_db == pytest.approx(pt.mcm_no_pa.snr_r_db, abs=1e-9)
