"""Codec unit tests: quantizer, scrambler, allocation, interleaving."""

import numpy as np
import pytest

from mcmdrof import codec
from mcmdrof.codec import CodewordFrame, IqBlock, SubcarrierPlan


def bits_to_mag(frame, row=0):
    weights = 1 << np.arange(frame.bits_per_sample - 2, -1, -1)
    return int(frame.bits[row, 1:] @ weights)


class TestQuantize:
    def test_zero_input(self):
        fi, _ = codec.quantize(IqBlock(np.array([0.0 + 0.0j])), 12)
        assert fi.bits[0, 0] == 1
        assert bits_to_mag(fi) == 0

    def test_exact_half(self):
        fi, _ = codec.quantize(IqBlock(np.array([0.5 + 0.0j])), 12)
        assert fi.bits[0, 0] == 1
        assert bits_to_mag(fi) == 1024
        # b10 set, everything else clear
        assert fi.bits[0, 1] == 1
        assert fi.bits[0, 2:].sum() == 0

    def test_near_negative_peak(self):
        # floor(0.999 * 2048) = 2045; reconstruction stays within delta/2
        fi, _ = codec.quantize(IqBlock(np.array([-0.999 + 0.0j])), 12)
        assert fi.bits[0, 0] == 0
        assert bits_to_mag(fi) == 2045

    def test_clipping_at_peak(self):
        fi, _ = codec.quantize(IqBlock(np.array([1.0 + 0.0j])), 12)
        assert bits_to_mag(fi) == 2047

    def test_rejects_bad_length(self):
        blk = IqBlock(np.array([0.1 + 0.1j]))
        with pytest.raises(ValueError):
            codec.quantize(blk, 1)
        with pytest.raises(ValueError):
            codec.quantize(blk, 33)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            IqBlock(np.array([np.nan + 0.0j]))


class TestDequantize:
    def test_first_cell_midpoint(self):
        frame = CodewordFrame(np.zeros((1, 12), dtype=np.uint8), 12, "I", 1.0)
        frame.bits[0, 0] = 1
        assert codec.dequantize(frame)[0] == pytest.approx(0.5 * 2.0 ** -11)

    def test_round_trip_within_half_delta(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-1, 1, 100_000) + 1j * rng.uniform(-1, 1, 100_000)
        blk = IqBlock(x)
        fi, fq = codec.quantize(blk, 12)
        delta = 2.0 ** -11
        assert np.max(np.abs(codec.dequantize(fi) - x.real)) <= delta / 2 + 1e-15
        assert np.max(np.abs(codec.dequantize(fq) - x.imag)) <= delta / 2 + 1e-15

    def test_sqnr_of_clipped_gaussian(self):
        # measured SQNR ~ 10*log10(P_s * 12 / delta^2) at rms 0.25
        rng = np.random.default_rng(11)
        x = rng.normal(0, 0.25, 200_000) + 1j * rng.normal(0, 0.25, 200_000)
        x = np.clip(x.real, -1, 1) + 1j * np.clip(x.imag, -1, 1)
        blk = IqBlock(x)
        fi, fq = codec.quantize(blk, 12)
        xhat = codec.dequantize(fi) + 1j * codec.dequantize(fq)
        err = np.mean(np.abs(xhat - x) ** 2)
        sqnr = 10 * np.log10(np.mean(np.abs(x) ** 2) / err)
        assert sqnr == pytest.approx(65.0, abs=0.3)

    def test_single_bit_flip_changes_one_sample_by_weighted_step(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, 64) + 1j * rng.uniform(-1, 1, 64)
        fi, _ = codec.quantize(IqBlock(x), 12)
        base = codec.dequantize(fi)
        delta = 2.0 ** -11
        for m in range(11):  # magnitude bits
            bits = fi.bits.copy()
            bits[5, 11 - m] ^= 1
            changed = codec.dequantize(CodewordFrame(bits, 12, "I", 1.0))
            diff = np.abs(changed - base)
            assert np.count_nonzero(diff) == 1
            assert diff[5] == pytest.approx(2.0 ** m * delta)
        # sign flip: 2 * (mag + 0.5) * delta
        bits = fi.bits.copy()
        bits[5, 0] ^= 1
        changed = codec.dequantize(CodewordFrame(bits, 12, "I", 1.0))
        mag = bits_to_mag(fi, 5)
        assert abs(changed[5] - base[5]) == pytest.approx(2 * (mag + 0.5) * delta)


class TestScramble:
    def test_involution(self):
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, (1000, 12), dtype=np.uint8)
        frame = CodewordFrame(bits, 12, "I", 1.0)
        out = codec.descramble(codec.scramble(frame, 99), 99)
        assert np.array_equal(out.bits, frame.bits)

    def test_zero_frame_gives_prbs(self):
        frame = CodewordFrame(np.zeros((100, 12), dtype=np.uint8), 12, "I", 1.0)
        out = codec.scramble(frame, 1)
        assert np.array_equal(out.bits.reshape(-1), codec.prbs23(1, 1200))

    def test_balance_on_constant_input(self):
        n = 1_000_000
        ones = codec.prbs23(1, n).mean()
        assert 0.49 <= ones <= 0.51


class TestAllocation:
    def test_fig1_grouping(self):
        bits = np.array([[1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0]], dtype=np.uint8)
        fi = CodewordFrame(bits, 12, "I", 1.0)
        fq = CodewordFrame(bits, 12, "Q", 1.0)
        plan = SubcarrierPlan()
        si, _ = codec.allocate_bits(fi, fq, plan)
        assert si[0].tolist() == [1, 1, 1, 1]  # HP gets b11..b8
        assert si[1].tolist() == [0, 0, 0, 0]
        assert si[2].tolist() == [0, 0, 0, 0]

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, (500, 12), dtype=np.uint8)
        fi = CodewordFrame(bits, 12, "I", 1.0)
        fq = CodewordFrame(rng.integers(0, 2, (500, 12), dtype=np.uint8), 12, "Q", 1.0)
        plan = SubcarrierPlan()
        si, sq = codec.allocate_bits(fi, fq, plan)
        ri, rq = codec.deallocate_bits(si, sq, plan)
        assert np.array_equal(ri.bits, fi.bits)
        assert np.array_equal(rq.bits, fq.bits)

    def test_single_error_maps_to_one_codeword_bit(self):
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, (64, 12), dtype=np.uint8)
        fi = CodewordFrame(bits, 12, "I", 1.0)
        fq = CodewordFrame(bits.copy(), 12, "Q", 1.0)
        plan = SubcarrierPlan()
        si, sq = codec.allocate_bits(fi, fq, plan)
        k = 17
        si[0][k] ^= 1  # HP stream error
        ri, _ = codec.deallocate_bits(si, sq, plan)
        diff = np.argwhere(ri.bits != fi.bits)
        assert diff.shape == (1, 2)
        sample, col = diff[0]
        assert sample == k // 4
        assert col == k % 4  # one of b11..b8

    def test_length_mismatch_rejected(self):
        plan = SubcarrierPlan()
        streams = [np.zeros(8, dtype=np.uint8)] * 2 + [np.zeros(4, dtype=np.uint8)]
        with pytest.raises(ValueError):
            codec.deallocate_bits(streams, streams, plan)


class TestInterleaver:
    def test_depth_one_identity(self):
        x = np.arange(10)
        assert np.array_equal(codec.interleave(x, 1), x)

    def test_hand_computed_4x4(self):
        out = codec.interleave(np.arange(16), 4)
        assert out.tolist() == [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15]

    def test_round_trip_with_padding(self):
        rng = np.random.default_rng(8)
        for n in (15, 16, 64, 1001):
            x = rng.integers(0, 2, n, dtype=np.uint8)
            y = codec.interleave(x, 7)
            assert np.array_equal(codec.deinterleave(y, 7, n), x)

    def test_spreads_consecutive_bits(self):
        depth = 16
        x = np.arange(depth * depth)
        y = codec.interleave(x, depth)
        pos = {int(v): i for i, v in enumerate(y)}
        gaps = [abs(pos[i + 1] - pos[i]) for i in range(len(x) - 1)]
        assert min(gaps) >= depth

    def test_group_interleave_preserves_group_offsets(self):
        rng = np.random.default_rng(9)
        bits = rng.integers(0, 2, 4 * 1000, dtype=np.uint8)
        inter = codec.interleave_groups(bits, 4, 64)
        assert inter.size % (4 * 64) == 0
        back = codec.deinterleave_groups(inter, 4, 64, length=bits.size)
        assert np.array_equal(back, bits)
        # position within every 4-bit group is preserved by construction:
        # tag bits by intra-group offset (1..4 so zero padding is distinct)
        tags = np.tile(np.arange(1, 5), 1000)
        inter_tags = codec.interleave_groups(tags, 4, 64).reshape(-1, 4)
        real = inter_tags[inter_tags[:, 0] != 0]
        assert real.shape[0] == 1000
        assert np.array_equal(real, np.tile(np.arange(1, 5), (1000, 1)))


class TestFullCodecRoundTrip:
    def test_bit_error_free_path(self):
        rng = np.random.default_rng(21)
        x = rng.normal(0, 0.25, 3000) + 1j * rng.normal(0, 0.25, 3000)
        x = np.clip(x.real, -1, 1) + 1j * np.clip(x.imag, -1, 1)
        blk = IqBlock(x)
        plan = SubcarrierPlan()
        fi, fq = codec.quantize(blk, 12)
        si = codec.scramble(fi, 42)
        sq = codec.scramble(fq, 43)
        streams_i, streams_q = codec.allocate_bits(si, sq, plan)
        inter_i = [codec.interleave(s, 256) for s in streams_i]
        inter_q = [codec.interleave(s, 256) for s in streams_q]
        deint_i = [codec.deinterleave(s, 256, 4 * 3000) for s in inter_i]
        deint_q = [codec.deinterleave(s, 256, 4 * 3000) for s in inter_q]
        ri, rq = codec.deallocate_bits(deint_i, deint_q, plan)
        di = codec.descramble(ri, 42)
        dq = codec.descramble(rq, 43)
        assert np.array_equal(di.bits, fi.bits)
        recovered = codec.dequantize(di) + 1j * codec.dequantize(dq)
        reference = codec.dequantize(fi) + 1j * codec.dequantize(fq)
        assert np.array_equal(recovered, reference)
