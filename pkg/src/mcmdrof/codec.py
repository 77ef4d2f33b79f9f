"""Wireless-sample codec for digital radio-over-fibre fronthaul.

Converts blocks of complex I/Q samples into scrambled, priority-allocated,
interleaved per-subcarrier bitstreams and back.  Quantization uses L-bit
folded binary codewords (sign bit on top, magnitude below), so bit
significance strictly descends from the sign bit to the LSB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import max_len_seq

__all__ = [
    "IqBlock",
    "CodewordFrame",
    "SubcarrierPlan",
    "quantize",
    "dequantize",
    "prbs23",
    "scramble",
    "descramble",
    "allocate_bits",
    "deallocate_bits",
    "interleave",
    "deinterleave",
    "interleave_groups",
    "deinterleave_groups",
]

MAX_BITS = 32


@dataclass(frozen=True)
class IqBlock:
    """Block of complex baseband wireless samples with unit-peak normalization.

    ``peak`` is the clipping reference: upstream guarantees
    max(|Re s|, |Im s|) <= peak for every sample.
    """

    samples: np.ndarray
    peak: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("IqBlock needs a non-empty 1-D sample vector")
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise ValueError("IqBlock samples must be finite")
        if self.peak <= 0:
            raise ValueError("peak must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def branch_power(self) -> float:
        """Mean power of one real branch, E[Re^2] and E[Im^2] pooled."""
        return 0.5 * float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class CodewordFrame:
    """Per-sample L-bit folded-binary codewords for one real branch.

    ``bits`` has shape (n_samples, L); column 0 is the sign bit b_{L-1},
    column L-1 is b_0.  ``peak`` is carried along so the quantization
    interval Delta = peak / 2^(L-1) is recoverable at the receiver.
    """

    bits: np.ndarray
    bits_per_sample: int = 12
    branch: str = "I"
    peak: float = 1.0

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        object.__setattr__(self, "bits", bits)
        if bits.ndim != 2 or bits.shape[1] != self.bits_per_sample:
            raise ValueError("bits must have shape (n_samples, L)")
        if self.branch not in ("I", "Q"):
            raise ValueError("branch must be 'I' or 'Q'")

    def __len__(self):
        return self.bits.shape[0]

    @property
    def delta(self) -> float:
        return self.peak / 2.0 ** (self.bits_per_sample - 1)


@dataclass(frozen=True)
class SubcarrierPlan:
    """Bit-priority and power assignment across digital subcarriers.

    ``power_factors`` are (p1, ..., pn) with p1 = 1 as the reference;
    ``placement`` maps priority rank -> spectral slot (0 = innermost),
    defaulting to high priority innermost.
    """

    n_sub: int = 3
    bits_per_subcarrier: int = 4
    power_factors: tuple = (1.0, 1.0, 1.0)
    placement: tuple = None

    def __post_init__(self):
        if self.n_sub < 1:
            raise ValueError("n_sub must be >= 1")
        p = tuple(float(v) for v in self.power_factors)
        if len(p) != self.n_sub:
            raise ValueError("power_factors length must equal n_sub")
        if abs(p[0] - 1.0) > 1e-12:
            raise ValueError("p1 is the reference and must be 1")
        if any(v <= 0 for v in p):
            raise ValueError("all power factors must be positive")
        object.__setattr__(self, "power_factors", p)
        placement = self.placement
        if placement is None:
            placement = tuple(range(self.n_sub))
        placement = tuple(int(v) for v in placement)
        if sorted(placement) != list(range(self.n_sub)):
            raise ValueError("placement must be a permutation of ranks")
        object.__setattr__(self, "placement", placement)

    @property
    def bits_per_sample(self) -> int:
        return self.n_sub * self.bits_per_subcarrier

    @property
    def power_scales(self) -> np.ndarray:
        """Amplitude scale per rank, sqrt(n*p_i / sum p), conserving total power."""
        p = np.asarray(self.power_factors)
        return np.sqrt(self.n_sub * p / p.sum())


def quantize(block: IqBlock, bits_per_sample: int = 12):
    """Quantize a sample block into folded-binary codeword frames (I, Q).

    The sign bit b_{L-1} is 1 for x >= 0.  The magnitude index
    m = min(floor(|x| / peak * 2^(L-1)), 2^(L-1) - 1) goes to b_{L-2}..b_0
    in natural binary, so one magnitude step is Delta = peak / 2^(L-1) and
    the full-scale range 2*peak spans 2^L cells.  Out-of-range samples clip
    to the outermost cell.
    """
    length = bits_per_sample
    if length < 2 or length > MAX_BITS:
        raise ValueError(f"bits_per_sample must be in [2, {MAX_BITS}]")
    frames = []
    for branch, x in (("I", block.samples.real), ("Q", block.samples.imag)):
        sign = (x >= 0).astype(np.uint8)
        half_cells = 1 << (length - 1)
        mag = np.floor(np.abs(x) / block.peak * half_cells).astype(np.int64)
        np.clip(mag, 0, half_cells - 1, out=mag)
        bits = np.empty((x.size, length), dtype=np.uint8)
        bits[:, 0] = sign
        for j in range(1, length):
            bits[:, j] = (mag >> (length - 1 - j)) & 1
        frames.append(CodewordFrame(bits, length, branch, block.peak))
    return frames[0], frames[1]


def dequantize(frame: CodewordFrame) -> np.ndarray:
    """Reconstruct real branch samples at cell midpoints.

    x_hat = sign * (m + 0.5) * Delta, so |x_hat - x| <= Delta/2 for in-range
    inputs and the noiseless quantization noise power is Delta^2 / 12.
    """
    length = frame.bits_per_sample
    sign = np.where(frame.bits[:, 0] > 0, 1.0, -1.0)
    weights = (1 << np.arange(length - 2, -1, -1)).astype(np.int64)
    mag = frame.bits[:, 1:].astype(np.int64) @ weights
    return sign * (mag + 0.5) * frame.delta


def _prbs_state(seed: int) -> np.ndarray:
    state = np.array([(seed >> i) & 1 for i in range(23)], dtype=np.int8)
    if not state.any():
        state[:] = 1
    return state


def prbs23(seed: int, length: int) -> np.ndarray:
    """PRBS-23 sequence (x^23 + x^18 + 1) seeded from a 23-bit state."""
    seq, _ = max_len_seq(23, state=_prbs_state(seed), length=length)
    return seq.astype(np.uint8)


def scramble(frame: CodewordFrame, seed: int) -> CodewordFrame:
    """XOR the serialized frame bits with a frame-synchronized PRBS-23.

    Additive scrambling from a fixed seed: the same call undoes itself, and
    any constant input comes out with P(1) = 0.5 within PRBS balance.
    """
    flat = frame.bits.reshape(-1)
    seq = prbs23(seed, flat.size)
    out = (flat ^ seq).reshape(frame.bits.shape)
    return CodewordFrame(out, frame.bits_per_sample, frame.branch, frame.peak)


def descramble(frame: CodewordFrame, seed: int) -> CodewordFrame:
    """Inverse of :func:`scramble` (XOR with the same sequence)."""
    return scramble(frame, seed)


def allocate_bits(frame_i: CodewordFrame, frame_q: CodewordFrame,
                  plan: SubcarrierPlan):
    """Split codeword bit planes into per-subcarrier streams by priority.

    Rank 0 (high priority) takes the top ``bits_per_subcarrier`` bits of each
    codeword, rank 1 the next group, and so on, preserving sample order.
    The I and Q branches produce separate stream sets (they occupy opposite
    spectral halves downstream).  Returns (streams_i, streams_q), each a list
    indexed by priority rank.
    """
    out = []
    for frame in (frame_i, frame_q):
        if frame.bits_per_sample != plan.bits_per_sample:
            raise ValueError("plan is inconsistent with codeword length")
        bps = plan.bits_per_subcarrier
        streams = [frame.bits[:, r * bps:(r + 1) * bps].reshape(-1).copy()
                   for r in range(plan.n_sub)]
        out.append(streams)
    return out[0], out[1]


def deallocate_bits(streams_i, streams_q, plan: SubcarrierPlan,
                    peak: float = 1.0):
    """Reassemble codeword frames from per-subcarrier streams (exact inverse)."""
    frames = []
    for branch, streams in (("I", streams_i), ("Q", streams_q)):
        if len(streams) != plan.n_sub:
            raise ValueError("stream count does not match plan")
        bps = plan.bits_per_subcarrier
        lengths = {len(s) for s in streams}
        if len(lengths) != 1:
            raise ValueError("stream length mismatch on deallocation")
        n_bits = lengths.pop()
        if n_bits % bps:
            raise ValueError("stream length not a multiple of bits per subcarrier")
        n = n_bits // bps
        bits = np.empty((n, plan.bits_per_sample), dtype=np.uint8)
        for r, s in enumerate(streams):
            bits[:, r * bps:(r + 1) * bps] = np.asarray(s, dtype=np.uint8).reshape(n, bps)
        frames.append(CodewordFrame(bits, plan.bits_per_sample, branch, peak))
    return frames[0], frames[1]


def interleave(bits: np.ndarray, depth: int) -> np.ndarray:
    """Row-column block interleaver: write row-wise into ``depth`` rows,
    read column-wise.  The stream is zero-padded to a full matrix, so
    consecutive input bits land >= depth positions apart.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    bits = np.asarray(bits)
    if depth == 1:
        return bits.copy()
    cols = -(-bits.size // depth)
    padded = np.zeros(depth * cols, dtype=bits.dtype)
    padded[:bits.size] = bits
    return padded.reshape(depth, cols).T.reshape(-1)


def deinterleave(bits: np.ndarray, depth: int, length: int | None = None) -> np.ndarray:
    """Invert :func:`interleave`; ``length`` strips the zero padding."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    bits = np.asarray(bits)
    if depth == 1:
        out = bits.copy()
    else:
        if bits.size % depth:
            raise ValueError("interleaved stream length must be a multiple of depth")
        cols = bits.size // depth
        out = bits.reshape(cols, depth).T.reshape(-1)
    return out[:length] if length is not None else out


def interleave_groups(bits: np.ndarray, group: int, depth: int) -> np.ndarray:
    """Interleave a stream at ``group``-bit granularity.

    Whole groups are permuted by the row-column rule while the position of a
    bit inside its group is preserved, so downstream symbol mapping keeps a
    fixed bit-to-constellation-rail assignment.  Pads with zero groups.
    """
    bits = np.asarray(bits)
    if bits.size % group:
        raise ValueError("stream length must be a multiple of the group size")
    n_groups = bits.size // group
    total = depth * (-(-n_groups // depth))
    perm = interleave(np.arange(total), depth)
    mat = np.zeros((total, group), dtype=bits.dtype)
    valid = perm < n_groups
    mat[valid] = bits.reshape(n_groups, group)[perm[valid]]
    return mat.reshape(-1)


def deinterleave_groups(bits: np.ndarray, group: int, depth: int,
                        length: int | None = None) -> np.ndarray:
    """Invert :func:`interleave_groups`; ``length`` is in bits."""
    bits = np.asarray(bits)
    if bits.size % group:
        raise ValueError("stream length must be a multiple of the group size")
    total = bits.size // group
    if total % depth:
        raise ValueError("interleaved group count must be a multiple of depth")
    perm = interleave(np.arange(total), depth)
    mat = np.empty((total, group), dtype=bits.dtype)
    mat[perm] = bits.reshape(total, group)
    out = mat.reshape(-1)
    return out[:length] if length is not None else out
