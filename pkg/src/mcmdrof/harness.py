"""Experiment orchestration: configuration, sweeps, metrics, CSV persistence.

Theory mode drives the analytic engine; waveform mode runs the full
transmit/receive chain per sweep point and trial.  All randomness derives
from the master seed, sweep index, and trial index, so identical configs
give byte-identical CSV output.
"""

from __future__ import annotations

import dataclasses
import math
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .channel import ChannelConfig, channel_snr_db
from .codec import IqBlock, SubcarrierPlan
from .link import LinkResult, ModemParams, generate_payload, run_link
from .modem import PilotSpec, Waveform
from .rxdsp import RxConfig
from .theory import SignalModel, WeightTable, weight_table

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "measure_recovered_snr",
    "run_experiment",
    "compare_sc_mcm",
    "theory_sweep_results",
    "results_to_csv",
    "write_csv",
    "write_waveform",
    "read_waveform",
]

CSV_AXES = ("snr_channel", "rop", "bessel_3db")
WAVEFORM_MAGIC = b"MCMDROF1"
HEADER_BYTES = 64


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "theory"  # theory | waveform
    system: str = "MCM"  # SC | MCM
    pa_mode: str = "off"  # off | fixed | optimized
    p2: float = 1.0
    p3: float = 1.0
    bits_per_sample: int = 12
    rms: float = theory.DEFAULT_RMS
    n_sub: int = 3
    placement: tuple = (0, 1, 2)
    sweep_axis: str = "snr_channel"
    sweep_values: tuple = (18.0,)
    trials: int = 1
    bits_per_trial: int = 1_000_000
    seed: int = 1
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig(snr_awgn_db=18.0))
    rx: RxConfig = field(default_factory=RxConfig)
    pilot: PilotSpec = field(default_factory=PilotSpec)
    modem: ModemParams = field(default_factory=ModemParams)
    foc: str = "auto"
    cpr: str = "auto"
    eq: str = "auto"

    def __post_init__(self):
        if self.mode not in ("theory", "waveform"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.system not in ("SC", "MCM"):
            raise ConfigError(f"unknown system {self.system!r}")
        if self.pa_mode not in ("off", "fixed", "optimized"):
            raise ConfigError(f"unknown pa_mode {self.pa_mode!r}")
        if self.sweep_axis not in CSV_AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}")
        if len(self.sweep_values) < 1:
            raise ConfigError("sweep needs at least one value")
        if self.mode == "waveform" and self.bits_per_trial < 100_000:
            raise ConfigError("bits_per_trial below the 1e5 statistical floor")
        if self.mode == "theory" and self.sweep_axis != "snr_channel":
            raise ConfigError("theory mode sweeps channel SNR only")
        if self.system == "SC" and self.pa_mode != "off":
            raise ConfigError("power allocation applies to the MCM system only")
        if self.pa_mode == "fixed" and (self.p2 <= 0 or self.p3 <= 0):
            raise ConfigError("fixed power factors must be positive")
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))

    def plan(self, p2: float = 1.0, p3: float = 1.0) -> SubcarrierPlan:
        return SubcarrierPlan(self.n_sub, self.bits_per_sample // self.n_sub,
                              (1.0, p2, p3), self.placement)

    def weights(self) -> WeightTable:
        return weight_table(self.bits_per_sample, SignalModel(rms=self.rms))


@dataclass
class RunResult:
    sweep_axis: str
    sweep_value: float
    system: str
    pa_mode: str
    p2: float | None
    p3: float | None
    snr_sub_db: tuple
    ber_per_bit: np.ndarray  # index m = 0 (LSB) .. L-1 (sign)
    n_e: float
    n_q: float
    snr_r_db: float
    gain_db: float | None
    seed: int
    wall_clock_s: float = 0.0
    unreliable: bool = False

    def __post_init__(self):
        ber = np.asarray(self.ber_per_bit, dtype=float)
        if np.any(ber < 0) or np.any(ber > 1):
            raise ValueError("BERs must be probabilities")
        self.ber_per_bit = ber


def measure_recovered_snr(original: IqBlock, recovered: IqBlock) -> float:
    """Recovered-sample SNR after least-squares complex gain alignment.

    Invariant to any global complex scaling or rotation of the recovered
    block; returns +inf when the aligned error vanishes.
    """
    sig, err = _aligned_powers(original, recovered)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(sig / err)


def _aligned_powers(original: IqBlock, recovered: IqBlock):
    x = original.samples
    y = recovered.samples
    if x.size != y.size:
        raise ValueError("blocks must have equal length")
    denom = np.vdot(x, x).real
    if denom == 0.0:
        raise ValueError("zero-power original block")
    alpha = np.vdot(x, y) / denom
    err = y - alpha * x
    return float(denom), float(np.vdot(err, err).real)


def _point_channel(cfg: ExperimentConfig, value: float) -> ChannelConfig:
    if cfg.sweep_axis == "snr_channel":
        return dataclasses.replace(cfg.channel, snr_awgn_db=value, rop_dbm=None)
    if cfg.sweep_axis == "rop":
        return dataclasses.replace(cfg.channel, rop_dbm=value, snr_awgn_db=None)
    return dataclasses.replace(cfg.channel, bessel_3db=value)


def _trial_seed(master: int, point: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, point, trial]).generate_state(1)[0])


def _power_factors_for_point(cfg, chan, point_idx, weights):
    """Resolve (p2, p3) for one sweep point.

    Optimized mode measures uniform-power per-subcarrier SNRs in a short
    calibration pass and minimizes the analytic N_e over those, which folds
    the filtering penalties of the actual link into the optimization.
    """
    if cfg.pa_mode == "off" or cfg.system == "SC":
        return 1.0, 1.0
    if cfg.pa_mode == "fixed":
        return cfg.p2, cfg.p3
    calib_samples = 8192
    seed = _trial_seed(cfg.seed, point_idx, 0xCA1B)
    rng = np.random.default_rng([cfg.seed, 0xCA1B, point_idx])
    block = generate_payload(rng, calib_samples, cfg.rms)
    res = run_link(block, system="MCM", plan=cfg.plan(), channel_cfg=chan,
                   rx_cfg=cfg.rx, pilot=cfg.pilot, params=cfg.modem, seed=seed,
                   bits_per_sample=cfg.bits_per_sample,
                   foc=cfg.foc, cpr=cfg.cpr, eq=cfg.eq)
    p2, p3, _ = theory.optimize_power_subs(res.snr_sub_measured_db, weights)
    return p2, p3


def _run_waveform_point(cfg: ExperimentConfig, point_idx: int, value: float,
                        capture: dict | None = None):
    chan = _point_channel(cfg, value)
    weights = cfg.weights()
    p2, p3 = _power_factors_for_point(cfg, chan, point_idx, weights)
    plan = cfg.plan(p2, p3)
    n_samples = -(-cfg.bits_per_trial // (4 * cfg.bits_per_sample)) * 2

    errors = np.zeros(cfg.bits_per_sample, dtype=np.int64)
    bits_total = 0
    sig_sum = err_sum = 0.0
    snr_sub = np.zeros(cfg.n_sub)
    started = time.perf_counter()
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, point_idx, t])
        block = generate_payload(rng, n_samples, cfg.rms)
        res = run_link(block, system=cfg.system, plan=plan, channel_cfg=chan,
                       rx_cfg=cfg.rx, pilot=cfg.pilot, params=cfg.modem,
                       seed=_trial_seed(cfg.seed, point_idx, t),
                       bits_per_sample=cfg.bits_per_sample,
                       foc=cfg.foc, cpr=cfg.cpr, eq=cfg.eq,
                       capture=capture if t == 0 else None)
        errors += res.errors_per_bit
        bits_total += res.bits_per_position
        s, e = _aligned_powers(res.original, res.recovered)
        sig_sum += s
        err_sum += e
        snr_sub += res.snr_sub_measured_db / cfg.trials

    ber = errors / bits_total
    n_q = weights.quantization_noise
    n_e = theory.error_noise(ber, weights)
    snr_r = math.inf if err_sum == 0 else 10.0 * math.log10(sig_sum / err_sum)
    ceiling = theory.recovered_snr(weights.signal_power, n_q, 0.0)
    if snr_r > ceiling + 0.5:
        raise RuntimeError("recovered SNR above the quantization ceiling")
    unreliable = bool(np.any((errors > 0) & (errors < 10)))
    subs = tuple(snr_sub) if cfg.system == "MCM" else (snr_sub[0],) * 3
    return RunResult(
        sweep_axis=cfg.sweep_axis, sweep_value=value, system=cfg.system,
        pa_mode=cfg.pa_mode, p2=p2 if cfg.system == "MCM" else None,
        p3=p3 if cfg.system == "MCM" else None, snr_sub_db=subs,
        ber_per_bit=ber, n_e=n_e, n_q=n_q, snr_r_db=snr_r, gain_db=None,
        seed=cfg.seed, wall_clock_s=time.perf_counter() - started,
        unreliable=unreliable)


def _theory_result(cfg, value, report, gain=None) -> RunResult:
    is_mcm = report.system == "MCM"
    return RunResult(
        sweep_axis="snr_channel", sweep_value=value, system=report.system,
        pa_mode=report.pa_mode,
        p2=report.power_factors[1] if is_mcm else None,
        p3=report.power_factors[2] if is_mcm else None,
        snr_sub_db=tuple(report.snr_sub_db),
        ber_per_bit=report.ber_per_bit, n_e=report.n_e, n_q=report.n_q,
        snr_r_db=report.snr_r_db,
        gain_db=report.gain_over_sc_db if gain is None else gain,
        seed=cfg.seed)


def run_experiment(cfg: ExperimentConfig, capture: dict | None = None):
    """Run the configured sweep; returns one RunResult per point.

    ``capture``, when a dict, receives the first point's first-trial transmit
    and received waveforms under keys "tx" and "rx" (waveform mode only).
    """
    results = []
    if cfg.mode == "theory":
        weights = cfg.weights()
        for value in cfg.sweep_values:
            sc = theory.evaluate_sc(value, weights)
            if cfg.system == "SC":
                report = sc
            elif cfg.pa_mode == "optimized":
                report = theory.optimize_power(value, weights)
            else:
                p2, p3 = (cfg.p2, cfg.p3) if cfg.pa_mode == "fixed" else (1.0, 1.0)
                report = theory.evaluate_mcm(value, p2, p3, weights, cfg.pa_mode)
            gain = report.snr_r_db - sc.snr_r_db
            if math.isinf(report.snr_r_db) and math.isinf(sc.snr_r_db):
                gain = 0.0
            results.append(_theory_result(cfg, value, report, gain))
        return results
    for idx, value in enumerate(cfg.sweep_values):
        results.append(_run_waveform_point(cfg, idx, value,
                                           capture if idx == 0 else None))
    return results


def theory_sweep_results(cfg: ExperimentConfig):
    """SC, uniform MCM, and optimized MCM theory rows per sweep value."""
    weights = cfg.weights()
    rows = []
    for value in cfg.sweep_values:
        point = theory.sweep_channel_snr([value], weights)[0]
        rows.append(_theory_result(cfg, value, point.sc))
        rows.append(_theory_result(cfg, value, point.mcm_no_pa))
        rows.append(_theory_result(cfg, value, point.mcm_pa))
    return rows


_COMPARE_FIELDS = ("system", "pa_mode", "p2", "p3")


def compare_sc_mcm(*cfgs: ExperimentConfig):
    """Run paired configs that differ only in system/allocation; the first
    must be the SC baseline.  Gains are reported against it per sweep point."""
    if len(cfgs) < 2:
        raise ConfigError("compare needs at least two configs")
    base = dataclasses.replace(cfgs[0], system="MCM", pa_mode="off", p2=1.0, p3=1.0)
    for other in cfgs[1:]:
        norm = dataclasses.replace(other, system="MCM", pa_mode="off", p2=1.0, p3=1.0)
        if norm != base:
            raise ConfigError("compare configs may differ only in system/allocation")
    if cfgs[0].system != "SC":
        raise ConfigError("first compare config must be the SC baseline")
    per_cfg = [run_experiment(c) for c in cfgs]
    rows = []
    for i, results in enumerate(zip(*per_cfg)):
        baseline = results[0]
        for r in results:
            r.gain_db = r.snr_r_db - baseline.snr_r_db
            if math.isinf(r.snr_r_db) and math.isinf(baseline.snr_r_db):
                r.gain_db = 0.0
            rows.append(r)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def csv_header(bits_per_sample: int = 12) -> str:
    bers = ",".join(f"ber_b{m}" for m in range(bits_per_sample - 1, -1, -1))
    return ("sweep_axis,sweep_value,system,pa_mode,p2,p3,"
            "snr_sub1_db,snr_sub2_db,snr_sub3_db," + bers +
            ",n_e,n_q,snr_r_db,gain_db,seed")


def results_to_csv(results) -> str:
    """Render RunResults to the documented CSV schema ('.' decimal)."""
    if not results:
        raise ValueError("no results to write")
    bits = results[0].ber_per_bit.size
    lines = [csv_header(bits)]
    for r in results:
        fields = [r.sweep_axis, _fmt(r.sweep_value), r.system, r.pa_mode,
                  _fmt(r.p2), _fmt(r.p3)]
        fields += [_fmt(v) for v in r.snr_sub_db[:3]]
        fields += [_fmt(v) for v in r.ber_per_bit[::-1]]
        fields += [_fmt(r.n_e), _fmt(r.n_q), _fmt(r.snr_r_db), _fmt(r.gain_db),
                   _fmt(r.seed)]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_csv(path, results) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(results_to_csv(results))


def write_waveform(path, wave: Waveform) -> None:
    """Dump samples as little-endian float64 (re, im) pairs behind a 64-byte
    text header: magic, sample rate, length."""
    header = b"%s sample_rate=%.17g length=%d" % (
        WAVEFORM_MAGIC, wave.sample_rate, wave.samples.size)
    if len(header) > HEADER_BYTES:
        raise ValueError("header overflow")
    header = header.ljust(HEADER_BYTES)
    pairs = np.empty(2 * wave.samples.size)
    pairs[0::2] = wave.samples.real
    pairs[1::2] = wave.samples.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pairs.astype("<f8").tobytes())


def read_waveform(path) -> Waveform:
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES)
        if not header.startswith(WAVEFORM_MAGIC):
            raise ValueError("not a waveform dump (bad magic)")
        text = header[len(WAVEFORM_MAGIC):].decode("ascii").split()
        kv = dict(item.split("=") for item in text)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    n = int(kv["length"])
    samples = raw[0::2][:n] + 1j * raw[1::2][:n]
    return Waveform(samples, float(kv["sample_rate"]))
