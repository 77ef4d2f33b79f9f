"""Command line front end for theory sweeps and waveform simulations.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(equalizer divergence or pilot loss).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness, theory
from .channel import ChannelConfig
from .harness import ConfigError, ExperimentConfig
from .link import ModemParams
from .modem import PilotSpec
from .rxdsp import EqualizerDivergedError, PilotLostError, RxConfig
from .theory import SignalModel

CHANNEL_KEYS = {"snr_awgn_db", "rop_dbm", "bessel_order", "bessel_3db",
                "linewidth_tx", "linewidth_lo", "freq_offset_hz",
                "lo_power_dbm", "thermal_psd", "responsivity"}
RX_KEYS = {"foc_fft_size", "cpr_bandwidth", "eq_taps", "eq_step",
           "train_symbols", "pilot_threshold_db"}
PILOT_KEYS = {"relative_power_db", "guard"}
MODEM_KEYS = {"total_baud", "beta", "rrc_span", "osf_mcm", "osf_sc"}
TOP_KEYS = {"mode", "system", "pa_mode", "p2", "p3", "bits_per_sample", "rms",
            "n_sub", "sweep_axis", "sweep_values", "trials", "bits_per_trial",
            "seed", "foc", "cpr", "eq"}
INT_KEYS = {"bessel_order", "foc_fft_size", "eq_taps", "train_symbols",
            "rrc_span", "osf_mcm", "osf_sc", "bits_per_sample", "n_sub",
            "trials", "bits_per_trial", "seed"}
STR_KEYS = {"mode", "system", "pa_mode", "sweep_axis", "foc", "cpr", "eq"}


def parse_values(text: str):
    """Sweep values: a comma list '14,16,18' or a range 'start:stop:step'."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"bad sweep range {text!r}")
        start, stop, step = parts
        n = int(round((stop - start) / step))
        return tuple(start + i * step for i in range(n + 1) if start + i * step <= stop + 1e-9)
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {text!r}") from exc


def load_config_file(path: str) -> dict:
    """Parse a 'key = value' text file ('#' comments, blank lines ignored)."""
    options = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, value = (part.strip() for part in line.split("=", 1))
                options[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return options


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    if key in STR_KEYS:
        return value
    if key == "sweep_values":
        return parse_values(value)
    if value.lower() in ("none", ""):
        return None
    if key in INT_KEYS:
        return int(float(value))
    return float(value)


def build_config(options: dict) -> ExperimentConfig:
    """Assemble an ExperimentConfig from a flat option mapping."""
    known = TOP_KEYS | CHANNEL_KEYS | RX_KEYS | MODEM_KEYS | {
        "pilot_power_db", "pilot_guard"}
    unknown = set(options) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    opts = {k: _coerce(k, v) for k, v in options.items()}

    chan_kwargs = {k: opts[k] for k in CHANNEL_KEYS if k in opts}
    if "snr_awgn_db" in chan_kwargs and "rop_dbm" not in chan_kwargs:
        chan_kwargs.setdefault("rop_dbm", None)
    if "rop_dbm" in chan_kwargs and chan_kwargs["rop_dbm"] is not None:
        chan_kwargs.setdefault("snr_awgn_db", None)
    if "snr_awgn_db" not in chan_kwargs and "rop_dbm" not in chan_kwargs:
        chan_kwargs["snr_awgn_db"] = 18.0
    rx_kwargs = {k: opts[k] for k in RX_KEYS if k in opts}
    modem_kwargs = {k: opts[k] for k in MODEM_KEYS if k in opts}
    pilot_kwargs = {}
    if "pilot_power_db" in opts:
        pilot_kwargs["relative_power_db"] = opts["pilot_power_db"]
    if "pilot_guard" in opts:
        pilot_kwargs["guard"] = opts["pilot_guard"]
    top_kwargs = {k: opts[k] for k in TOP_KEYS if k in opts}
    try:
        return ExperimentConfig(
            channel=ChannelConfig(**chan_kwargs),
            rx=RxConfig(**rx_kwargs),
            pilot=PilotSpec(**pilot_kwargs),
            modem=ModemParams(**modem_kwargs),
            **top_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _collect_options(args, extra_map) -> dict:
    options = {}
    if getattr(args, "config", None):
        options.update(load_config_file(args.config))
    for attr, key in extra_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            options[key] = value
    return options


_COMMON_MAP = {
    "system": "system", "pa": "pa_mode", "p2": "p2", "p3": "p3",
    "seed": "seed", "trials": "trials", "bits": "bits_per_trial",
    "rms": "rms", "values": "sweep_values", "sweep_axis": "sweep_axis",
    "snr": "snr_awgn_db", "rop": "rop_dbm", "bessel_3db": "bessel_3db",
    "linewidth": None, "foc": "foc", "cpr": "cpr", "eq": "eq",
}


def _add_common(sub, waveform: bool):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--rms", type=float, help="payload branch rms / peak")
    sub.add_argument("--out", help="CSV output path (default stdout)")
    if waveform:
        sub.add_argument("--system", choices=["SC", "MCM"])
        sub.add_argument("--pa", choices=["off", "fixed", "optimized"])
        sub.add_argument("--p2", type=float)
        sub.add_argument("--p3", type=float)
        sub.add_argument("--trials", type=int)
        sub.add_argument("--bits", type=int, help="payload bits per trial")
        sub.add_argument("--sweep-axis", dest="sweep_axis",
                         choices=["snr_channel", "rop", "bessel_3db"])
        sub.add_argument("--values", help="sweep values: list or start:stop:step")
        sub.add_argument("--snr", type=float, help="fixed channel SNR (dB)")
        sub.add_argument("--rop", type=float, help="fixed received optical power (dBm)")
        sub.add_argument("--bessel-3db", dest="bessel_3db", type=float)
        sub.add_argument("--foc", choices=["auto", "on", "off"])
        sub.add_argument("--cpr", choices=["auto", "on", "off"])
        sub.add_argument("--eq", choices=["auto", "on", "off"])


def _emit(args, results) -> None:
    text = harness.results_to_csv(results)
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {len(results)} rows to {args.out}")
    else:
        sys.stdout.write(text)


def _cmd_theory_sweep(args) -> int:
    options = _collect_options(args, {"seed": "seed", "rms": "rms",
                                      "values": "sweep_values"})
    options.setdefault("sweep_values", "14:35:1" if args.values is None else args.values)
    options["mode"] = "theory"
    cfg = build_config(options)
    _emit(args, harness.theory_sweep_results(cfg))
    return 0


def _cmd_simulate(args) -> int:
    extra = {k: v for k, v in _COMMON_MAP.items() if v}
    options = _collect_options(args, extra)
    options["mode"] = "waveform"
    cfg = build_config(options)
    capture = {} if args.dump_waveform else None
    results = harness.run_experiment(cfg, capture=capture)
    for r in results:
        if r.unreliable:
            print(f"warning: point {r.sweep_value:g} has bit positions with "
                  "fewer than 10 errors; BER unreliable", file=sys.stderr)
    if capture:
        harness.write_waveform(args.dump_waveform, capture["rx"])
        print(f"dumped received waveform to {args.dump_waveform}")
    _emit(args, results)
    return 0


def _cmd_optimize_power(args) -> int:
    options = _collect_options(args, {"seed": "seed", "rms": "rms"})
    options["mode"] = "theory"
    options["system"] = "MCM"
    options["pa_mode"] = "optimized"
    options["sweep_values"] = (args.snr,)
    cfg = build_config(options)
    results = harness.run_experiment(cfg)
    r = results[0]
    print(f"channel SNR {args.snr:g} dB: p2 = {r.p2:.3f}, p3 = {r.p3:.3f}, "
          f"SNR_r = {r.snr_r_db:.2f} dB, gain over SC = {r.gain_db:.2f} dB")
    _emit(args, results)
    return 0


def _cmd_weights(args) -> int:
    bits = args.bits if args.bits is not None else 12
    model = SignalModel(rms=args.rms if args.rms is not None else theory.DEFAULT_RMS)
    table = theory.weight_table(bits, model)
    lines = ["bit,weight,weight_db"]
    for m in range(bits - 1, -1, -1):
        lines.append(f"b{m},{table.weights[m]:.10g},{table.db[m]:.4f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_compare(args) -> int:
    extra = {k: v for k, v in _COMMON_MAP.items() if v and k not in ("system", "pa")}
    options = _collect_options(args, extra)
    options["mode"] = "waveform"
    base = build_config({**options, "system": "SC", "pa_mode": "off"})
    mcm_off = dataclasses.replace(base, system="MCM", pa_mode="off")
    mcm_pa = dataclasses.replace(base, system="MCM", pa_mode="optimized")
    _emit(args, harness.compare_sc_mcm(base, mcm_off, mcm_pa))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmdrof",
        description="Multicarrier digital radio-over-fibre fronthaul simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("theory-sweep",
                        help="analytic SC/MCM sweep over channel SNR")
    _add_common(p, waveform=False)
    p.add_argument("--values", help="channel SNRs: list or start:stop:step")
    p.set_defaults(func=_cmd_theory_sweep)

    p = subs.add_parser("simulate", help="waveform Monte Carlo link simulation")
    _add_common(p, waveform=True)
    p.add_argument("--dump-waveform", dest="dump_waveform",
                   help="dump the first received waveform to this path")
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("optimize-power",
                        help="optimize (p2, p3) at one channel SNR")
    _add_common(p, waveform=False)
    p.add_argument("--snr", type=float, required=True)
    p.set_defaults(func=_cmd_optimize_power)

    p = subs.add_parser("weights", help="print the per-bit weighting factors")
    _add_common(p, waveform=False)
    p.add_argument("--bits", type=int, help="codeword length (default 12)")
    p.set_defaults(func=_cmd_weights)

    p = subs.add_parser("compare",
                        help="SC vs MCM (no PA, optimized PA) waveform comparison")
    _add_common(p, waveform=True)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PilotLostError, EqualizerDivergedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
