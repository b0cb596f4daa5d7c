"""Command-line driver: ``xbarsim {train,device-response,infer-eval,matvec-bench}``.

Each command writes CSV tables plus ``resolved_config.yaml`` and ``run.json``
(seed, command line, timestamp) to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .compounds import TransferConfig, UnitCellConfig
from .config import ExperimentConfig, echo_config, load_config, parse_config
from .devices import pulse_response_trace
from .errors import ConfigError
from .experiment import run_training
from .inference import evaluate_over_time
from .nn.training import write_history_csv
from .periphery import PERFECT_IO, analog_mvm
from .rng import stream


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if getattr(args, "config", None) else parse_config("")
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _out_dir(args, config: ExperimentConfig) -> Path:
    out = Path(args.out or config.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {out}: {err.strerror}") from None
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def _write_run_record(out: Path, config: ExperimentConfig, argv: list[str]) -> None:
    (out / "resolved_config.yaml").write_text(echo_config(config))
    record = {
        "version": __version__,
        "command": argv,
        "seed": config.seed,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "run.json").write_text(json.dumps(record, indent=2) + "\n")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_train(args) -> int:
    config = _load(args)
    out = _out_dir(args, config)
    net, state, _, _ = run_training(config)
    write_history_csv(state.history, out / "history.csv")
    weights = {f"layer{i}": layer.get_weights() for i, layer in enumerate(net.analog_layers())}
    np.savez(out / "weights.npz", **weights)
    _write_run_record(out, config, args.argv)
    final = state.history[-1][1] if state.history else float("nan")
    print(f"trained {config.training.epochs} epochs, final loss {final:.6g} -> {out}")
    return 0


def _response_device(config: ExperimentConfig):
    device = config.tile.device
    if isinstance(device, (UnitCellConfig, TransferConfig)):
        return device.unit_cell_devices[0]
    return device


def cmd_device_response(args) -> int:
    config = _load(args)
    out = _out_dir(args, config)
    params = _response_device(config)
    traces = pulse_response_trace(params, args.devices, args.pulses_up, args.pulses_down,
                                  stream(config.seed, "device_response"))
    with open(out / "pulse_response.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["pulse", "direction"] + [f"device_{k}" for k in range(args.devices)])
        for n, row in enumerate(traces):
            direction = "start" if n == 0 else ("up" if n <= args.pulses_up else "down")
            w.writerow([n, direction] + [repr(float(v)) for v in row])
    _write_run_record(out, config, args.argv)
    print(f"wrote {traces.shape[0]} rows x {args.devices} devices -> {out / 'pulse_response.csv'}")
    return 0


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"cannot parse times {text!r}", "--times") from None


def cmd_infer_eval(args) -> int:
    config = _load(args)
    inf = config.inference
    overrides = {}
    if args.times is not None:
        overrides["times"] = _parse_times(args.times)
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.drift_compensation is not None:
        overrides["drift_compensation"] = args.drift_compensation == "on"
    try:
        inf = replace(inf, **overrides)
    except ConfigError as err:
        raise err.prefixed("inference") from None
    config = replace(config, inference=inf)
    out = _out_dir(args, config)
    net, state, x, y = run_training(config)
    result = evaluate_over_time(net, inf.times, inf.noise, x, y, metric=inf.metric,
                                n_seeds=inf.n_seeds, compensation=inf.drift_compensation,
                                seed=config.seed)
    result.write_csv(out / "drift_eval.csv")
    with open(out / "drift_summary.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["time_s", "metric_mean", "metric_std"])
        for t, m, s in result.summary():
            w.writerow([repr(t), repr(m), repr(s)])
    write_history_csv(state.history, out / "history.csv")
    _write_run_record(out, config, args.argv)
    for t, m, s in result.summary():
        print(f"t={t:>10.4g} s  {inf.metric}={m:.4f} +- {s:.4f}")
    return 0


def cmd_matvec_bench(args) -> int:
    config = _load(args)
    out = _out_dir(args, config)
    rng = stream(config.seed, "matvec_bench")
    w = rng.uniform(-0.5, 0.5, size=(args.size, args.size))
    xs = rng.uniform(-1.0, 1.0, size=(args.reps, args.size))
    rows = []
    for mode, io in (("perfect", PERFECT_IO), ("noisy", config.tile.forward)):
        noise_rng = stream(config.seed, "matvec_bench", mode)
        total = 0.0
        start = time.perf_counter()
        for x in xs:
            total += float(analog_mvm(w, x, io, noise_rng).sum())
        seconds = time.perf_counter() - start
        rows.append((mode, args.size, args.reps, total, seconds, args.reps / seconds if seconds else float("inf")))
    with open(out / "matvec_bench.csv", "w", newline="") as fh:
        wr = _writer(fh)
        wr.writerow(["mode", "size", "reps", "checksum", "seconds", "matvecs_per_s", "note"])
        for mode, size, reps, checksum, seconds, rate in rows:
            wr.writerow([mode, size, reps, repr(checksum), f"{seconds:.6f}", f"{rate:.1f}",
                         "relative, informational only"])
    _write_run_record(out, config, args.argv)
    for mode, size, reps, _, seconds, rate in rows:
        print(f"{mode:>8}: {reps} mat-vecs of {size}x{size} in {seconds:.3f} s ({rate:.0f}/s, relative)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xbarsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML experiment config")
        p.add_argument("--out", help="output directory (default: output.dir of the config)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("train", help="train the configured network, write history.csv")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("device-response", help="pulse-response traces, write pulse_response.csv")
    common(p)
    p.add_argument("--devices", type=int, default=50)
    p.add_argument("--pulses-up", type=int, default=500)
    p.add_argument("--pulses-down", type=int, default=500)
    p.set_defaults(func=cmd_device_response)

    p = sub.add_parser("infer-eval", help="accuracy over time under drift, write drift_eval.csv")
    common(p)
    p.add_argument("--times", help='comma-separated seconds, e.g. "20,1e2,1e4,1e6"')
    p.add_argument("--drift-compensation", choices=("on", "off"))
    p.add_argument("--seeds", type=int)
    p.set_defaults(func=cmd_infer_eval)

    p = sub.add_parser("matvec-bench", help="relative mat-vec throughput, write matvec_bench.csv")
    common(p, config_required=False)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--reps", type=int, default=1000)
    p.set_defaults(func=cmd_matvec_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    for name in ("devices", "size", "reps", "seeds"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name} must be >= 1", file=sys.stderr)
            return 2
    for name in ("pulses_up", "pulses_down"):
        value = getattr(args, name, None)
        if value is not None and value < 0:
            print(f"error: --{name.replace('_', '-')} must be >= 0", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
