"""Command-line surface tying the pipeline together.

Subcommands map onto the pipeline stages: ``simulate`` produces synthetic
traces and crossing logs, ``detect`` turns a trace into a blockage
sequence, ``synthesize`` builds the balanced training set from a crossing
log, ``train`` fits the classifier, ``count`` runs detect+predict on one
trace, ``evaluate`` scores the model over simulated windows, and ``sweep``
re-runs evaluation across a parameter range.

Configuration is a flat key=value file mirroring SystemConfig field names;
command-line flags override file values and unknown keys are hard errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from typing import Sequence

from .blockage import DetectorParams, detect_blockages, load_trace, save_trace
from .core import (
    ConfigError,
    FileFormatError,
    LinkCountError,
    ModelMismatchError,
    SystemConfig,
    atomic_write_text,
    load_crossing_log,
    save_crossing_log,
    save_sequences,
    split_into_windows,
)
from .metrics import EvalReport
from .nn import TrainHyper, load_model, predict, save_model, train
from .sim import (
    GroundTruth,
    SimScenario,
    generate_ground_truth,
    load_scenario,
)
from .synthesis import SynthesisPlan, build_dataset, load_dataset, save_dataset

TAU_RANGE = (0.0, 10.0)
WINDOW_MINUTES_RANGE = (1.0, 5.0)

# Spacing of per-window scenario seeds; keeps every window's agent and
# noise streams disjoint for up to 100 agents per window.
_SEED_STRIDE_WINDOW = 100
_SEED_STRIDE_CLASS = 10_000

_CONFIG_TYPES = {
    "tau": float,
    "window_minutes": float,
    "slot_duration": float,
    "max_count": int,
    "lstm_hidden": int,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "momentum": float,
    "rng_seed": int,
    "detector_mode": str,
}
assert set(_CONFIG_TYPES) == {f.name for f in fields(SystemConfig)}


def load_config_values(path: str) -> dict:
    """Parse a key=value config file into typed SystemConfig overrides."""
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise FileFormatError(f"cannot read config file {path}: {exc}") from exc
    values: dict = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_TYPES[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> SystemConfig:
    """File values first, then command-line flag overrides."""
    values = load_config_values(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_TYPES:
        flag = getattr(args, f"opt_{key}", None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "seed", None) is not None:
        values["rng_seed"] = args.seed
    return SystemConfig(**values)


# ---------------------------------------------------------------------------
# Evaluation and sweeps
# ---------------------------------------------------------------------------

def simulate_eval_windows(
    base_scenario: SimScenario,
    counts: Sequence[int],
    windows_per_class: int,
    seed: int,
    slot_duration: float = 1.0,
) -> list[GroundTruth]:
    """Fresh labeled windows: windows_per_class per count class.

    Every window gets its own seed block so no two windows share walker
    trajectories or noise.
    """
    windows = []
    for count in counts:
        for k in range(windows_per_class):
            scenario = replace(
                base_scenario,
                agents=count,
                rng_seed=seed + _SEED_STRIDE_CLASS * count + _SEED_STRIDE_WINDOW * k,
            )
            windows.append(generate_ground_truth(scenario, slot_duration))
    return windows


def evaluate_model(model, detector: DetectorParams, windows: Sequence[GroundTruth]) -> EvalReport:
    """Detect and classify each window; pairs are (true count, estimate)."""
    pairs = []
    for gt in windows:
        sequence = detect_blockages(gt.trace, detector)
        pairs.append((gt.count, predict(model, sequence)))
    return EvalReport.from_pairs(pairs)


def sweep_tau(
    values: Sequence[float],
    model,
    windows: Sequence[GroundTruth],
    config: SystemConfig,
) -> list[tuple[float, int]]:
    """Re-detect the same evaluation windows at each threshold."""
    for value in values:
        if not TAU_RANGE[0] <= value <= TAU_RANGE[1]:
            raise ConfigError(f"tau value {value} outside {TAU_RANGE}")
    rows = []
    for value in values:
        detector = DetectorParams(
            tau=value,
            mode=config.detector_mode,
            slot_duration=model.slot_duration,
            w=model.window_slots,
        )
        rows.append((value, evaluate_model(model, detector, windows).epsilon))
    return rows


def sweep_window(
    values: Sequence[float],
    crossing_times: Sequence[float],
    total_duration: float,
    config: SystemConfig,
    base_scenario: SimScenario,
    windows_per_class: int,
    eval_seed: int,
    hidden: int | None = None,
) -> list[tuple[float, int]]:
    """Full re-synthesis, re-training, and re-evaluation per window length."""
    for value in values:
        if not WINDOW_MINUTES_RANGE[0] <= value <= WINDOW_MINUTES_RANGE[1]:
            raise ConfigError(
                f"window_minutes value {value} outside {WINDOW_MINUTES_RANGE}"
            )
    rows = []
    for minutes in values:
        originals = split_into_windows(
            crossing_times, total_duration, minutes, config.slot_duration
        )
        plan = SynthesisPlan(
            m=len(originals),
            max_count=config.max_count,
            w=originals[0].w,
            rng_seed=config.rng_seed,
        )
        dataset = build_dataset(originals, plan)
        hyper = TrainHyper(
            learning_rate=config.learning_rate,
            momentum=config.momentum,
            epochs=config.epochs,
            batch_size=config.batch_size,
            rng_seed=config.rng_seed,
        )
        model, _ = train(dataset, hidden or config.lstm_hidden, hyper)
        scenario = replace(base_scenario, duration=minutes * 60.0)
        windows = simulate_eval_windows(
            scenario,
            range(config.max_count + 1),
            windows_per_class,
            eval_seed,
            config.slot_duration,
        )
        detector = DetectorParams(
            tau=config.tau,
            mode=config.detector_mode,
            slot_duration=config.slot_duration,
            w=originals[0].w,
        )
        rows.append((minutes, evaluate_model(model, detector, windows).epsilon))
    return rows


def sweep(parameter: str, values: Sequence[float], **kwargs) -> list[tuple[float, int]]:
    if parameter == "tau":
        return sweep_tau(values, **kwargs)
    if parameter == "window_minutes":
        return sweep_window(values, **kwargs)
    raise ConfigError(f"unknown sweep parameter {parameter!r}")


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _scenario_from_args(args: argparse.Namespace, config: SystemConfig) -> SimScenario:
    scenario = load_scenario(args.scenario) if args.scenario else SimScenario()
    overrides: dict = {}
    if getattr(args, "agents", None) is not None:
        overrides["agents"] = args.agents
    if getattr(args, "duration", None) is not None:
        overrides["duration"] = args.duration
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    try:
        return replace(scenario, **overrides) if overrides else scenario
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    scenario = _scenario_from_args(args, config)
    truth = generate_ground_truth(scenario, config.slot_duration)
    if not (args.out_trace or args.out_crossings or args.out_truth):
        raise ConfigError("simulate: no output requested "
                          "(use --out-trace/--out-crossings/--out-truth)")
    if args.out_trace:
        save_trace(args.out_trace, truth.trace)
    if args.out_crossings:
        save_crossing_log(args.out_crossings, truth.all_crossings, scenario.duration)
    if args.out_truth:
        save_sequences(args.out_truth, [(truth.count, truth.sequence)])
    print(
        f"simulated {scenario.agents} agent(s) for {scenario.duration:.0f} s: "
        f"{len(truth.all_crossings)} crossings, "
        f"{truth.sequence.popcount} blocked slots"
    )
    return 0


def _detector_for_trace(trace_window: float, config: SystemConfig) -> DetectorParams:
    w = trace_window / config.slot_duration
    if abs(w - round(w)) > 1e-9 or round(w) < 1:
        raise ConfigError(
            f"trace window of {trace_window} s is not a whole number of "
            f"{config.slot_duration} s slots"
        )
    return DetectorParams(
        tau=config.tau,
        mode=config.detector_mode,
        slot_duration=config.slot_duration,
        w=round(w),
    )


def cmd_detect(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    trace = load_trace(args.trace)
    detector = _detector_for_trace(trace.window_length, config)
    sequence = detect_blockages(trace, detector)
    save_sequences(args.out, [(args.label, sequence)])
    print(f"detected {sequence.popcount} blocked slots out of {sequence.w}")
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    crossing_times, duration = load_crossing_log(args.crossings)
    originals = split_into_windows(
        crossing_times, duration, config.window_minutes, config.slot_duration
    )
    plan = SynthesisPlan(
        m=len(originals),
        max_count=config.max_count,
        w=originals[0].w,
        rng_seed=config.rng_seed,
    )
    try:
        dataset = build_dataset(originals, plan)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    save_dataset(args.out, dataset)
    print(f"built {len(dataset)} samples from m={plan.m} originals (w={plan.w})")
    for label in range(dataset.classes + 1):
        counts = dataset.origin_counts(label)
        print(
            f"  class {label}: {counts['collected']} collected + "
            f"{counts['superposed']} superposed + {counts['noised']} noised"
        )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    dataset = load_dataset(args.dataset, config.slot_duration)
    hyper = TrainHyper(
        learning_rate=config.learning_rate,
        momentum=config.momentum,
        epochs=config.epochs,
        batch_size=config.batch_size,
        rng_seed=config.rng_seed,
    )
    model, losses = train(dataset, config.lstm_hidden, hyper)
    save_model(model, args.out)
    if args.loss_log:
        lines = ["epoch,mean_loss"]
        lines.extend(f"{epoch},{loss!r}" for epoch, loss in enumerate(losses))
        atomic_write_text(args.loss_log, "\n".join(lines) + "\n")
    print(
        f"trained hidden={config.lstm_hidden} on {len(dataset)} samples: "
        f"loss {losses[0]:.4f} -> {losses[-1]:.4f} over {config.epochs} epochs"
    )
    return 0


def cmd_count(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    model = load_model(args.model)
    trace = load_trace(args.trace)
    expected = model.window_slots * model.slot_duration
    if abs(trace.window_length - expected) > 1e-9:
        raise ModelMismatchError(
            f"trace covers {trace.window_length} s but the model was trained "
            f"on {expected} s windows"
        )
    detector = DetectorParams(
        tau=config.tau,
        mode=config.detector_mode,
        slot_duration=model.slot_duration,
        w=model.window_slots,
    )
    sequence = detect_blockages(trace, detector)
    print(predict(model, sequence))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    model = load_model(args.model)
    base = load_scenario(args.scenario) if args.scenario else SimScenario()
    base = replace(base, duration=model.window_slots * model.slot_duration)
    max_count = args.max_count if args.max_count is not None else model.classes - 1
    if max_count >= model.classes:
        raise ConfigError(
            f"cannot evaluate class {max_count}: model only has "
            f"{model.classes} classes"
        )
    seed = args.seed if args.seed is not None else config.rng_seed
    windows = simulate_eval_windows(
        base, range(max_count + 1), args.windows, seed, model.slot_duration
    )
    detector = DetectorParams(
        tau=config.tau,
        mode=config.detector_mode,
        slot_duration=model.slot_duration,
        w=model.window_slots,
    )
    report = evaluate_model(model, detector, windows)
    atomic_write_text(args.out, report.to_csv())
    if args.table:
        atomic_write_text(args.table, report.to_table())
    print(report.to_table(), end="")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list {args.values!r}") from exc
    if not values:
        raise ConfigError("--values is empty")
    base = load_scenario(args.scenario) if args.scenario else SimScenario()
    seed = args.seed if args.seed is not None else config.rng_seed

    if args.parameter == "tau":
        if not args.model:
            raise ConfigError("tau sweep requires --model")
        model = load_model(args.model)
        scenario = replace(base, duration=model.window_slots * model.slot_duration)
        windows = simulate_eval_windows(
            scenario, range(model.classes), args.windows, seed, model.slot_duration
        )
        rows = sweep_tau(values, model, windows, config)
    else:
        if not args.crossings:
            raise ConfigError("window_minutes sweep requires --crossings")
        crossing_times, duration = load_crossing_log(args.crossings)
        rows = sweep_window(
            values, crossing_times, duration, config, base, args.windows, seed
        )
    lines = ["value,epsilon"]
    lines.extend(f"{value!r},{epsilon}" for value, epsilon in rows)
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    for value, epsilon in rows:
        print(f"{args.parameter}={value}: epsilon={epsilon}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="override rng_seed")
    parser.add_argument("--tau", dest="opt_tau", type=float, help="detection threshold (dBm)")
    parser.add_argument(
        "--mode", dest="opt_detector_mode",
        choices=("attenuation", "deviation", "elevation"),
        help="detector direction mode",
    )
    parser.add_argument(
        "--window-minutes", dest="opt_window_minutes", type=float,
        help="counting window length (minutes)",
    )
    parser.add_argument(
        "--max-count-class", dest="opt_max_count", type=int,
        help="largest count class N",
    )
    parser.add_argument(
        "--hidden", dest="opt_lstm_hidden", type=int, help="LSTM layer size"
    )
    parser.add_argument("--epochs", dest="opt_epochs", type=int)
    parser.add_argument("--batch-size", dest="opt_batch_size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkcount",
        description="Device-free human counting from a single WiFi link's "
                    "blockage pattern",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic window")
    p.add_argument("--scenario", help="scenario key=value file")
    p.add_argument("--agents", type=int)
    p.add_argument("--duration", type=float, help="seconds")
    p.add_argument("--out-trace")
    p.add_argument("--out-crossings")
    p.add_argument("--out-truth")
    _add_config_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="RSS trace -> blockage sequence")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label", type=int, default=-1,
                   help="label to store in the sequence file (-1 = unknown)")
    _add_config_options(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synthesize", help="crossing log -> balanced dataset")
    p.add_argument("--crossings", required=True)
    p.add_argument("--out", required=True)
    _add_config_options(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("train", help="dataset -> LSTM model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-log", help="write epoch,mean_loss CSV")
    _add_config_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("count", help="detect + predict on one trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", required=True)
    _add_config_options(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("evaluate", help="score a model over simulated windows")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--table", help="also write the human-readable table here")
    p.add_argument("--scenario", help="scenario key=value file")
    p.add_argument("--windows", type=int, default=20, help="windows per class")
    p.add_argument("--max-count", type=int, help="largest class to evaluate")
    _add_config_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="epsilon across a parameter range")
    p.add_argument("--parameter", required=True, choices=("tau", "window_minutes"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="value,epsilon CSV path")
    p.add_argument("--model", help="trained model (tau sweep)")
    p.add_argument("--crossings", help="crossing log (window sweep)")
    p.add_argument("--scenario", help="scenario key=value file")
    p.add_argument("--windows", type=int, default=20, help="windows per class")
    _add_config_options(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LinkCountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
