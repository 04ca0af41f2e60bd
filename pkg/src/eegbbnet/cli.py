"""Command-line front end.

Subcommands: ``synth`` (write a synthetic dataset container),
``connectivity`` (dump one trial's adjacency as delimited text), ``run``
(execute a protocol from a JSON config) and ``inspect-checkpoint``.

Every run writes its fully resolved configuration next to its outputs, so
a run can be replayed from the output directory alone.  Report files
contain no timing information and are byte-identical across repeated runs
with the same seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import connectivity as conn
from .errors import EegBbnetError, ParameterError
from .experiment import (
    FINETUNE_GRID,
    generate_synthetic,
    grid_summary_lines,
    history_lines,
    load_dataset,
    report_lines,
    run_cross_session,
    run_cross_task,
    run_electrode_subset,
    run_intra_session,
    save_dataset,
    write_lines,
)
from .model import ModelConfig
from .neural import load_checkpoint
from .signal import instantaneous_phase

PROTOCOLS = ("intra", "cross-session", "cross-task", "subset")

_MODEL_KEYS = {
    "architecture", "conv_kernel", "pool_window", "gconv_dims", "dense_dims",
    "dropout", "learning_rate", "batch_size", "patience", "max_epochs",
    "dtype", "signed_degree",
}
_RUN_KEYS = {
    "protocol", "dataset", "train_dataset", "test_dataset", "measure",
    "subset", "finetune_percents", "repeats", "folds", "seed", "model",
}


def _fail(message: str, kind: str = "error") -> int:
    record = {"error": kind, "message": message}
    print(json.dumps(record), file=sys.stderr)
    return 1


def cmd_synth(args) -> int:
    sessions = ("I", "II") if args.session == "both" else (args.session,)
    dataset = generate_synthetic(
        args.subjects,
        args.trials,
        args.channels,
        args.samples,
        session_shift=args.session_shift,
        seed=args.seed,
        task=args.task,
        sessions=sessions,
        snr_db=args.snr_db,
    )
    if args.session == "both":
        stem = Path(args.output)
        for session in ("I", "II"):
            path = stem.with_name(f"{stem.stem}.session{session}{stem.suffix}")
            save_dataset(dataset.filter(session=session), path)
            print(f"wrote {path}")
    else:
        save_dataset(dataset, args.output)
        print(f"wrote {args.output}")
    return 0


def cmd_connectivity(args) -> int:
    dataset = load_dataset(args.dataset)
    if not 0 <= args.trial < len(dataset.trials):
        raise ParameterError(f"trial index {args.trial} outside [0, {len(dataset.trials)})")
    trial = dataset.trials[args.trial]
    measure = args.measure.upper()
    phase = None
    if measure in ("PLV", "PLI", "RHO"):
        phase = instantaneous_phase(trial)
    adj = conn.measure_matrix(
        measure, trial=trial, layout=dataset.layout, phase=phase,
        seed=args.seed, n_channels=dataset.n_channels,
    )
    if not args.raw and measure not in ("IDN", "RDM"):
        adj = conn.normalize_adjacency(adj)
    lines = ["\t".join(repr(float(v)) for v in row) for row in adj.weights]
    if args.output:
        write_lines(args.output, lines)
        print(f"wrote {args.output}")
    else:
        print("\n".join(lines))
    return 0


def _load_run_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    unknown = set(raw) - _RUN_KEYS
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    if "protocol" not in raw or raw["protocol"] not in PROTOCOLS:
        raise ParameterError(f"config needs a protocol from {PROTOCOLS}")
    if "seed" not in raw:
        raise ParameterError("config needs an explicit seed")
    model_overrides = raw.get("model", {})
    unknown_model = set(model_overrides) - _MODEL_KEYS
    if unknown_model:
        raise ParameterError(f"unknown model config keys: {sorted(unknown_model)}")
    return raw


def _model_config(raw: dict, dataset) -> ModelConfig:
    overrides = dict(raw.get("model", {}))
    for key in ("gconv_dims", "dense_dims"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    return ModelConfig(
        n_channels=dataset.n_channels,
        input_len=dataset.n_samples,
        n_classes=dataset.n_subjects,
        measure=raw.get("measure", "COR").upper(),
        seed=raw["seed"],
        **overrides,
    )


def cmd_run(args) -> int:
    raw = _load_run_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    protocol = raw["protocol"]
    started = time.perf_counter()

    if protocol in ("intra", "subset"):
        if "dataset" not in raw:
            raise ParameterError(f"protocol {protocol!r} needs a 'dataset' path")
        dataset = load_dataset(raw["dataset"])
        config = _model_config(raw, dataset)
        folds = raw.get("folds", 5)
        if protocol == "intra":
            report = run_intra_session(dataset, config, k=folds, n_jobs=args.jobs)
        else:
            if "subset" not in raw:
                raise ParameterError("subset protocol needs a 'subset' group name")
            report = run_electrode_subset(dataset, raw["subset"], config, k=folds, n_jobs=args.jobs)
        reports = [report]
        table = report_lines(report)
        for label, history in zip(report.fold_labels, report.histories):
            write_lines(out_dir / f"history_fold{label}.tsv", history_lines(history))
    else:
        for key in ("train_dataset", "test_dataset"):
            if key not in raw:
                raise ParameterError(f"protocol {protocol!r} needs a {key!r} path")
        train_ds = load_dataset(raw["train_dataset"])
        test_ds = load_dataset(raw["test_dataset"])
        config = _model_config(raw, train_ds)
        percents = raw.get("finetune_percents", [int(round(100 * f)) for f in FINETUNE_GRID])
        fractions = [p / 100.0 for p in percents]
        repeats = raw.get("repeats", 5)
        runner = run_cross_session if protocol == "cross-session" else run_cross_task
        reports = [
            runner(train_ds, test_ds, fraction, config, repeats=repeats)
            for fraction in fractions
        ]
        table = grid_summary_lines(reports)
        for report in reports:
            percent = int(round(100 * report.config_echo["finetune_fraction"]))
            for label, history in zip(report.fold_labels, report.histories):
                write_lines(
                    out_dir / f"history_ft{percent}_rep{label}.tsv", history_lines(history)
                )

    write_lines(out_dir / "report.tsv", table)
    resolved = dict(raw)
    resolved["model_config"] = reports[0].config_echo
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    elapsed = time.perf_counter() - started
    print(f"wrote {out_dir / 'report.tsv'} ({elapsed:.1f}s)", file=sys.stderr)
    for line in table:
        print(line)
    return 0


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value)}")


def cmd_inspect_checkpoint(args) -> int:
    tensors = load_checkpoint(args.checkpoint)
    total = 0
    for name, array in tensors.items():
        print(f"{name}\t{'x'.join(map(str, array.shape))}\tfloat32")
        total += array.size
    print(f"# {len(tensors)} tensors, {total} values")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegbbnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset container")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--trials", type=int, required=True, help="trials per subject per session")
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, required=True,
                   help="explicit seed (required for reproducibility)")
    p.add_argument("--session", choices=("I", "II", "both"), default="I")
    p.add_argument("--session-shift", type=float, default=0.0)
    p.add_argument("--snr-db", type=float, default=5.0)
    p.add_argument("--task", default="SYNTH")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("connectivity", help="dump one trial's adjacency matrix")
    p.add_argument("--dataset", required=True)
    p.add_argument("--trial", type=int, required=True)
    p.add_argument("--measure", required=True,
                   choices=[m.lower() for m in conn.MEASURES])
    p.add_argument("--seed", type=int, default=0, help="seed for the rdm measure")
    p.add_argument("--raw", action="store_true", help="skip [-1, 1] normalization")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_connectivity)

    p = sub.add_parser("run", help="execute a protocol described by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inspect-checkpoint", help="list tensors in a checkpoint")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect_checkpoint)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EegBbnetError as exc:
        return _fail(str(exc), kind=type(exc).__name__)
    except OSError as exc:
        return _fail(str(exc), kind="io")


if __name__ == "__main__":
    sys.exit(main())
