"""``mfo`` command line: run, resume, compare, curves, inspect.

Exit codes: 0 success, 2 bad input (config, compare file or plan), 3 failure while running.
Log verbosity comes from ``MFO_LOG_LEVEL`` (error, info or debug).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from .journal import JournalError, atomic_write
from .runner import ConfigError, ExperimentConfig, resume, run_experiment
from .schedules import SCHEDULES, schedule_trace
from .validation import InfeasibleBudgetError, InvalidPlanError

logger = logging.getLogger("mfo")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

_INPUT_ERRORS = (ConfigError, InvalidPlanError, InfeasibleBudgetError)


class UsageError(ValueError):
    pass


def _setup_logging():
    name = os.environ.get("MFO_LOG_LEVEL", "info").lower()
    if name not in LOG_LEVELS:
        raise UsageError(f"MFO_LOG_LEVEL must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(value):
    return "" if value is None else repr(float(value))


# -- run / resume -------------------------------------------------------------

def cmd_run(args):
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "base_seed": args.seed})
    out = args.out or cfg.output
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'output' in the config")
    result = run_experiment(cfg, workers=args.workers, output=out)
    logger.info("mean best metric %.4f (+/- %s) over %d repetitions", result.mean,
                result.ci_halfwidth, cfg.repetitions)
    return EXIT_OK


def cmd_resume(args):
    result = resume(args.out, workers=args.workers)
    logger.info("mean best metric %.4f", result.mean)
    return EXIT_OK


# -- compare ------------------------------------------------------------------

_SHARED = ("trainer", "space", "sampler", "budget_multiplier", "repetitions", "base_seed")


def load_compare_spec(path):
    """Parse a compare spec into ``[(label, ExperimentConfig)]``.

    A compare file holds ``{"methods": [{"label": str, "scheduler": {...}, ...}], ...}``;
    top-level ``trainer``, ``space``, ``sampler``, ``budget_multiplier``,
    ``repetitions`` and ``base_seed`` act as defaults for every method.
    """
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read compare spec {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict) or not spec.get("methods"):
        raise ConfigError("compare spec needs a non-empty 'methods' list")
    unknown = set(spec) - set(_SHARED) - {"methods", "workers"}
    if unknown:
        raise ConfigError(f"unknown compare spec keys {sorted(unknown)}")
    shared = {k: spec[k] for k in _SHARED if k in spec}
    methods = []
    for entry in spec["methods"]:
        entry = copy.deepcopy(entry)
        label = entry.pop("label", None)
        if not label or not isinstance(label, str):
            raise ConfigError("every method needs a string 'label'")
        methods.append((label, ExperimentConfig.from_dict({**copy.deepcopy(shared), **entry})))
    labels = [label for label, _ in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate labels in {labels}")
    if any("/" in label or label in (".", "..") for label in labels):
        raise ConfigError("labels must be usable as directory names")
    first = methods[0][1]
    for label, cfg in methods[1:]:
        if cfg.r != first.r:
            raise ConfigError(f"method {label!r} has r={cfg.r}, expected r={first.r}")
        if cfg.trainer != first.trainer:
            raise ConfigError(f"method {label!r} uses a different trainer spec")
    return methods, spec.get("workers", 1)


def cmd_compare(args):
    methods, workers = load_compare_spec(args.spec)
    if args.workers is not None:
        workers = args.workers
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves, table = [], []
    for label, cfg in methods:
        logger.info("running %s", label)
        result = run_experiment(cfg, workers=workers, output=out / label)
        for rep in result.repetitions:
            curves.extend((label, rep.repetition, x, repr(float(y))) for x, y in rep.trajectory)
        table.append((label, _fmt(result.mean), _fmt(result.ci_halfwidth)))
    atomic_write(out / "curves.csv", _csv_text(["label", "repetition", "consumed_epochs", "best_metric"], curves))
    atomic_write(out / "summary.csv", _csv_text(["label", "mean", "ci_halfwidth"], table))
    return EXIT_OK


# -- curves / inspect ---------------------------------------------------------

def cmd_curves(args):
    params = json.loads(args.params) if args.params else {}
    try:
        trace = schedule_trace(args.schedule, args.lr, args.r, eta=args.eta, s_min=args.smin,
                               steps_per_epoch=args.steps_per_epoch, **params)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    text = _csv_text(["global_step", "lr"], ((step, repr(lr)) for step, lr in trace))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
    return EXIT_OK


def cmd_inspect(args):
    path = Path(args.path)
    if path.is_dir():
        path = path / "summary.json"
    try:
        summary = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    ci = summary.get("ci_halfwidth")
    print(f"scheduler    {summary.get('scheduler')}  r={summary.get('r')}  budget={summary.get('budget')}")
    print(f"repetitions  {summary.get('repetitions')}")
    print(f"best metric  {summary['mean']:.4f} +/- {'n/a' if ci is None else f'{ci:.4f}'} (95% CI)")
    if "mean_true" in summary:
        print(f"true quality {summary['mean_true']:.4f}")
    best = summary["best"]
    print(f"best config  (rep {best['repetition']}, trial {best['trial_id']}, metric {best['metric']:.4f})")
    for name, value in best["config"].items():
        print(f"  {name:<4} {value}")
    for rep in summary.get("per_repetition", []):
        print(f"  rep {rep['repetition']}: seed {rep['seed']}  best {rep['best_metric']:.4f}"
              f"  configs {rep['n_configs']}  epochs {rep['consumed']}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mfo", description="Multi-fidelity hyperparameter search.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="overrides base_seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue an interrupted run")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("compare", help="run several labelled methods on one trainer")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("curves", help="dump a learning-rate schedule as CSV")
    p.add_argument("--schedule", required=True, choices=sorted(SCHEDULES))
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--eta", type=int, default=3)
    p.add_argument("--smin", type=int, default=2)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--steps-per-epoch", type=int, default=1)
    p.add_argument("--params", help="extra schedule parameters as JSON")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("inspect", help="pretty-print a summary.json")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        return args.func(args)
    except (UsageError, *_INPUT_ERRORS) as exc:
        print(f"mfo {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (JournalError, OSError, RuntimeError, ValueError) as exc:
        print(f"mfo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
