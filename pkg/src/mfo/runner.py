"""Experiment orchestration: config parsing, repetitions, persistence and resume.

An experiment directory holds ``records.jsonl`` (the event log), a
``checkpoints/`` folder, and, once finished, ``summary.json`` and
``trajectory.csv``. The log alone is enough to resume an interrupted run.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from .journal import LOG_NAME, Journal, JournalError, atomic_write, read_log, truncate_to_barrier
from .records import BudgetLedger, TrialRecord, best_trajectory
from .samplers import build_sampler
from .schedules import SCHEDULES
from .search import SEARCHES
from .search_space import SearchSpace, default_space
from .trainers import build_trainer
from .validation import check_int

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SUMMARY_NAME = "summary.json"
TRAJECTORY_NAME = "trajectory.csv"

_SCHEDULER_KEYS = {
    "morl": {"r", "eta", "s_min", "schedule"},
    "sha": {"r", "eta", "s_min", "schedule"},
    "hyperband": {"r", "eta", "inner", "schedule"},
    "random": {"r", "schedule"},
}


class ConfigError(ValueError):
    """The experiment config is malformed or inconsistent."""


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's records.

    ``scheduler`` is ``{"kind": "morl"|"sha"|"hyperband"|"random", "r": int,
    "eta": int, "s_min": int, "inner": "morl"|"sha", "schedule": name or {"kind": str,
    "params": {...}}}``; ``sampler`` is ``{"kind": "random"|"tpe", ...,
    "objective": "deepest"|"final"}``; ``trainer`` is a trainer spec such as
    ``{"kind": "surrogate", "steps_per_epoch": 10}``. ``space`` is a list of
    ``{"name", "type", "lo", "hi"}`` entries (the default l/w/m/b space if omitted).
    """

    scheduler: dict
    trainer: dict = field(default_factory=lambda: {"kind": "surrogate"})
    sampler: dict = field(default_factory=lambda: {"kind": "random"})
    space: list | None = None
    budget_multiplier: int = 64
    repetitions: int = 5
    base_seed: int = 0
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        sched = self.scheduler
        if not isinstance(sched, dict) or "kind" not in sched:
            raise ConfigError("scheduler needs a 'kind'")
        kind = sched["kind"]
        if kind not in SEARCHES:
            raise ConfigError(f"unknown scheduler kind {kind!r}; expected one of {sorted(SEARCHES)}")
        if "r" not in sched:
            raise ConfigError("scheduler needs 'r'")
        extra = set(sched) - _SCHEDULER_KEYS[kind] - {"kind"}
        if extra:
            raise ConfigError(f"scheduler {kind!r} does not take {sorted(extra)}")
        schedule = sched.get("schedule")
        if isinstance(schedule, str):
            # shorthand for {"kind": name}
            schedule = {"kind": schedule}
            sched = self.scheduler = {**sched, "schedule": schedule}
        if schedule is not None and not isinstance(schedule, dict):
            raise ConfigError("scheduler 'schedule' must be a name or {'kind': ..., 'params': {...}}")
        if schedule is not None and schedule.get("kind") not in SCHEDULES:
            raise ConfigError(f"unknown schedule kind {schedule.get('kind')!r}")
        check_int(self.budget_multiplier, "budget_multiplier", minimum=1)
        check_int(self.repetitions, "repetitions", minimum=1)
        check_int(self.base_seed, "base_seed", minimum=0)
        check_int(self.workers, "workers", minimum=1)
        self.build_space()
        build_sampler(self.sampler)
        build_trainer(self.trainer, sched["r"], task_seed=self.base_seed)
        search = self.build_search(self.base_seed)
        # raises InfeasibleBudgetError before anything is written
        search._brackets(search._budget())

    @property
    def r(self):
        return self.scheduler["r"]

    @property
    def budget(self):
        return self.budget_multiplier * self.r

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def identity(self):
        """The part of the config that determines the records (not where or how fast)."""
        data = self.to_dict()
        data.pop("output")
        data.pop("workers")
        return data

    def build_space(self):
        return default_space() if self.space is None else SearchSpace.from_spec(self.space)

    def build_search(self, seed, workers=1):
        sched = dict(self.scheduler)
        kind = sched.pop("kind")
        schedule = sched.pop("schedule", None) or {}
        params = dict(sched)
        if schedule:
            params["schedule"] = schedule["kind"]
            params["schedule_params"] = dict(schedule.get("params") or {})
        return SEARCHES[kind](
            **params,
            sampler=build_sampler(self.sampler),
            space=self.build_space(),
            budget_multiplier=self.budget_multiplier,
            objective=(self.sampler or {}).get("objective", "deepest"),
            n_workers=workers,
            random_state=seed,
        )


def confidence_halfwidth(values, level=0.95):
    """Two-sided t-interval half-width ``t_{(1+level)/2, k-1} * s / sqrt(k)``; NaN for k < 2."""
    values = np.asarray(values, dtype=float)
    k = values.size
    if k < 2:
        return math.nan
    s = values.std(ddof=1)
    return float(stats.t.ppf(0.5 + level / 2, k - 1) * s / math.sqrt(k))


@dataclass
class RepetitionResult:
    repetition: int
    seed: int
    best_trial_id: int
    best_metric: float
    best_config: dict
    best_true: float | None
    consumed: int
    n_configs: int
    trajectory: list = field(default_factory=list, repr=False)
    trials: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "repetition": self.repetition, "seed": self.seed, "best_trial_id": self.best_trial_id,
            "best_metric": self.best_metric, "best_config": self.best_config,
            "best_true": self.best_true, "consumed": self.consumed, "n_configs": self.n_configs,
        }


@dataclass
class ExperimentResult:
    summary: dict
    repetitions: list = field(default_factory=list)

    @property
    def mean(self):
        return self.summary["mean"]

    @property
    def ci_halfwidth(self):
        return self.summary["ci_halfwidth"]

    @property
    def best_config(self):
        return self.summary["best"]["config"]

    @property
    def trajectory(self):
        return mean_trajectory([rep.trajectory for rep in self.repetitions])


def mean_trajectory(trajectories):
    """Average several ``(consumed, best)`` curves sharing the same x grid."""
    trajectories = [t for t in trajectories if t]
    if not trajectories:
        return []
    xs = [x for x, _ in trajectories[0]]
    for t in trajectories[1:]:
        if [x for x, _ in t] != xs:
            raise ValueError("trajectories do not share an x grid")
    ys = np.mean([[y for _, y in t] for t in trajectories], axis=0)
    return list(zip(xs, ys.tolist()))


def _json_number(value):
    return None if value is None or not math.isfinite(value) else value


def _summarize(cfg, reps):
    bests = [rep.best_metric for rep in reps]
    top = min(reps, key=lambda rep: (-rep.best_metric, rep.repetition))
    trues = [rep.best_true for rep in reps if rep.best_true is not None]
    summary = {
        "version": FORMAT_VERSION,
        "scheduler": cfg.scheduler["kind"],
        "r": cfg.r,
        "budget": cfg.budget,
        "repetitions": len(reps),
        "mean": float(np.mean(bests)),
        "ci_halfwidth": _json_number(confidence_halfwidth(bests)),
        "best": {"repetition": top.repetition, "trial_id": top.best_trial_id,
                 "metric": top.best_metric, "config": top.best_config},
        "per_repetition": [rep.to_dict() for rep in reps],
    }
    if len(trues) == len(reps):
        summary["mean_true"] = float(np.mean(trues))
        summary["ci_halfwidth_true"] = _json_number(confidence_halfwidth(trues))
    return summary


def trajectory_csv(points):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["consumed_epochs", "best_metric"])
    for x, y in points:
        writer.writerow([x, repr(float(y))])
    return buf.getvalue()


def run_repetition(cfg, rep, journal=None, workers=1):
    seed = cfg.base_seed + rep
    trainer = build_trainer(cfg.trainer, cfg.r, task_seed=seed)
    if journal is not None:
        journal.emit("rep_start", rep=rep, seed=seed)
    search = cfg.build_search(seed, workers).fit(trainer, journal=journal, rep=rep)
    quality = getattr(trainer, "true_quality", None)
    result = RepetitionResult(
        repetition=rep, seed=seed, best_trial_id=search.best_trial_id_,
        best_metric=float(search.best_score_), best_config=search.best_config_.to_json(),
        best_true=float(quality(search.best_config_)) if quality else None,
        consumed=search.ledger_.consumed, n_configs=search.n_configs_,
        trajectory=search.trajectory_, trials=search.trials_,
    )
    if journal is not None:
        journal.emit("rep_end", **result.to_dict())
        journal.flush()
    logger.info("repetition %d: best %.4f after %d epochs", rep, result.best_metric, result.consumed)
    return result


def run_experiment(cfg, workers=None, output=None, _replay=()):
    """Run every repetition of ``cfg``; persists to ``output`` (or ``cfg.output``) if set."""
    workers = cfg.workers if workers is None else check_int(workers, "workers", minimum=1)
    output = output if output is not None else cfg.output
    journal = Journal(output, replay=_replay) if output is not None else None
    try:
        if journal is not None:
            journal.emit("experiment", version=FORMAT_VERSION, config=cfg.identity())
        reps = [run_repetition(cfg, i, journal, workers) for i in range(cfg.repetitions)]
        summary = _summarize(cfg, reps)
        if journal is not None:
            journal.emit("experiment_end", summary=summary)
            journal.flush()
    finally:
        if journal is not None:
            journal.close()
    result = ExperimentResult(summary, reps)
    if output is not None:
        write_outputs(output, result)
    return result


def write_outputs(output, result):
    output = Path(output)
    atomic_write(output / SUMMARY_NAME, json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    atomic_write(output / TRAJECTORY_NAME, trajectory_csv(result.trajectory))


def resume(output, workers=None):
    """Continue the experiment logged in ``output``.

    A finished run is returned as stored. Otherwise the log is cut back to the
    last barrier and the run is replayed from it, which re-derives every
    decision and checks it against the log before training anything new.
    """
    path = Path(output) / LOG_NAME
    if not path.exists():
        raise JournalError(f"no event log at {path}")
    events = read_log(path)
    if not events or events[0]["type"] != "experiment":
        raise JournalError(f"{path} does not start with an experiment header")
    header = events[0]
    if header["version"] != FORMAT_VERSION:
        raise JournalError(f"log format {header['version']} is not supported")
    cfg = ExperimentConfig.from_dict(dict(header["config"]))
    if events[-1]["type"] == "experiment_end":
        summary = events[-1]["summary"]
        summary_path = Path(output) / SUMMARY_NAME
        if not summary_path.exists():
            atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return ExperimentResult(summary)
    return run_experiment(cfg, workers=workers, output=output, _replay=truncate_to_barrier(events))


__all__ = [
    "BudgetLedger", "ConfigError", "ExperimentConfig", "ExperimentResult", "RepetitionResult",
    "TrialRecord", "best_trajectory", "confidence_halfwidth", "mean_trajectory", "resume",
    "run_experiment", "run_repetition", "trajectory_csv",
]
