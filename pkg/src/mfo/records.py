"""Per-trial bookkeeping and the epoch-unit budget ledger."""

from __future__ import annotations

from dataclasses import dataclass, field

from .schedulers import TrialStatus


class BudgetExceededError(RuntimeError):
    pass


@dataclass
class TrialRecord:
    trial_id: int
    config: object
    bracket: int = 0
    status: TrialStatus = field(default_factory=TrialStatus)
    curve: list = field(default_factory=list)
    epochs_billed: int = 0
    checkpoint: dict | None = None
    diagnostic: float | None = None

    @property
    def deepest_metric(self):
        """Metric at the end of the trial's last finished round, or None."""
        return self.status.metric

    @property
    def final_metric(self):
        return self.curve[-1].val_metric if self.curve else None

    def add_report(self, report):
        expected = len(self.curve) + 1
        if report.epoch != expected:
            raise ValueError(f"trial {self.trial_id}: epoch {report.epoch} reported, expected {expected}")
        self.curve.append(report)
        self.epochs_billed += 1


class BudgetLedger:
    """Epochs consumed against a fixed budget, with a per-trial breakdown."""

    def __init__(self, budget):
        self.budget = int(budget)
        self.consumed = 0
        self.per_trial = {}

    def bill(self, trial_id, epochs=1):
        if self.consumed + epochs > self.budget:
            raise BudgetExceededError(
                f"billing {epochs} epoch(s) to trial {trial_id} exceeds budget {self.budget}")
        self.consumed += epochs
        self.per_trial[trial_id] = self.per_trial.get(trial_id, 0) + epochs
        return self.consumed

    @property
    def remaining(self):
        return self.budget - self.consumed


def best_trajectory(events):
    """Running best metric against ledger consumption.

    ``events`` is an iterable of ``(consumed_epochs, metric)`` in billing order,
    or of :class:`TrialRecord` objects whose curves are concatenated in order.
    """
    points = []
    best = float("-inf")
    consumed = 0
    for item in events:
        if isinstance(item, TrialRecord):
            for report in item.curve:
                consumed += 1
                best = max(best, report.val_metric)
                points.append((consumed, best))
        else:
            consumed, metric = item
            best = max(best, metric)
            points.append((consumed, best))
    return points
