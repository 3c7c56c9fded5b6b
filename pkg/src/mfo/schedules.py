"""Learning-rate schedules and round-boundary arithmetic.

Recurring schedules are condensed into one promotion round and restart at the
initial learning rate every round. Full-horizon schedules ignore rounds and are
evaluated at the global epoch position inside ``[1, r]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .validation import InvalidPlanError, check_eta, check_int, check_real, int_log

BASELINE_STEP_FRACTIONS = (81 / 164, 122 / 164)
BASELINE_STEP_FACTOR = 0.1


@dataclass(frozen=True)
class RoundBoundary:
    s: int
    e_start: int
    e_end: int

    @property
    def epochs(self):
        return self.e_end - self.e_start + 1


def round_boundaries(eta, s_min, r):
    """Epoch ranges of the promotion rounds for exponents ``s_min .. floor(log_eta r)``.

    The first round starts at epoch 1 and every other round at ``eta**(s-1) + 1``;
    rounds end at ``eta**s`` except the last one, which ends at ``r``.
    """
    eta = check_eta(eta)
    s_min = check_int(s_min, "s_min", minimum=0)
    r = check_int(r, "r", minimum=1)
    if eta ** s_min > r:
        raise InvalidPlanError(f"eta**s_min = {eta ** s_min} exceeds r = {r}")
    s_max = int_log(r, eta)
    out = []
    for s in range(s_min, s_max + 1):
        e_start = 1 if s == s_min else eta ** (s - 1) + 1
        e_end = r if s == s_max else eta ** s
        out.append(RoundBoundary(s, e_start, e_end))
    return out


@dataclass(frozen=True)
class CyclePlan:
    e_start: int
    e_end: int
    steps_per_epoch: int

    def __post_init__(self):
        check_int(self.steps_per_epoch, "steps_per_epoch", minimum=1)
        if self.e_start < 1 or self.e_end < self.e_start:
            raise ValueError(f"bad cycle epochs [{self.e_start}, {self.e_end}]")

    @property
    def total_steps(self):
        return (self.e_end - self.e_start + 1) * self.steps_per_epoch

    @classmethod
    def for_round(cls, boundary, steps_per_epoch):
        return cls(boundary.e_start, boundary.e_end, steps_per_epoch)


def _progress(k, K):
    return 0.0 if K == 1 else k / (K - 1)


def condensed_step_milestones(fractions, cycle):
    """Step indices where a condensed step schedule decays, ``floor(f * K)`` clamped to >= 1."""
    _check_fractions(fractions)
    K = cycle if isinstance(cycle, int) else cycle.total_steps
    return [max(1, math.floor(f * K)) for f in fractions]


def _check_fractions(fractions):
    prev = 0.0
    for f in fractions:
        if not 0.0 < f < 1.0 or f <= prev:
            raise ValueError(f"milestone fractions must be strictly increasing in (0, 1): {fractions}")
        prev = f


class LrSchedule:
    """Base class. ``init_lr`` is the trial's own learning rate ``l``."""

    recurring = True
    name = "base"

    def __init__(self, init_lr):
        self.init_lr = check_real(init_lr, "init_lr", low=0.0, low_inclusive=False)

    def lr_at(self, cycle, k):
        K = cycle.total_steps
        if isinstance(k, bool) or not 0 <= k < K:
            raise IndexError(f"step {k} outside cycle of {K} steps")
        return self._lr(cycle, k)

    def _lr(self, cycle, k):
        raise NotImplementedError

    def params(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in {"init_lr": self.init_lr, **self.params()}.items())
        return f"{type(self).__name__}({args})"


class CosineRecurring(LrSchedule):
    name = "cosine"

    def _lr(self, cycle, k):
        t = _progress(k, cycle.total_steps)
        if t == 1.0:
            return 0.0
        return 0.5 * self.init_lr * (1.0 + math.cos(math.pi * t))


class LinearRecurring(LrSchedule):
    name = "linear"

    def _lr(self, cycle, k):
        return self.init_lr * (1.0 - _progress(k, cycle.total_steps))


class StepCondensed(LrSchedule):
    name = "step"

    def __init__(self, init_lr, fractions=BASELINE_STEP_FRACTIONS, factor=BASELINE_STEP_FACTOR):
        super().__init__(init_lr)
        _check_fractions(fractions)
        self.fractions = tuple(float(f) for f in fractions)
        self.factor = check_real(factor, "factor", 0.0, 1.0, False, False)

    def _lr(self, cycle, k):
        j = sum(k >= m for m in condensed_step_milestones(self.fractions, cycle))
        return self.init_lr * self.factor ** j

    def params(self):
        return {"fractions": list(self.fractions), "factor": self.factor}


class CyclicalTriangular(LrSchedule):
    """Linear rise from ``floor_fraction * l`` to ``l`` at mid-cycle, then back down."""

    name = "cyclical"

    def __init__(self, init_lr, floor_fraction=0.0):
        super().__init__(init_lr)
        self.floor_fraction = check_real(floor_fraction, "floor_fraction", 0.0, 1.0, True, False)

    def _lr(self, cycle, k):
        K = cycle.total_steps
        if K == 1:
            return self.init_lr
        t = _progress(k, K)
        f = self.floor_fraction
        return self.init_lr * (f + (1.0 - f) * (1.0 - abs(2.0 * t - 1.0)))

    def params(self):
        return {"floor_fraction": self.floor_fraction}


class FullHorizonCosine(LrSchedule):
    recurring = False
    name = "full-cosine"

    def __init__(self, init_lr, horizon):
        super().__init__(init_lr)
        self.horizon = check_int(horizon, "horizon", minimum=1)

    def _lr(self, cycle, k):
        total = self.horizon * cycle.steps_per_epoch
        g = (cycle.e_start - 1) * cycle.steps_per_epoch + k
        t = _progress(g, total)
        if t == 1.0:
            return 0.0
        return 0.5 * self.init_lr * (1.0 + math.cos(math.pi * t))

    def params(self):
        return {"horizon": self.horizon}


class FullHorizonStep(LrSchedule):
    """Step decay at global epochs; epoch ``e`` is decayed once for every milestone ``<= e``."""

    recurring = False
    name = "full-step"

    def __init__(self, init_lr, horizon, milestones=None, factor=BASELINE_STEP_FACTOR):
        super().__init__(init_lr)
        self.horizon = check_int(horizon, "horizon", minimum=1)
        if milestones is None:
            milestones = [max(1, math.floor(f * self.horizon)) for f in BASELINE_STEP_FRACTIONS]
        self.milestones = tuple(int(m) for m in milestones)
        if list(self.milestones) != sorted(self.milestones):
            raise ValueError(f"milestones must be increasing: {self.milestones}")
        self.factor = check_real(factor, "factor", 0.0, 1.0, False, False)

    def lr_at_epoch(self, epoch):
        return self.init_lr * self.factor ** sum(epoch >= m for m in self.milestones)

    def _lr(self, cycle, k):
        return self.lr_at_epoch(cycle.e_start + k // cycle.steps_per_epoch)

    def params(self):
        return {"horizon": self.horizon, "milestones": list(self.milestones), "factor": self.factor}


SCHEDULES = {cls.name: cls for cls in (
    CosineRecurring, LinearRecurring, StepCondensed, CyclicalTriangular,
    FullHorizonCosine, FullHorizonStep,
)}


def lr_at(schedule, cycle, k):
    return schedule.lr_at(cycle, k)


def make_schedule(kind, init_lr, r, **params):
    """Build a schedule for one trial. ``r`` sets the horizon of full-horizon kinds."""
    try:
        cls = SCHEDULES[kind]
    except KeyError:
        raise ValueError(f"unknown schedule kind {kind!r}; choose from {sorted(SCHEDULES)}") from None
    if not cls.recurring:
        params.setdefault("horizon", r)
    return cls(init_lr, **params)


def schedule_trace(kind, init_lr, r, eta=3, s_min=2, steps_per_epoch=1, **params):
    """Global ``(step, lr)`` pairs over the whole horizon, one cycle per round."""
    schedule = make_schedule(kind, init_lr, r, **params)
    out = []
    step = 0
    for boundary in round_boundaries(eta, s_min, r):
        cycle = CyclePlan.for_round(boundary, steps_per_epoch)
        for k in range(cycle.total_steps):
            out.append((step, schedule.lr_at(cycle, k)))
            step += 1
    return out
