"""Promotion logic for SHA, MORL and Hyperband: plans, costs, and top-1/eta selection."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .schedules import round_boundaries
from .validation import InfeasibleBudgetError, check_eta, check_int, int_log

logger = logging.getLogger(__name__)

RECURRING = "recurring"
FULL_HORIZON = "full_horizon"


@dataclass(frozen=True)
class RoundPlan:
    eta: int
    s_min: int
    r: int
    schedule_mode: str = RECURRING
    boundaries: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.schedule_mode not in (RECURRING, FULL_HORIZON):
            raise ValueError(f"unknown schedule mode {self.schedule_mode!r}")
        object.__setattr__(self, "boundaries", tuple(round_boundaries(self.eta, self.s_min, self.r)))

    @classmethod
    def single_round(cls, r, schedule_mode=FULL_HORIZON):
        """One round spanning all ``r`` epochs: no early stopping at all."""
        eta = 2
        return cls(eta, int_log(r, eta), r, schedule_mode)

    @property
    def n_rounds(self):
        return len(self.boundaries)

    def survivors(self, n):
        """Number of trials entering each round, starting from ``n``."""
        check_int(n, "n", minimum=1)
        counts = [n]
        for _ in self.boundaries[1:]:
            counts.append(promote_count(counts[-1], self.eta))
        return counts


def promote_count(n, eta):
    return max(1, n // eta)


def top_k(results, eta):
    """Trial ids promoted from ``(trial_id, metric)`` pairs: best ``max(1, floor(n/eta))``.

    Higher metrics win; equal metrics go to the smaller trial id.
    """
    results = list(results)
    if not results:
        raise ValueError("top_k needs at least one result")
    k = promote_count(len(results), check_eta(eta))
    ranked = sorted(results, key=lambda item: (-item[1], item[0]))
    return [trial_id for trial_id, _ in ranked[:k]]


def plan_cost(plan, n):
    """Epochs billed by a plan started with ``n`` trials, resuming across rounds."""
    return sum(count * b.epochs for count, b in zip(plan.survivors(n), plan.boundaries))


def solve_n(budget, plan):
    """Largest ``n`` with ``plan_cost(plan, n) <= budget``."""
    if plan_cost(plan, 1) > budget:
        raise InfeasibleBudgetError(
            f"budget {budget} is below the cost of one full trial ({plan_cost(plan, 1)})")
    lo, hi = 1, 2
    while plan_cost(plan, hi) <= budget:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if plan_cost(plan, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class Bracket:
    s_min: int
    plan: RoundPlan
    allocated_budget: int
    n: int


def hyperband_plan(budget, eta, r, inner="morl"):
    """One bracket per ``s_min`` in ``0 .. floor(log_eta r)``, budget split equally.

    The division remainder goes to the ``s_min = 0`` bracket.
    """
    eta = check_eta(eta)
    budget = check_int(budget, "budget", minimum=1)
    mode = _inner_mode(inner)
    n_brackets = int_log(r, eta) + 1
    share, remainder = divmod(budget, n_brackets)
    if share < r:
        raise InfeasibleBudgetError(
            f"budget {budget} over {n_brackets} brackets leaves {share} < r = {r} epochs each")
    brackets = []
    for s in range(n_brackets):
        plan = RoundPlan(eta, s, r, mode)
        allocated = share + (remainder if s == 0 else 0)
        brackets.append(Bracket(s, plan, allocated, solve_n(allocated, plan)))
    return brackets


def _inner_mode(inner):
    try:
        return {"morl": RECURRING, "sha": FULL_HORIZON}[inner]
    except KeyError:
        raise ValueError(f"inner must be 'morl' or 'sha', got {inner!r}") from None


class Status(enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    AWAITING = "awaiting_promotion"
    STOPPED = "stopped"
    COMPLETED = "completed"


_LEGAL = {
    Status.PENDING: {Status.RUNNING},
    Status.RUNNING: {Status.AWAITING},
    Status.AWAITING: {Status.RUNNING, Status.STOPPED, Status.COMPLETED},
    Status.STOPPED: set(),
    Status.COMPLETED: set(),
}


class IllegalTransition(RuntimeError):
    pass


@dataclass
class TrialStatus:
    status: Status = Status.PENDING
    round_s: int | None = None
    metric: float | None = None
    history: list = field(default_factory=list)

    def move(self, status, round_s=None, metric=None):
        if status not in _LEGAL[self.status]:
            raise IllegalTransition(f"{self.status.value} -> {status.value}")
        self.status, self.round_s = status, round_s if round_s is not None else self.round_s
        if metric is not None:
            self.metric = metric
        self.history.append((status.value, self.round_s, self.metric))


@dataclass(frozen=True)
class Assignment:
    """Train ``trial_id`` through the epochs of ``boundary``."""

    trial_id: int
    boundary: object
    schedule_mode: str


@dataclass(frozen=True)
class RoundDecision:
    promoted: list
    stopped: list
    completed: list
    assignments: list

    @property
    def finished(self):
        return not self.assignments


def promotion_step(plan, round_index, round_results, active):
    """Close round ``round_index``: promote, stop or complete every active trial.

    ``active`` lists the trial ids that were scheduled in the round; each must
    appear in ``round_results`` (a mapping ``trial_id -> metric``).
    """
    missing = [tid for tid in active if tid not in round_results]
    if missing:
        raise ValueError(f"missing round reports for trials {missing}")
    results = [(tid, round_results[tid]) for tid in active]
    if round_index == plan.n_rounds - 1:
        return RoundDecision([], [], sorted(active), [])
    promoted = top_k(results, plan.eta)
    chosen = set(promoted)
    stopped = sorted(tid for tid in active if tid not in chosen)
    nxt = plan.boundaries[round_index + 1]
    return RoundDecision(promoted, stopped, [], [Assignment(t, nxt, plan.schedule_mode) for t in promoted])


def morl_step(plan, round_index, round_results, active):
    if plan.schedule_mode != RECURRING:
        raise ValueError("MORL needs a recurring-schedule plan")
    return promotion_step(plan, round_index, round_results, active)


def sha_step(plan, round_index, round_results, active):
    if plan.schedule_mode != FULL_HORIZON:
        raise ValueError("SHA baseline needs a full-horizon plan")
    return promotion_step(plan, round_index, round_results, active)


def select_best(completed):
    """Best ``(trial_id, metric)`` among completed trials, ties to the smaller id."""
    return min(completed, key=lambda item: (-item[1], item[0]))
