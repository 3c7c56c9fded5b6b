"""Estimator front-ends for MORL, SHA, Hyperband and random search.

Every search follows the scikit-learn conventions: hyperparameters are
constructor arguments (so ``get_params``/``set_params``/``clone`` work),
``fit(trainer)`` runs the optimisation, and learned results end in ``_``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator

from .journal import JournalError
from .records import BudgetLedger, TrialRecord, best_trajectory
from .samplers import Observation, RandomSampler, TPESampler
from .schedulers import (
    FULL_HORIZON,
    RECURRING,
    RoundPlan,
    Status,
    hyperband_plan,
    promotion_step,
    select_best,
    solve_n,
)
from .schedules import SCHEDULES, CyclePlan, make_schedule
from .search_space import Config, default_space
from .trainers.base import EpochReport
from .validation import check_eta, check_int, derive_seed

logger = logging.getLogger(__name__)

_SUGGEST_KEY = 101
_TRIAL_KEY = 0x7121


def _split(n, parts):
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _train_range(trainer, state, schedule, boundary, e_from, e_to):
    """Train epochs ``e_from..e_to`` of ``boundary``'s cycle; returns (state, reports)."""
    cycle = CyclePlan.for_round(boundary, state.steps_per_epoch)
    spe = state.steps_per_epoch
    reports = []
    for epoch in range(e_from, e_to + 1):
        offset = (epoch - boundary.e_start) * spe
        state, report = trainer.train_epoch(state, lambda i, o=offset: schedule.lr_at(cycle, o + i))
        reports.append(report)
    return state, reports


class _Driver:
    """Runs a list of ``(plan, n)`` brackets for one repetition."""

    def __init__(self, search, trainer, brackets, budget, seed, journal=None, rep=0):
        self.search = search
        self.trainer = trainer
        self.brackets = brackets
        self.seed = int(seed)
        self.journal = journal
        self.rep = rep
        self.space = search.space if search.space is not None else default_space()
        self.sampler = search.sampler if search.sampler is not None else RandomSampler()
        self.ledger = BudgetLedger(budget)
        self.records = {}
        self.states = {}
        self.points = []
        self._next_id = 1
        self._pool = None

    # -- helpers --------------------------------------------------------------
    def _schedule(self, config, plan):
        kind = self.search._schedule_kind(plan.schedule_mode)
        return make_schedule(kind, config["l"], plan.r, **(self.search.schedule_params or {}))

    def _history(self):
        out = []
        for rec in self.records.values():
            if self.search.objective == "final":
                if rec.status.status is Status.COMPLETED:
                    out.append(Observation(rec.config, rec.status.metric))
            elif rec.deepest_metric is not None:
                out.append(Observation(rec.config, rec.deepest_metric))
        return out

    def _emit(self, event_type, **payload):
        if self.journal is not None:
            self.journal.emit(event_type, rep=self.rep, **payload)

    def _state(self, tid):
        state = self.states.get(tid)
        if state is None:
            blob = self.journal.load_checkpoint(self.records[tid].checkpoint)
            state = self.trainer.restore(blob)
            self.states[tid] = state
        return state

    # -- execution ------------------------------------------------------------
    def run(self):
        workers = self.search.n_workers or 1
        if workers > 1:
            self._pool = ThreadPoolExecutor(max_workers=workers)
        try:
            for bi, (plan, n) in enumerate(self.brackets):
                self._run_bracket(bi, plan, n)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
        completed = [(r.trial_id, r.status.metric) for r in self.records.values()
                     if r.status.status is Status.COMPLETED]
        return select_best(completed)

    def _run_bracket(self, bi, plan, n):
        active = []
        gens = _split(n, getattr(self.sampler, "generations", 1) if isinstance(self.sampler, TPESampler) else 1)
        first = plan.boundaries[0]
        for g, size in enumerate(gens):
            unit = f"r{self.rep}/b{bi}/s{first.s}/g{g}"
            last = g == len(gens) - 1
            if self.journal is not None and self.journal.unit_done(unit):
                active += self._replay(unit, plan, 0)
                continue
            rng = np.random.default_rng(derive_seed(self.seed, _SUGGEST_KEY, bi, g))
            history = self._history()
            new = []
            for _ in range(size):
                config, diag = self.sampler.suggest(history, rng, self.space)
                tid = self._new_trial(config, bi, diag, unit)
                new.append(tid)
            active += new
            self._train_group(unit, new, plan, 0)
            if last:
                self._promote(unit, plan, 0, active)
            self._barrier(unit, new)
        active = self._advance(plan, 0, active)
        for ri in range(1, plan.n_rounds):
            unit = f"r{self.rep}/b{bi}/s{plan.boundaries[ri].s}/g0"
            if self.journal is not None and self.journal.unit_done(unit):
                self._replay(unit, plan, ri)
            else:
                self._train_group(unit, active, plan, ri)
                self._promote(unit, plan, ri, active)
                self._barrier(unit, active)
            active = self._advance(plan, ri, active)

    def _new_trial(self, config, bracket, diag, unit):
        tid = self._next_id
        self._next_id += 1
        config = Config(dict(config), config.tag)
        self.space.validate(config)
        rec = TrialRecord(tid, config, bracket, diagnostic=diag)
        self.records[tid] = rec
        self.states[tid] = self.trainer.init(config, derive_seed(self.seed, _TRIAL_KEY, tid))
        self._emit("suggest", unit=unit, trial_id=tid, config=config.to_json(), tag=config.tag,
                   bracket=bracket, diagnostic=diag)
        return tid

    def _train_group(self, unit, tids, plan, ri):
        boundary = plan.boundaries[ri]
        jobs = []
        for tid in tids:
            rec = self.records[tid]
            if rec.status.status is Status.PENDING:
                rec.status.move(Status.RUNNING, boundary.s)
            jobs.append((tid, self._schedule(rec.config, plan)))

        def work(job, blob=None):
            tid, schedule = job
            state = self.trainer.restore(blob) if blob is not None else self._state(tid)
            state, reports = _train_range(self.trainer, state, schedule, boundary,
                                          boundary.e_start, boundary.e_end)
            return (self.trainer.checkpoint(state) if blob is not None else state), reports

        if self._pool is None:
            results = [work(job) for job in jobs]
        else:
            blobs = [self.trainer.checkpoint(self._state(tid)) for tid, _ in jobs]
            futures = [self._pool.submit(work, job, blob) for job, blob in zip(jobs, blobs)]
            results = [f.result() for f in futures]
            results = [(self.trainer.restore(blob), reports) for blob, reports in results]
        for (tid, _), (state, reports) in zip(jobs, results):
            self.states[tid] = state
            for rep, consumed in zip(reports, self._apply_reports(tid, reports)):
                self._emit("epoch", unit=unit, trial_id=tid, epoch=rep.epoch,
                           val_metric=rep.val_metric, final_step_lr=rep.final_step_lr,
                           consumed=consumed)
            self.records[tid].status.move(Status.AWAITING, boundary.s, reports[-1].val_metric)

    def _apply_reports(self, tid, reports):
        rec = self.records[tid]
        billed = []
        for rep in reports:
            rec.add_report(rep)
            consumed = self.ledger.bill(tid)
            self.points.append((consumed, rep.val_metric))
            billed.append(consumed)
        return billed

    def _promote(self, unit, plan, ri, active):
        results = {tid: self.records[tid].status.metric for tid in active}
        decision = promotion_step(plan, ri, results, active)
        self._emit("promotion", unit=unit, round=plan.boundaries[ri].s, promoted=decision.promoted,
                   stopped=decision.stopped, completed=decision.completed)

    def _barrier(self, unit, tids):
        refs = {}
        if self.journal is not None:
            for tid in tids:
                state = self.states[tid]
                ref = self.journal.save_checkpoint(
                    f"r{self.rep}_t{tid}_e{state.epochs_trained}.mft", self.trainer.checkpoint(state))
                self.records[tid].checkpoint = ref
                refs[str(tid)] = ref
        self._emit("barrier", unit=unit, checkpoints=refs, consumed=self.ledger.consumed)
        if self.journal is not None:
            self.journal.flush()

    def _advance(self, plan, ri, active):
        decision = promotion_step(plan, ri, {t: self.records[t].status.metric for t in active}, active)
        nxt = plan.boundaries[ri + 1].s if decision.assignments else None
        for tid in decision.promoted:
            self.records[tid].status.move(Status.RUNNING, nxt)
        for tid in decision.stopped:
            self.records[tid].status.move(Status.STOPPED)
            self.states.pop(tid, None)
        for tid in decision.completed:
            rec = self.records[tid]
            rec.status.move(Status.COMPLETED, metric=rec.status.metric)
            self.states.pop(tid, None)
        return [a.trial_id for a in decision.assignments]

    def _replay(self, unit, plan, ri):
        boundary = plan.boundaries[ri]
        created = []
        reports = {}
        logged_promotion = None
        for event in self.journal.take_unit(unit):
            kind = event["type"]
            if kind == "suggest":
                tid = event["trial_id"]
                if tid != self._next_id:
                    raise RuntimeError(f"log trial id {tid} out of sequence")
                self._next_id += 1
                config = Config.from_json(event["config"], event["tag"])
                self.records[tid] = TrialRecord(tid, config, event["bracket"], diagnostic=event["diagnostic"])
                created.append(tid)
            elif kind == "epoch":
                reports.setdefault(event["trial_id"], []).append(
                    EpochReport(event["epoch"], event["val_metric"], event["final_step_lr"]))
            elif kind == "promotion":
                logged_promotion = event
            elif kind == "barrier":
                for tid, ref in event["checkpoints"].items():
                    self.records[int(tid)].checkpoint = ref
                    self.states.pop(int(tid), None)
        for tid in sorted(reports):
            rec = self.records[tid]
            if rec.status.status is Status.PENDING:
                rec.status.move(Status.RUNNING, boundary.s)
            self._apply_reports(tid, reports[tid])
            rec.status.move(Status.AWAITING, boundary.s, reports[tid][-1].val_metric)
        if logged_promotion is not None:
            active = logged_promotion["promoted"] + logged_promotion["stopped"] + logged_promotion["completed"]
            decision = promotion_step(plan, ri, {t: self.records[t].status.metric for t in active}, sorted(active))
            if (decision.promoted, decision.stopped, decision.completed) != (
                    logged_promotion["promoted"], logged_promotion["stopped"], logged_promotion["completed"]):
                raise JournalError(f"logged promotion of {unit!r} disagrees with the logged metrics")
        return created


class _BaseSearch(BaseEstimator):
    """Shared machinery; subclasses define the bracket layout."""

    def _schedule_kind(self, mode):
        kind = self.schedule
        if kind is None:
            kind = "cosine" if mode == RECURRING else "full-step"
        if SCHEDULES[kind].recurring != (mode == RECURRING):
            raise ValueError(f"schedule {kind!r} does not fit a {mode} plan")
        return kind

    def _budget(self):
        if self.budget is not None:
            return check_int(self.budget, "budget", minimum=1)
        return check_int(self.budget_multiplier, "budget_multiplier", minimum=1) * self.r

    def _brackets(self, budget):
        raise NotImplementedError

    def fit(self, trainer, journal=None, rep=0):
        """Run the search against ``trainer``; returns ``self``."""
        check_int(self.r, "r", minimum=1)
        if self.objective not in ("deepest", "final"):
            raise ValueError(f"objective must be 'deepest' or 'final', got {self.objective!r}")
        budget = self._budget()
        brackets = self._brackets(budget)
        seed = 0 if self.random_state is None else self.random_state
        driver = _Driver(self, trainer, brackets, budget, seed, journal, rep)
        best_id, best_metric = driver.run()
        self.brackets_ = [(plan, n) for plan, n in brackets]
        self.n_configs_ = sum(n for _, n in brackets)
        self.trials_ = [driver.records[t] for t in sorted(driver.records)]
        self.ledger_ = driver.ledger
        self.trajectory_ = best_trajectory(driver.points)
        self.best_trial_id_ = best_id
        self.best_score_ = best_metric
        self.best_config_ = driver.records[best_id].config
        self.best_params_ = dict(self.best_config_)
        return self


class MORLSearch(_BaseSearch):
    """Successive halving with a learning-rate schedule that restarts every round.

    Parameters
    ----------
    r : int
        Maximum resource (epochs of a full training).
    eta : int, default 3
        Reduction factor.
    s_min : int, default 2
        Minimum exponent; the first round trains ``eta**s_min`` epochs.
    schedule : str or None
        Recurring schedule kind (``cosine``, ``step``, ``cyclical``, ``linear``).
    """

    def __init__(self, r=81, eta=3, s_min=2, schedule="cosine", schedule_params=None,
                 sampler=None, space=None, budget=None, budget_multiplier=64, n_configs=None,
                 objective="deepest", n_workers=1, random_state=None):
        self.r = r
        self.eta = eta
        self.s_min = s_min
        self.schedule = schedule
        self.schedule_params = schedule_params
        self.sampler = sampler
        self.space = space
        self.budget = budget
        self.budget_multiplier = budget_multiplier
        self.n_configs = n_configs
        self.objective = objective
        self.n_workers = n_workers
        self.random_state = random_state

    _mode = RECURRING

    def _brackets(self, budget):
        plan = RoundPlan(check_eta(self.eta), self.s_min, self.r, self._mode)
        n = self.n_configs if self.n_configs is not None else solve_n(budget, plan)
        return [(plan, n)]


class SuccessiveHalvingSearch(MORLSearch):
    """SHA baseline: one un-restarted schedule over ``[1, r]`` sliced at rung ends."""

    def __init__(self, r=81, eta=3, s_min=2, schedule="full-step", schedule_params=None,
                 sampler=None, space=None, budget=None, budget_multiplier=64, n_configs=None,
                 objective="deepest", n_workers=1, random_state=None):
        super().__init__(r, eta, s_min, schedule, schedule_params, sampler, space, budget,
                         budget_multiplier, n_configs, objective, n_workers, random_state)

    _mode = FULL_HORIZON


class HyperbandSearch(_BaseSearch):
    """Grid over ``s_min`` with equal budget per bracket; ``inner`` picks MORL or SHA rounds."""

    def __init__(self, r=81, eta=3, inner="morl", schedule=None, schedule_params=None,
                 sampler=None, space=None, budget=None, budget_multiplier=64,
                 objective="deepest", n_workers=1, random_state=None):
        self.r = r
        self.eta = eta
        self.inner = inner
        self.schedule = schedule
        self.schedule_params = schedule_params
        self.sampler = sampler
        self.space = space
        self.budget = budget
        self.budget_multiplier = budget_multiplier
        self.objective = objective
        self.n_workers = n_workers
        self.random_state = random_state

    def _brackets(self, budget):
        return [(b.plan, b.n) for b in hyperband_plan(budget, self.eta, self.r, self.inner)]


class RandomSearch(_BaseSearch):
    """Full training of ``floor(budget / r)`` configurations, no early stopping."""

    def __init__(self, r=81, schedule="full-step", schedule_params=None, sampler=None,
                 space=None, budget=None, budget_multiplier=64, objective="deepest",
                 n_workers=1, random_state=None):
        self.r = r
        self.schedule = schedule
        self.schedule_params = schedule_params
        self.sampler = sampler
        self.space = space
        self.budget = budget
        self.budget_multiplier = budget_multiplier
        self.objective = objective
        self.n_workers = n_workers
        self.random_state = random_state

    def _brackets(self, budget):
        kind = self.schedule or "full-step"
        mode = RECURRING if SCHEDULES[kind].recurring else FULL_HORIZON
        plan = RoundPlan.single_round(self.r, mode)
        return [(plan, solve_n(budget, plan))]


SEARCHES = {
    "morl": MORLSearch,
    "sha": SuccessiveHalvingSearch,
    "hyperband": HyperbandSearch,
    "random": RandomSearch,
}
