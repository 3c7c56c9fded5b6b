import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mfo.schedules import (
    SCHEDULES,
    CosineRecurring,
    CyclePlan,
    CyclicalTriangular,
    FullHorizonCosine,
    FullHorizonStep,
    LinearRecurring,
    StepCondensed,
    condensed_step_milestones,
    make_schedule,
    round_boundaries,
    schedule_trace,
)
from mfo.validation import InvalidPlanError


def spans(eta, s_min, r):
    return [(b.e_start, b.e_end) for b in round_boundaries(eta, s_min, r)]


def test_boundaries_r164():
    assert spans(3, 2, 164) == [(1, 9), (10, 27), (28, 164)]


def test_boundaries_r81_all_smin():
    assert spans(3, 0, 81) == [(1, 1), (2, 3), (4, 9), (10, 27), (28, 81)]
    assert spans(3, 4, 81) == [(1, 81)]


def test_boundaries_reject_infeasible_plan():
    with pytest.raises(InvalidPlanError):
        round_boundaries(3, 2, 8)
    with pytest.raises(ValueError):
        round_boundaries(1, 0, 10)


@given(eta=st.integers(2, 5), s_min=st.integers(0, 5), r=st.integers(1, 2000))
def test_boundaries_tile_one_to_r(eta, s_min, r):
    assume(eta ** s_min <= r)
    b = round_boundaries(eta, s_min, r)
    assert b[0].e_start == 1
    assert b[-1].e_end == r
    for prev, cur in zip(b, b[1:]):
        assert cur.e_start == prev.e_end + 1
        assert cur.s == prev.s + 1
    assert all(x.epochs >= 1 for x in b)


def cycle(epochs, spe=1, start=1):
    return CyclePlan(start, start + epochs - 1, spe)


def test_cosine_endpoints_and_midpoint():
    s = CosineRecurring(0.1)
    c = cycle(9)
    assert s.lr_at(c, 0) == 0.1
    assert s.lr_at(c, 8) == 0.0
    assert math.isclose(s.lr_at(c, 4), 0.05, abs_tol=1e-12)


def test_single_step_cycle_is_constant_l():
    c = cycle(1)
    for kind in ("cosine", "linear", "step", "cyclical"):
        assert make_schedule(kind, 0.3, 1).lr_at(c, 0) == 0.3


def test_lr_outside_cycle_raises():
    with pytest.raises(IndexError):
        CosineRecurring(0.1).lr_at(cycle(3), 3)


def test_condensed_milestones_k9():
    assert condensed_step_milestones((81 / 164, 122 / 164), 9) == [4, 6]


def test_condensed_milestones_clamp_to_one():
    assert condensed_step_milestones((0.1, 0.2), 2) == [1, 1]


def test_step_condensed_plateaus():
    s = StepCondensed(0.1)
    c = cycle(9)
    lrs = [s.lr_at(c, k) for k in range(9)]
    assert lrs[:4] == [0.1] * 4
    assert all(math.isclose(x, 0.01) for x in lrs[4:6])
    assert all(math.isclose(x, 0.001) for x in lrs[6:])


def test_full_step_plateaus_r164():
    s = FullHorizonStep(0.1, 164)
    assert s.milestones == (81, 122)
    assert s.lr_at_epoch(80) == 0.1
    assert math.isclose(s.lr_at_epoch(81), 0.01)
    assert math.isclose(s.lr_at_epoch(121), 0.01)
    assert math.isclose(s.lr_at_epoch(164), 0.001)


def test_full_horizon_schedules_ignore_rounds():
    s = FullHorizonCosine(0.1, 164)
    c = CyclePlan(10, 27, 1)
    assert s.lr_at(c, 0) < 0.1
    t = 163
    assert s.lr_at(CyclePlan(28, 164, 1), 136) == 0.0
    assert math.isclose(s.lr_at(c, 0), 0.05 * (1 + math.cos(math.pi * 9 / t)))


def test_cyclical_triangle_peak():
    s = CyclicalTriangular(0.2)
    c = cycle(5)
    assert [s.lr_at(c, k) for k in range(5)] == [0.0, 0.1, 0.2, 0.1, 0.0]
    floored = CyclicalTriangular(0.2, floor_fraction=0.5)
    assert floored.lr_at(c, 0) == 0.1


recurring = st.sampled_from(["cosine", "linear", "step"])


@given(kind=recurring, lr=st.floats(1e-6, 10.0), epochs=st.integers(1, 60), spe=st.integers(1, 5))
def test_recurring_restart_bounds_and_monotone(kind, lr, epochs, spe):
    s = make_schedule(kind, lr, 200)
    c = cycle(epochs, spe)
    lrs = [s.lr_at(c, k) for k in range(c.total_steps)]
    assert lrs[0] == lr
    assert all(0.0 <= x <= lr for x in lrs)
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))


@given(lr=st.floats(1e-6, 10.0), epochs=st.integers(2, 60), spe=st.integers(1, 5))
def test_cosine_and_linear_end_at_zero(lr, epochs, spe):
    c = cycle(epochs, spe)
    for cls in (CosineRecurring, LinearRecurring):
        assert cls(lr).lr_at(c, c.total_steps - 1) == 0.0


@given(lr=st.floats(1e-6, 10.0), epochs=st.integers(1, 60), floor=st.floats(0.0, 0.99))
def test_cyclical_bounds(lr, epochs, floor):
    s = CyclicalTriangular(lr, floor)
    c = cycle(epochs)
    lrs = [s.lr_at(c, k) for k in range(c.total_steps)]
    assert all(floor * lr * (1 - 1e-12) <= x <= lr for x in lrs)


def test_schedule_trace_cosine_r164():
    trace = dict(schedule_trace("cosine", 0.1, 164))
    assert len(trace) == 164
    for opening in (1, 10, 28):
        assert trace[opening - 1] == 0.1
    for closing in (9, 27, 164):
        assert trace[closing - 1] == 0.0


def test_schedule_trace_full_step():
    trace = [lr for _, lr in schedule_trace("full-step", 0.1, 164)]
    assert sorted(set(round(x, 12) for x in trace), reverse=True) == [0.1, 0.01, 0.001]


def test_schedule_trace_r1():
    assert schedule_trace("cosine", 0.1, 1, s_min=0) == [(0, 0.1)]


def test_unknown_schedule():
    with pytest.raises(ValueError):
        make_schedule("warmup", 0.1, 10)
    assert set(SCHEDULES) == {"cosine", "linear", "step", "cyclical", "full-cosine", "full-step"}


def test_bad_step_parameters():
    with pytest.raises(ValueError):
        StepCondensed(0.1, fractions=(0.7, 0.3))
    with pytest.raises(ValueError):
        StepCondensed(0.1, factor=1.5)
    with pytest.raises(ValueError):
        CosineRecurring(0.0)
