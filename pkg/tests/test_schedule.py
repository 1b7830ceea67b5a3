import math

import pytest

from ms_steer import schedule as sch


@pytest.mark.parametrize("t, expected", [
    (1.0, 0.0), (0.97, 0.0), (0.95, 0.5), (0.8, 0.5), (0.75, 0.5), (0.7, 2.0),
    (0.5, 2.0), (0.25, 2.0), (0.0, 2.0),
])
def test_hdx_weight(t, expected):
    assert sch.hdx_weight(t) == expected


@pytest.mark.parametrize("t, expected", [
    (1.0, 0.0), (0.95, 0.0), (0.8, 0.0), (0.75, 0.5), (0.7, 0.5), (0.5, 0.5),
    (0.25, 1.0), (0.1, 1.0), (0.0, 1.0),
])
def test_xl_fraction(t, expected):
    assert sch.xl_weight_fraction(t) == expected


def test_eval_intervals():
    assert sch.HDX_SCHEDULE.eval_interval == 1
    assert sch.XL_SCHEDULE.eval_interval == 4
    assert [sch.should_apply(k, 4) for k in range(6)] == [True, False, False, False, True, False]


def test_union_lambda_endpoints_and_midpoint():
    assert sch.union_lambda(0.0) == 8.0
    assert sch.union_lambda(1.0) == 0.0
    mid = 8.0 * (1 - (1 - math.exp(-1.0)) / (1 - math.exp(-2.0)))
    assert sch.union_lambda(0.5) == pytest.approx(mid, rel=1e-15)
    assert sch.union_lambda(0.5) == pytest.approx(2.1515, abs=1e-4)


def test_union_lambda_monotone():
    vals = [sch.union_lambda(k / 100) for k in range(101)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_out_of_domain():
    with pytest.raises(sch.ScheduleDomainError):
        sch.hdx_weight(1.01)
    with pytest.raises(sch.ScheduleDomainError):
        sch.xl_weight_fraction(-0.1)


def test_bad_stage_layout():
    with pytest.raises(ValueError):
        sch.StageSchedule((sch.Stage(0.0, 0.5, 1.0), sch.Stage(0.6, 1.0, 1.0)))
    with pytest.raises(ValueError):
        sch.StageSchedule((sch.Stage(0.0, 1.0, 1.0),), eval_interval=0)


def test_roundtrip():
    g = sch.GuidanceSchedules()
    assert sch.GuidanceSchedules.from_dict(g.to_dict()) == g
