import pytest

from layerbatch.config import SimConfig
from layerbatch.errors import ConfigError
from layerbatch.eval import capacity_from_curve, capacity_sweep, parse_rates
from layerbatch.workload import WorkloadSpec


def test_capacity_from_curve():
    assert capacity_from_curve([10, 20, 30], [0.99, 0.95, 0.85]) == 20
    assert capacity_from_curve([10, 20], [0.5, 0.4]) is None
    # немонотонная кривая: берётся наибольшая подходящая интенсивность
    assert capacity_from_curve([10, 20, 30], [0.95, 0.80, 0.91]) == 30


def test_parse_rates():
    assert parse_rates("10:50:10") == [10.0, 20.0, 30.0, 40.0, 50.0]
    assert parse_rates("0.1:0.3:0.1") == pytest.approx([0.1, 0.2, 0.3])
    assert parse_rates("5, 7,9") == [5.0, 7.0, 9.0]
    for bad in ("10:5:1", "1:5:0", "a,b"):
        with pytest.raises(ConfigError):
            parse_rates(bad)


def test_sweep_validates_inputs(ref_profiles):
    spec = WorkloadSpec(count=20)
    with pytest.raises(ConfigError):
        capacity_sweep(spec, [20, 10], "no-batch", ref_profiles)
    with pytest.raises(ConfigError):
        capacity_sweep(spec, [10, 20], "no-batch", ref_profiles, seeds=())


def test_small_sweep(ref_profiles):
    spec = WorkloadSpec(count=60, deadline_s=0.150)
    res = capacity_sweep(spec, [5, 400], "no-batch", ref_profiles, SimConfig(), seeds=(0, 1))
    assert res.scheduler == "no-batch"
    assert [p.rate for p in res.points] == [5.0, 400.0]
    assert all(p.seeds == 2 and len(p.ratios) == 2 for p in res.points)
    low, high = res.points
    assert low.on_time_ratio == 1.0
    assert high.on_time_ratio < low.on_time_ratio
    assert res.capacity == capacity_from_curve([5, 400], [low.on_time_ratio, high.on_time_ratio])
    assert res.curve == {5.0: low.on_time_ratio, 400.0: high.on_time_ratio}
