import json

import numpy as np
import pytest

from layerbatch.config import IMAGE_SIZE_RANGE_BITS
from layerbatch.errors import ConfigError, WorkloadError
from layerbatch.workload import WorkloadSpec, generate_arrivals, load_workload, workload_from_mapping


def test_same_seed_same_sequence():
    spec = WorkloadSpec(rate=150, count=300, seed=11, mix={"vgg16": 0.5, "fcn": 0.5}, clients=4)
    assert generate_arrivals(spec) == generate_arrivals(spec)
    other = generate_arrivals(spec.with_seed(12))
    assert [a.time for a in other] != [a.time for a in generate_arrivals(spec)]


def test_rate_change_keeps_other_streams():
    spec = WorkloadSpec(rate=100, count=200, seed=3, mix={"vgg16": 0.3, "fcn": 0.7})
    a = generate_arrivals(spec)
    b = generate_arrivals(spec.with_rate(250))
    assert [x.dnn_id for x in a] == [x.dnn_id for x in b]
    assert [x.size_bits for x in a] == [x.size_bits for x in b]


def test_constant_process():
    arrivals = generate_arrivals(WorkloadSpec(process="constant", rate=50, count=5))
    assert [a.time for a in arrivals] == pytest.approx([0.02, 0.04, 0.06, 0.08, 0.10])
    assert [a.id for a in arrivals] == list(range(5))
    assert all(a.client_id is None for a in arrivals)


def test_poisson_mean_rate():
    arrivals = generate_arrivals(WorkloadSpec(rate=200, count=20000, seed=1))
    gaps = np.diff([0.0] + [a.time for a in arrivals])
    assert gaps.mean() == pytest.approx(1 / 200, rel=0.05)
    assert all(g >= 0 for g in gaps)


def test_pareto_times_non_decreasing():
    times = [a.time for a in generate_arrivals(WorkloadSpec(process="pareto", rate=100, count=2000, seed=2))]
    assert times == sorted(times)


def test_sizes_and_clients_in_range():
    arrivals = generate_arrivals(WorkloadSpec(rate=100, count=1000, seed=4, clients=10))
    lo, hi = IMAGE_SIZE_RANGE_BITS
    assert all(lo <= a.size_bits <= hi for a in arrivals)
    assert {a.client_id for a in arrivals} <= set(range(10))


def test_size_trace_cycles():
    arrivals = generate_arrivals(WorkloadSpec(rate=100, count=5, size_trace=(1e5, 2e5)))
    assert [a.size_bits for a in arrivals] == [1e5, 2e5, 1e5, 2e5, 1e5]


def test_mix_fractions():
    arrivals = generate_arrivals(WorkloadSpec(rate=100, count=10000, seed=8, mix={"vgg16": 0.2, "fcn": 0.8}))
    share = sum(a.dnn_id == "vgg16" for a in arrivals) / len(arrivals)
    assert share == pytest.approx(0.2, abs=0.02)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"rate": 0},
        {"process": "bursty"},
        {"count": -1},
        {"process": "pareto", "alpha": 1.0},
        {"mix": {"vgg16": 0.5}},
        {"deadline_s": 0.0},
        {"clients": -2},
    ],
)
def test_bad_spec(kwargs):
    with pytest.raises(WorkloadError):
        WorkloadSpec(**kwargs)


def test_mapping_keys_and_deadline():
    spec = workload_from_mapping({"rate": 80, "deadline_ms": 0, "mix": {"fcn": 1}})
    assert spec.deadline_s is None
    assert spec.deadline == float("inf")
    assert workload_from_mapping({"deadline_ms": 300}).deadline_s == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        workload_from_mapping({"rate": 80, "burst": 3})


def test_load_toml_and_json(tmp_path):
    (tmp_path / "sizes.csv").write_text("size_bits\n100000\n150000\n")
    toml_path = tmp_path / "w.toml"
    toml_path.write_text(
        '[workload]\nprocess = "pareto"\nrate = 150\ncount = 50\ndeadline_ms = 150\n'
        'size_trace = "sizes.csv"\nmix = { vgg16 = 0.5, fcn = 0.5 }\n'
    )
    spec = load_workload(toml_path)
    assert spec.process == "pareto" and spec.count == 50
    assert spec.size_trace == (100000.0, 150000.0)
    json_path = tmp_path / "w.json"
    json_path.write_text(json.dumps({"rate": 40, "seed": 9}))
    assert load_workload(json_path).seed == 9
    with pytest.raises(WorkloadError):
        load_workload(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        load_workload(tmp_path / "missing.toml")
