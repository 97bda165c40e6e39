import io

import numpy as np
import pytest

from conftest import profile_set
from layerbatch.config import SimConfig
from layerbatch.core import EventKind, EventQueue, Location, Request, SimEvent
from layerbatch.core.sim import Sim
from layerbatch.data import reference_client_dict
from layerbatch.errors import ConfigError, SimulationError
from layerbatch.eval import run_sim, write_outcomes_csv
from layerbatch.eval.oracle import random_profile
from layerbatch.offload import client_profile_from_dict
from layerbatch.sched import SCHEDULER_NAMES, make_scheduler
from layerbatch.sched.dp import schedule_variant
from layerbatch.workload import Arrival, NetworkTrace, WorkloadSpec, generate_arrivals


def test_event_order_completion_before_arrival():
    q = EventQueue()
    q.push(SimEvent(1.0, kind=EventKind.REQUEST_ARRIVAL, payload={"request_id": 2}))
    q.push(SimEvent(1.0, kind=EventKind.LAYER_COMPLETE))
    q.push(SimEvent(0.5, kind=EventKind.REQUEST_ARRIVAL, payload={"request_id": 7}))
    q.push(SimEvent(1.0, kind=EventKind.REQUEST_ARRIVAL, payload={"request_id": 1}))
    assert q.pop().time == 0.5
    batch = q.pop_simultaneous()
    assert [e.kind for e in batch] == [EventKind.LAYER_COMPLETE, EventKind.REQUEST_ARRIVAL, EventKind.REQUEST_ARRIVAL]
    assert [e.payload.get("request_id") for e in batch[1:]] == [1, 2]
    assert q.pop() is None and len(q) == 0


def test_single_request_latency(ref_profiles):
    result = run_sim([Arrival(0, 0.0, "googlenet", 2e5, None)], ref_profiles, "ours-time")
    (outcome,) = result.outcomes
    assert outcome.latency == pytest.approx(0.024, abs=1e-6)
    assert outcome.location == Location.SERVER
    assert result.metrics.completed == 1


@pytest.mark.parametrize("variant", ["full", "grouped"])
def test_closed_instance_matches_segment_dp(variant):
    rng = np.random.default_rng(17)
    config = SimConfig(dp_variant=variant, max_batch=8)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        n_layers = int(rng.integers(1, 5))
        profile = random_profile(rng, n_layers, 8, groups=int(rng.integers(1, n_layers + 1)))
        arrivals = [Arrival(i, 0.0, "d0", 1e5, None) for i in range(n)]
        outcomes = Sim(profile_set(profile), "ours-time", config).run(arrivals)
        requests = [Request(i, "d0", 0.0) for i in range(n)]
        expected = schedule_variant(requests, profile, 8, variant).objective_value
        total = sum(o.completion_time for o in outcomes)
        assert total == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("name", SCHEDULER_NAMES)
def test_every_request_resolved(ref_profiles, name):
    spec = WorkloadSpec(rate=150, count=150, seed=5, mix={"vgg16": 0.5, "googlenet": 0.5})
    result = run_sim(spec, ref_profiles, name)
    assert [o.request_id for o in result.outcomes] == list(range(150))
    m = result.metrics
    assert m.completed + m.dropped == m.generated == 150
    for o in result.outcomes:
        if not o.dropped:
            assert o.completion_time >= o.created_time
            assert o.server_time > 0


def test_tardy_scheduler_drops_under_overload(ref_profiles):
    spec = WorkloadSpec(rate=2000, count=300, seed=1, deadline_s=0.030)
    result = run_sim(spec, ref_profiles, "ours-tardy")
    assert result.metrics.dropped > 0
    assert result.metrics.completed + result.metrics.dropped == 300


def test_shared_components_run(ref_profiles):
    spec = WorkloadSpec(rate=60, count=80, seed=2, mix={"sdcnet": 0.5, "rta": 0.5}, deadline_s=None)
    for sharing in (True, False):
        result = run_sim(spec, ref_profiles, "ours-time", SimConfig(sharing=sharing))
        assert result.metrics.completed == 80
        assert result.metrics.on_time_ratio == 1.0


def _client_run(ref_profiles, mode):
    config = SimConfig(offload=mode)
    spec = WorkloadSpec(rate=80, count=200, seed=3, clients=4, deadline_s=0.300, mix={"vgg16": 0.5, "fcn": 0.5})
    client = client_profile_from_dict(reference_client_dict(ref_profiles))
    return run_sim(spec, ref_profiles, "ours-time", config, trace=NetworkTrace.constant(20e6), client_profile=client)


def test_binary_offload_locations(ref_profiles):
    result = _client_run(ref_profiles, "binary")
    for o in result.outcomes:
        groups = ref_profiles.dnn(o.dnn_id).num_groups
        if o.location == Location.CLIENT_FULL:
            assert o.offload_k == groups and o.server_time == 0
        else:
            assert o.location == Location.SERVER and o.offload_k == 0
            assert o.network_delay > 0


def test_partial_offload_locations(ref_profiles):
    result = _client_run(ref_profiles, "partial")
    for o in result.outcomes:
        groups = ref_profiles.dnn(o.dnn_id).num_groups
        assert 0 <= o.offload_k <= groups
        if o.offload_k == 0:
            assert o.location == Location.SERVER
        elif o.offload_k == groups:
            assert o.location == Location.CLIENT_FULL
        else:
            assert o.location == Location.CLIENT_PARTIAL
            assert o.client_time > 0 and o.server_time > 0


def test_client_arrivals_need_client_profile(ref_profiles):
    arrivals = [Arrival(0, 0.0, "vgg16", 2e5, 0)]
    with pytest.raises(ConfigError):
        Sim(ref_profiles, "ours-time", SimConfig(offload="binary")).run(arrivals)


def test_unknown_dnn(ref_profiles):
    with pytest.raises(SimulationError):
        Sim(ref_profiles, "ours-time").run([Arrival(0, 0.0, "resnet", 2e5, None)])


def test_unknown_scheduler(ref_profiles):
    with pytest.raises(ConfigError):
        make_scheduler("fifo", ref_profiles)


def test_repeat_runs_identical(ref_profiles):
    spec = WorkloadSpec(process="pareto", rate=120, count=200, seed=9, mix={"vgg16": 0.5, "fcn": 0.5})
    texts = []
    for _ in range(2):
        buf = io.StringIO()
        write_outcomes_csv(run_sim(spec, ref_profiles, "ours-time").outcomes, buf)
        texts.append(buf.getvalue())
    assert texts[0] == texts[1]


def test_arrivals_from_generator_resolve(ref_profiles):
    arrivals = generate_arrivals(WorkloadSpec(rate=100, count=50, seed=4))
    outcomes = Sim(ref_profiles, "batch").run(arrivals, 0.150)
    assert len(outcomes) == 50
    assert all(o.deadline == pytest.approx(a.time + 0.150) for o, a in zip(outcomes, arrivals))
