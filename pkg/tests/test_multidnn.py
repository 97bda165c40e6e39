import numpy as np
import pytest

from conftest import profile_set, requests_at, table_profile
from layerbatch.core.events import EventKind, SimEvent
from layerbatch.core.state import Request
from layerbatch.errors import PermutationLimitError
from layerbatch.eval.oracle import check_multi, check_shared, random_profile, random_requests
from layerbatch.sched import (
    OBJECTIVE_TARDY,
    compute_schedule,
    reschedule_trigger,
    schedule_multi,
    schedule_multi_shared,
)
from layerbatch.sched.multidnn import dnn_orders


def test_single_dnn_matches_segment_dp():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        profile = random_profile(rng, 3, n)
        rs = random_requests(rng, n, 3)
        single = compute_schedule(rs, profile, n)
        multi = schedule_multi(rs, profile_set(profile), n)
        assert multi.objective_value == pytest.approx(single.objective_value)


def test_multi_against_enumeration():
    assert check_multi(seed=3, instances=100) == []


def test_shared_never_worse():
    assert check_shared(seed=3, instances=100) == []


def test_shared_flownet_heads_gain(ref_profiles):
    rs = [
        Request(id=i, dnn_id=("sdcnet", "rta")[i % 2], arrival_time=i * 1e-3)
        for i in range(4)
    ]
    plain = schedule_multi(rs, ref_profiles, ref_profiles.max_batch)
    shared = schedule_multi_shared(rs, ref_profiles, ref_profiles.max_batch)
    assert shared.objective_value < plain.objective_value
    assert any(seg.absorbed for seg in shared.segments)
    assert sorted(shared.predicted_completion) == [0, 1, 2, 3]


def test_no_shared_components_same_as_plain():
    a = table_profile([{1: 0.010, 2: 0.012}] * 2, dnn_id="a", max_batch=2)
    b = table_profile([{1: 0.005, 2: 0.009}] * 3, dnn_id="b", max_batch=2)
    profiles = profile_set(a, b)
    rs = requests_at([1, 2], dnn_id="a") + requests_at([2, 1], dnn_id="b", first_id=2)
    plain = schedule_multi(rs, profiles, 2)
    shared = schedule_multi_shared(rs, profiles, 2)
    assert shared.objective_value == pytest.approx(plain.objective_value)
    assert not any(seg.absorbed for seg in shared.segments)


def test_dnn_phases_are_contiguous():
    a = table_profile([{1: 0.010, 2: 0.012}] * 2, dnn_id="a", max_batch=2)
    b = table_profile([{1: 0.005, 2: 0.009}] * 2, dnn_id="b", max_batch=2)
    rs = requests_at([1, 1], dnn_id="a") + requests_at([1], dnn_id="b", first_id=2)
    s = schedule_multi(rs, profile_set(a, b), 2)
    order = [seg.dnn_id for seg in s.segments]
    assert order == sorted(order, key=order.index)
    assert len(set(order)) == 2


def test_tardy_objective_drops_late():
    a = table_profile([{1: 0.010, 2: 0.013}] * 2, dnn_id="a", max_batch=2)
    rs = requests_at([1, 1], dnn_id="a", deadlines=[0.021, 0.025])
    s = schedule_multi(rs, profile_set(a), 2, objective=OBJECTIVE_TARDY)
    assert s.dropped == (1,)
    assert s.objective_value == 1


def test_search_runs_nearly_finished_dnn_first():
    a = table_profile([{1: 0.010, 2: 0.012}] * 2, dnn_id="a", max_batch=2)
    b = table_profile([{1: 0.010, 2: 0.012}] * 5, dnn_id="b", max_batch=2)
    rs = [
        Request(0, "b", 0.000),
        Request(1, "b", 0.001),
        Request(2, "a", 0.002, current_layer=2),
        Request(3, "a", 0.003, current_layer=2),
    ]
    s = schedule_multi(rs, profile_set(a, b), 2)
    assert s.segments[0].dnn_id == "a"
    assert s.objective_value == pytest.approx(2 * 0.012 + 2 * 0.072)


def test_permutation_limit():
    by_dnn = {f"m{i}": [Request(id=i, dnn_id=f"m{i}", arrival_time=float(i))] for i in range(4)}
    with pytest.raises(PermutationLimitError):
        dnn_orders(by_dnn, exact_limit=3)
    assert dnn_orders(by_dnn, heuristic=True, exact_limit=3) == [("m0", "m1", "m2", "m3")]
    assert len(dnn_orders(by_dnn, exact_limit=4)) == 24


@pytest.mark.parametrize(
    "kind, payload, arrivals, expected",
    [
        (EventKind.LAYER_COMPLETE, {}, 0, False),
        (EventKind.LAYER_COMPLETE, {}, 2, True),
        (EventKind.LAYER_COMPLETE, {"crossed_shared_boundary": True}, 0, True),
        (EventKind.REQUEST_ARRIVAL, {"request_id": 1}, 5, False),
        (EventKind.TRANSMISSION_COMPLETE, {"request_id": 1}, 5, False),
    ],
)
def test_reschedule_trigger(kind, payload, arrivals, expected):
    assert reschedule_trigger(SimEvent(1.0, kind=kind, payload=payload), arrivals) is expected
