import json
import math

import pytest

from conftest import requests_at, table_profile
from layerbatch.core.profile import (
    INFEASIBLE,
    CostTable,
    batch_reduction,
    check_subadditivity,
    group_layers,
    load_profile,
    lookup_h,
    profile_from_dict,
    profile_to_dict,
)
from layerbatch.core.state import Request, RequestState, validate_request_set
from layerbatch.errors import ProfileError


def test_lookup_grid_hit_and_interpolation():
    table = CostTable(entries={1: {1: 0.010, 10: 0.012}}, max_batch=90)
    assert lookup_h(table, 1, 1) == pytest.approx(0.010)
    assert lookup_h(table, 1, 4) == pytest.approx(0.010 + 0.002 * 3 / 9)
    assert lookup_h(table, 1, 91) == INFEASIBLE


def test_lookup_extrapolates_last_segment():
    table = CostTable(entries={1: {1: 0.010, 2: 0.012}}, max_batch=4)
    assert lookup_h(table, 1, 4) == pytest.approx(0.016)


def test_missing_batch_one_names_layer():
    data = {
        "max_batch": 10,
        "components": [{"component_id": "c", "layers": [
            {"runtimes_ms": {"1": 1.0}},
            {"runtimes_ms": {"1": 1.0}},
            {"runtimes_ms": {"10": 1.0}},
        ]}],
        "dnns": [{"dnn_id": "d", "stages": ["c"]}],
    }
    with pytest.raises(ProfileError, match="layer 3"):
        profile_from_dict(data)


def test_negative_runtime_and_unknown_component():
    bad = {"max_batch": 2, "components": [{"component_id": "c", "layers": [{"runtimes_ms": {"1": -1}}]}],
           "dnns": [{"dnn_id": "d", "stages": ["c"]}]}
    with pytest.raises(ProfileError):
        profile_from_dict(bad)
    missing = {"max_batch": 2, "components": [{"component_id": "c", "layers": [{"runtimes_ms": {"1": 1}}]}],
               "dnns": [{"dnn_id": "d", "stages": ["c", "nope"]}]}
    with pytest.raises(ProfileError, match="nope"):
        profile_from_dict(missing)


def test_load_profile_converts_ms(tmp_path):
    data = {"max_batch": 10, "components": [{"component_id": "c", "layers": [
        {"runtimes_ms": {"1": 10, "10": 12}}, {"runtimes_ms": {"1": 5, "10": 6}}]}],
        "dnns": [{"dnn_id": "d", "stages": ["c"]}]}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    profiles = load_profile(path)
    d = profiles.dnn("d")
    assert d.num_layers == 2
    assert profiles.components["c"].cost_table.grid(1) == [1, 10]
    assert d.runtime() == pytest.approx(0.015)
    assert d.runtime(batch=10) == pytest.approx(0.018)
    with pytest.raises(ProfileError):
        load_profile(tmp_path / "missing.json")


def test_subadditivity_report():
    bad = CostTable(entries={1: {1: 0.010, 2: 0.025}}, max_batch=2)
    ok = CostTable(entries={1: {1: 0.010, 2: 0.012}}, max_batch=2)
    linear = CostTable(entries={1: {b: 0.003 * b for b in range(1, 9)}}, max_batch=8)
    violations = check_subadditivity(bad)
    assert [(v.layer, v.b1, v.b2) for v in violations] == [(1, 1, 1)]
    assert check_subadditivity(ok) == []
    assert check_subadditivity(linear) == []


def test_subadditivity_ignores_rounding_noise():
    noisy = CostTable(entries={1: {1: 0.006, 2: 0.012, 3: 0.018000000000000002}}, max_batch=3)
    assert check_subadditivity(noisy) == []
    real = CostTable(entries={1: {1: 0.006, 2: 0.012, 3: 0.0181}}, max_batch=3)
    assert [(v.b1, v.b2) for v in check_subadditivity(real)] == [(1, 2)]


def test_group_layers():
    even = table_profile([{1: 0.010}] * 4)
    assert group_layers(even, 2) == ((1, 2), (3, 4))
    assert group_layers(even, 1) == ((1, 4),)
    uneven = table_profile([{1: t} for t in (0.030, 0.005, 0.005, 0.020, 0.040)])
    groups = group_layers(uneven, 5)
    assert groups == ((1, 1), (2, 2), (3, 3), (4, 4), (5, 5))
    assert group_layers(uneven, 3) == ((1, 2), (3, 4), (5, 5))
    with pytest.raises(ProfileError):
        group_layers(even, 5)


def test_reference_aggregates(ref_profiles):
    g = ref_profiles.dnn("googlenet")
    assert g.runtime() == pytest.approx(0.024)
    assert g.runtime(batch=10) == pytest.approx(0.028)
    targets = {"vgg16": 0.63, "resnet50": 0.81, "fcn": 0.57, "googlenet": 0.88, "ssd": 0.67}
    for dnn_id, target in targets.items():
        assert batch_reduction(ref_profiles.dnn(dnn_id), 10) == pytest.approx(target, abs=0.01)


def test_reference_shared_components(ref_profiles):
    assert {"vgg16_base", "flownet2"} <= ref_profiles.shared_component_ids
    vgg, fcn, resnet = ref_profiles.dnn("vgg16"), ref_profiles.dnn("fcn"), ref_profiles.dnn("resnet50")
    assert vgg.locate(11) == ("vgg16_head", 1)
    assert fcn.layer_of("vgg16_base", 3) == 3
    assert resnet.layer_of("vgg16_base", 1) is None
    assert ref_profiles.dnn("googlenet").num_groups == 5


def test_profile_dict_roundtrip(ref_profiles):
    again = profile_from_dict(profile_to_dict(ref_profiles))
    for dnn_id, dnn in ref_profiles.dnns.items():
        assert again.dnn(dnn_id).runtime(batch=10) == pytest.approx(dnn.runtime(batch=10))


def test_validate_request_set_examples(two_layer):
    one = requests_at([1])
    assert validate_request_set(one, two_layer).ok
    deeper_later = [Request(0, "d", 1.0, current_layer=1), Request(1, "d", 2.0, current_layer=2)]
    report = validate_request_set(deeper_later, two_layer)
    assert report.fifo_violations == [(0, 1)]
    profile = table_profile([{1: 0.001}] * 5)
    valid = [Request(0, "d", 1.0, current_layer=5), Request(1, "d", 2.0, current_layer=2),
             Request(2, "d", 3.0, current_layer=2)]
    assert validate_request_set(valid, profile).ok
    assert "ok" == validate_request_set(valid, profile).describe()


def test_validate_request_set_other_problems(two_layer):
    rs = [Request(0, "d", 1.0, current_layer=4), Request(0, "d", 2.0), Request(2, "x", 3.0)]
    report = validate_request_set(rs, two_layer)
    assert report.out_of_range == [0]
    assert report.duplicate_ids == [0]
    assert report.unknown_dnn == [2]
    assert not report.ok


def test_request_transitions():
    r = Request(0, "d", 0.0)
    r.transition(RequestState.RUNNING)
    r.transition(RequestState.COMPLETED)
    with pytest.raises(ValueError):
        r.transition(RequestState.DROPPED)
    with pytest.raises(ValueError):
        Request(1, "d", 1.0, deadline=0.5)
    r2 = Request(2, "d", 0.0, current_layer=2)
    with pytest.raises(ValueError):
        r2.advance_to(1)
    assert math.isinf(r2.deadline)
