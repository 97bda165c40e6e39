import numpy as np
import pytest

from conftest import requests_at, table_profile
from layerbatch.core.profile import check_subadditivity
from layerbatch.eval.oracle import (
    CHECKS,
    DEFAULT_COUNTS,
    SHAPE_IRREGULAR,
    OracleMismatch,
    OracleReport,
    brute_force_completion,
    brute_force_interleaving,
    check_completion,
    check_incremental,
    check_interleaving,
    check_tardy,
    random_component,
    run_oracle_suite,
    segmentations,
)


def test_segmentations_count():
    assert len(list(segmentations(4))) == 8
    assert list(segmentations(1)) == [[(0, 0)]]
    assert list(segmentations(0)) == [[]]


def test_brute_force_small(two_layer):
    best, segs = brute_force_completion(requests_at([1, 1]), two_layer, 2)
    assert best == pytest.approx(0.048)
    assert len(segs) == 1


@pytest.mark.parametrize("bounded", [False, True])
def test_completion_dp_matches_enumeration(bounded):
    assert check_completion(seed=0, instances=200, bounded=bounded) == []


def test_tardy_dp_matches_enumeration():
    assert check_tardy(seed=1, instances=200) == []


def test_no_interleaving_beats_segments():
    assert check_interleaving(seed=2, instances=50) == []


def test_incremental_matches_full_recompute():
    assert check_incremental(seed=0, sequences=1000) == []


def test_suite_report():
    report = run_oracle_suite(seed=4, instances=10)
    assert report.ok
    assert set(report.instances) == set(CHECKS)
    assert all(count == 10 for count in report.instances.values())


def test_report_collects_mismatches():
    report = OracleReport()
    report.add("tardy", 5, [OracleMismatch("tardy", 0, 3, "dp 2 != brute 1")])
    assert not report.ok
    assert "tardy" in report.mismatches[0].describe()


def test_interleaving_keeps_batched_requests_together():
    # Разделить #1 и #2 после общего батча на слое 1 дешевле (155), но вне класса расписаний
    profile = table_profile([{1: 3.0, 2: 4.0, 3: 5.0, 4: 6.0}, {1: 14.0, 2: 24.0, 3: 34.0, 4: 44.0}])
    requests = requests_at([2, 1, 1, 1])
    segmented, segs = brute_force_completion(requests, profile, 4)
    assert segmented == 157.0
    assert segs == [(0, 0), (1, 2), (3, 3)]
    assert brute_force_interleaving([2, 1, 1, 1], profile, 4) == 157.0


def test_interleaving_can_merge_cohorts(two_layer):
    # Две когорты на слое 1 сливаются: не хуже любого разбиения
    best, _ = brute_force_completion(requests_at([1, 1]), two_layer, 2)
    assert brute_force_interleaving([1, 1], two_layer, 2) == pytest.approx(best)


def test_irregular_tables_break_monotonicity_and_subadditivity():
    rng = np.random.default_rng(0)
    tables = [random_component(rng, f"c{i}", 3, 6, shape=SHAPE_IRREGULAR).cost_table for i in range(20)]
    assert any(check_subadditivity(t) for t in tables)
    assert any(row[b + 1] < row[b] for t in tables for row in t.entries.values() for b in range(1, 6))
    with pytest.raises(ValueError):
        random_component(rng, "c", 1, 2, shape="convex")


@pytest.mark.parametrize("bounded", [False, True])
def test_completion_dp_matches_enumeration_on_irregular_tables(bounded):
    assert check_completion(seed=5, instances=200, bounded=bounded, shape=SHAPE_IRREGULAR) == []


def test_tardy_dp_matches_enumeration_on_irregular_tables():
    assert check_tardy(seed=6, instances=200, shape=SHAPE_IRREGULAR) == []


def test_suite_default_counts():
    assert DEFAULT_COUNTS["incremental"] == 1000
    assert set(DEFAULT_COUNTS) == set(CHECKS)
    report = run_oracle_suite(seed=0, checks=["interleaving", "shared"])
    assert report.instances == {"interleaving": 50, "shared": 100}
    assert report.ok
