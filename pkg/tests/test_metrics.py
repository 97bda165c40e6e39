import pytest

from layerbatch.core.state import Location, RequestOutcome
from layerbatch.eval import summarize


def outcome(rid, latency=None, deadline=0.1, location=Location.SERVER, dropped=False):
    completion = None if latency is None else latency
    return RequestOutcome(rid, "d", 0.0, deadline, completion_time=completion, location=location, dropped=dropped)


def test_summary_counts_dropped_as_late():
    outcomes = [
        outcome(0, 0.05),
        outcome(1, 0.08, location=Location.CLIENT_FULL),
        outcome(2, 0.20),
        outcome(3, dropped=True),
    ]
    m = summarize(outcomes)
    assert (m.generated, m.completed, m.dropped, m.on_time) == (4, 3, 1, 2)
    assert m.on_time_ratio == pytest.approx(0.5)
    assert m.mean_completion_s == pytest.approx(0.11)
    assert m.median_completion_s == pytest.approx(0.08)
    assert m.by_location == {"server": 2, "client-full": 1, "client-partial": 0}


def test_summary_with_relative_deadline():
    outcomes = [outcome(0, 0.05), outcome(1, 0.20, deadline=1.0)]
    assert summarize(outcomes).on_time == 2
    assert summarize(outcomes, deadline=0.1).on_time == 1


def test_dropped_outcome_is_normalized():
    o = RequestOutcome(0, "d", 0.0, 1.0, completion_time=0.5, on_time=True, dropped=True)
    assert o.completion_time is None and not o.on_time
    assert o.latency is None


def test_empty_summary():
    m = summarize([])
    assert m.generated == 0 and m.on_time_ratio == 0.0
    assert set(m.by_location) == {"server", "client-full", "client-partial"}
