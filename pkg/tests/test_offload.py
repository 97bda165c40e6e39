import numpy as np
import pytest

from conftest import table_profile
from layerbatch.core.state import Request
from layerbatch.errors import ConfigError, ProfileError
from layerbatch.offload import (
    LOCAL,
    OFFLOAD,
    ClientDnn,
    ClientState,
    NetworkEstimator,
    client_profile_from_dict,
    decide_binary,
    decide_partial,
    ewma_update,
)
from layerbatch.offload.client import RULE_FIRST_AVAILABLE


@pytest.fixture
def vgg_client():
    return ClientDnn("vgg16", (0.230,), 0.230, (1e5,))


@pytest.fixture
def link():
    """2e5 бит за 20 мс."""
    return NetworkEstimator(estimate=1e7)


def frame(deadline, arrival=0.0):
    return Request(id=0, dnn_id="vgg16", arrival_time=arrival, deadline=deadline, size_bits=2e5)


def test_ewma():
    assert ewma_update(10.0, 20.0, 0.3) == pytest.approx(13.0)
    assert ewma_update(None, 20.0) == 20.0
    with pytest.raises(ValueError):
        ewma_update(10.0, 0.0)


def test_estimator_observe_and_delay():
    est = NetworkEstimator()
    assert est.delay(1e6) == 0.0
    est.observe(1e6, 0.1)
    assert est.estimate == pytest.approx(1e7)
    est.observe(1e6, 0.05)
    assert est.estimate == pytest.approx(1.3e7)
    assert est.delay(1.3e6) == pytest.approx(0.1)
    est.observe(0.0, 0.1)
    assert est.estimate == pytest.approx(1.3e7)


def test_binary_offloads_when_server_faster(vgg_client, link):
    d = decide_binary(frame(0.150), ClientState(0), 0.060, link, vgg_client, 0.0)
    assert d.choice == OFFLOAD
    assert d.local_estimate == pytest.approx(0.230)
    assert d.remote_estimate == pytest.approx(0.080)


def test_binary_stays_local_when_server_slower(vgg_client, link):
    assert decide_binary(frame(0.150), ClientState(0), 0.400, link, vgg_client, 0.0).choice == LOCAL


def test_binary_local_meets_deadline(vgg_client, link):
    assert decide_binary(frame(0.300), ClientState(0), 0.010, link, vgg_client, 0.0).choice == LOCAL


def test_binary_backlog_pushes_offload(vgg_client, link):
    state = ClientState(0)
    state.reserve(0.0, 0.200)
    d = decide_binary(frame(0.300), state, 0.130, link, vgg_client, 0.0)
    assert d.local_estimate == pytest.approx(0.430)
    assert d.choice == OFFLOAD


def test_binary_tie_goes_to_server(vgg_client):
    d = decide_binary(frame(0.150), ClientState(0), 0.230, NetworkEstimator(), vgg_client, 0.0)
    assert d.choice == OFFLOAD


def test_battery_threshold_forces_offload(vgg_client, link):
    state = ClientState(0)
    state.reserve(0.0, 0.5)
    assert state.busy_fraction(1.0) == pytest.approx(0.5)
    req = frame(5.0, arrival=1.0)
    assert decide_binary(req, state, 1.0, link, vgg_client, 1.0).choice == LOCAL
    assert decide_binary(req, state, 1.0, link, vgg_client, 1.0, battery_threshold=0.3).choice == OFFLOAD


def _five_groups():
    server = table_profile([{1: 0.004}] * 5, groups=[(k, k) for k in range(1, 6)])
    client = ClientDnn("d", (0.020,) * 5, 0.100, (1e4,) * 5)
    return server, client


def test_partial_first_available():
    server, client = _five_groups()
    req = Request(id=1, dnn_id="d", arrival_time=0.0, size_bits=2e5)
    d = decide_partial(req, ClientState(0), 0.050, NetworkEstimator(estimate=1e7), client, server, 0.0,
                       rule=RULE_FIRST_AVAILABLE)
    assert d.k == 3
    assert len(d.estimates) == 6


def test_partial_rejects_mismatch():
    server, _ = _five_groups()
    req = Request(id=1, dnn_id="d", arrival_time=0.0)
    short = ClientDnn("d", (0.05, 0.05), 0.1, (1.0, 1.0))
    with pytest.raises(ProfileError):
        decide_partial(req, ClientState(0), 0.0, NetworkEstimator(), short, server, 0.0)
    with pytest.raises(ConfigError):
        decide_partial(req, ClientState(0), 0.0, NetworkEstimator(), _five_groups()[1], server, 0.0, rule="greedy")


def _expected_estimates(backlog, groups, payload, size, est, waits, server_rows, server_groups, comp, decomp):
    g = len(groups)
    out = []
    for k in range(g + 1):
        t_c = backlog + sum(groups[:k])
        if k == g:
            out.append(t_c)
            continue
        tx = (size if k == 0 else payload[k - 1]) / est
        mid = 0 < k < g
        first = server_groups[k][0]
        rest = sum(server_rows[first - 1:])
        out.append(max(t_c + (comp if mid else 0.0) + tx, waits[k]) + rest + (decomp if mid else 0.0))
    return out


def test_partial_min_completion_randomized():
    rng = np.random.default_rng(2024)
    groups_layout = [(1, 2), (3, 3), (4, 6)]
    for i in range(500):
        rows = [float(x) for x in rng.uniform(0.001, 0.01, 6)]
        server = table_profile([{1: r} for r in rows], groups=groups_layout)
        local = tuple(float(x) for x in rng.uniform(0.005, 0.05, 3))
        payload = tuple(float(x) for x in rng.uniform(1e4, 5e5, 3))
        client = ClientDnn("d", local, sum(local), payload)
        est = float(rng.uniform(1e6, 5e7))
        waits = [float(x) for x in rng.uniform(0.0, 0.1, 4)]
        state = ClientState(0)
        backlog = float(rng.uniform(0.0, 0.05))
        state.reserve(0.0, backlog)
        req = Request(id=i, dnn_id="d", arrival_time=0.0, size_bits=float(rng.uniform(1e5, 3e5)))
        d = decide_partial(req, state, waits, NetworkEstimator(estimate=est), client, server, 0.0,
                           compress_s=0.0015, decompress_s=0.0006)
        expected = _expected_estimates(backlog, local, payload, req.size_bits, est, waits, rows, groups_layout,
                                       0.0015, 0.0006)
        assert list(d.estimates) == pytest.approx(expected)
        assert expected[d.k] == pytest.approx(min(expected))


def test_client_dnn_validation():
    with pytest.raises(ProfileError):
        ClientDnn("x", (0.1, 0.1), 0.3, (1.0, 1.0))
    with pytest.raises(ProfileError):
        ClientDnn("x", (0.1, 0.1), 0.2, (1.0,))
    with pytest.raises(ProfileError):
        ClientDnn("x", (), 0.0, ())
    with pytest.raises(ProfileError):
        client_profile_from_dict({"dnns": {"x": {"full_runtime_ms": 10}}})


def test_client_profile_from_dict_units():
    cp = client_profile_from_dict({
        "compress_ms": 2.0,
        "dnns": {"vgg16": {"full_runtime_ms": 230, "group_runtimes_ms": [100, 130], "payload_bits": [5e5, 1e3]}},
    })
    assert cp.compress_s == pytest.approx(0.002)
    assert cp.dnn("vgg16").local_time(1) == pytest.approx(0.1)
    with pytest.raises(ProfileError):
        cp.dnn("fcn")
