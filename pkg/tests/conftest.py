import math

import pytest

from layerbatch.core.profile import CostTable, DnnProfile, ProfileSet, SharedComponent, StageRef
from layerbatch.core.state import Request
from layerbatch.data import reference_profiles


def table_profile(rows, dnn_id="d", max_batch=None, groups=()):
    """rows[k-1] = {b: секунды}; одна стадия из одного компонента."""
    entries = {k: dict(row) for k, row in enumerate(rows, start=1)}
    if max_batch is None:
        max_batch = max(max(row) for row in entries.values())
    comp = SharedComponent(f"{dnn_id}.c", CostTable(entries=entries, max_batch=max_batch))
    return DnnProfile(dnn_id, (StageRef(comp, 1),), layer_groups=tuple(groups))


def profile_set(*profiles):
    components = {s.component.component_id: s.component for p in profiles for s in p.stages}
    return ProfileSet(components=components, dnns={p.dnn_id: p for p in profiles}, max_batch=min(p.max_batch for p in profiles))


def requests_at(layers, dnn_id="d", deadlines=None, first_id=0):
    """Запросы в порядке поступления с заданными слоями."""
    out = []
    for i, layer in enumerate(layers):
        deadline = math.inf if deadlines is None else deadlines[i]
        out.append(Request(id=first_id + i, dnn_id=dnn_id, arrival_time=float(i) * 1e-3,
                           deadline=deadline, current_layer=layer))
    return out


@pytest.fixture
def two_layer():
    """N=2, h(1)=10 мс, h(2)=12 мс на каждом слое."""
    return table_profile([{1: 0.010, 2: 0.012}, {1: 0.010, 2: 0.012}], max_batch=2)


@pytest.fixture(scope="session")
def ref_profiles():
    return reference_profiles()
