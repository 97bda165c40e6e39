"""
Профили стоимости: h_k(b) по слоям и размерам батча, компоненты (в т.ч. общие для нескольких DNN),
структура DNN из стадий, группы слоёв. Профиль — данные (JSON), а не измерения на месте.

Формат файла (времена в миллисекундах, внутри — секунды):
{
  "max_batch": 90,
  "components": [
    {"component_id": "flownet2",
     "layers": [{"name": "conv1", "runtimes_ms": {"1": 1.2, "10": 2.0}, "output_bits": 2.4e6}, ...]}
  ],
  "dnns": [{"dnn_id": "sdcnet", "stages": ["flownet2", "sdcnet_head"]}]
}
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ProfileError

# h_k(b) = +inf при b > B
INFEASIBLE = math.inf
SUBADDITIVITY_RTOL = 1e-9  # шум округления в измеренных временах

LayerGroups = Tuple[Tuple[int, int], ...]  # (первый, последний) слой группы, включительно


@dataclass(frozen=True, eq=False)
class CostTable:
    """
    entries[k][b] = h_k(b) для измеренных b (k — локальный номер слоя компонента, с 1).
    Между измеренными точками — линейная интерполяция; монотонность не предполагается.
    """
    entries: Mapping[int, Mapping[int, float]]
    max_batch: int

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ProfileError(f"max_batch must be >= 1, got {self.max_batch}")
        layers = sorted(self.entries)
        if layers != list(range(1, len(layers) + 1)):
            raise ProfileError(f"layers must be numbered 1..N without gaps, got {layers}")
        for k in layers:
            row = self.entries[k]
            if 1 not in row:
                raise ProfileError(f"layer {k}: missing runtime for batch size 1")
            for b, value in row.items():
                if b < 1:
                    raise ProfileError(f"layer {k}: batch size must be >= 1, got {b}")
                if not value > 0:
                    raise ProfileError(f"layer {k}: runtime must be positive, got {value} at b={b}")

    @property
    def num_layers(self) -> int:
        return len(self.entries)

    def grid(self, k: int) -> List[int]:
        return sorted(self.entries[k])

    @cached_property
    def dense(self) -> Tuple[Tuple[float, ...], ...]:
        """dense[k-1][b] для b = 0..max_batch; индекс 0 — пустой батч (0 с)."""
        rows = []
        batch = np.arange(1, self.max_batch + 1)
        for k in range(1, self.num_layers + 1):
            bs = self.grid(k)
            vs = [self.entries[k][b] for b in bs]
            values = np.interp(batch, bs, vs)
            beyond = batch > bs[-1]
            if beyond.any():
                # За последней измеренной точкой продолжаем последний отрезок (не убывая);
                # с единственной точкой — без выигрыша от батча: h(1) * b
                if len(bs) >= 2:
                    slope = max((vs[-1] - vs[-2]) / (bs[-1] - bs[-2]), 0.0)
                else:
                    slope = vs[0]
                values[beyond] = vs[-1] + slope * (batch[beyond] - bs[-1])
            rows.append((0.0, *values.tolist()))
        return tuple(rows)

    def lookup(self, k: int, b: int) -> float:
        return lookup_h(self, k, b)


def lookup_h(table: CostTable, k: int, b: int) -> float:
    """h_k(b): точное значение в узле сетки, линейная интерполяция между узлами, +inf при b > B."""
    if not 1 <= k <= table.num_layers:
        raise ValueError(f"layer {k} out of range 1..{table.num_layers}")
    if b < 1:
        raise ValueError(f"batch size must be >= 1, got {b}")
    if b > table.max_batch:
        return INFEASIBLE
    return table.dense[k - 1][b]


class SubadditivityViolation(NamedTuple):
    layer: int
    b1: int
    b2: int
    combined: float  # h_k(b1 + b2)
    separate: float  # h_k(b1) + h_k(b2)


def check_subadditivity(table: CostTable) -> List[SubadditivityViolation]:
    """Все (k, b1, b2) на измеренной сетке с h_k(b1+b2) > h_k(b1) + h_k(b2). Только отчёт."""
    violations = []
    for k in range(1, table.num_layers + 1):
        row = table.entries[k]
        grid = sorted(row)
        for i, b1 in enumerate(grid):
            for b2 in grid[i:]:
                total = b1 + b2
                if total > table.max_batch or total not in row:
                    continue
                separate = row[b1] + row[b2]
                if row[total] > separate and not math.isclose(row[total], separate, rel_tol=SUBADDITIVITY_RTOL):
                    violations.append(SubadditivityViolation(k, b1, b2, row[total], separate))
    return violations


@dataclass(frozen=True, eq=False)
class SharedComponent:
    """Блок слоёв с общей таблицей стоимости; DNN батчатся на слое, если это один и тот же компонент и слой."""
    component_id: str
    cost_table: CostTable
    per_layer_output_size: Tuple[float, ...] = ()  # бит на запрос после каждого слоя
    layer_names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = self.cost_table.num_layers
        if self.per_layer_output_size and len(self.per_layer_output_size) != n:
            raise ProfileError(f"{self.component_id}: {len(self.per_layer_output_size)} output sizes for {n} layers")

    @property
    def num_layers(self) -> int:
        return self.cost_table.num_layers

    def output_size(self, local: int) -> float:
        if not self.per_layer_output_size:
            return 0.0
        return self.per_layer_output_size[local - 1]


@dataclass(frozen=True, eq=False)
class StageRef:
    component: SharedComponent
    first_layer: int  # глобальный номер первого слоя стадии в DNN

    @property
    def last_layer(self) -> int:
        return self.first_layer + self.component.num_layers - 1


@dataclass(frozen=True, eq=False)
class DnnProfile:
    dnn_id: str
    stages: Tuple[StageRef, ...]
    layer_groups: LayerGroups = ()

    def __post_init__(self) -> None:
        if not self.stages:
            raise ProfileError(f"{self.dnn_id}: at least one stage required")
        expected = 1
        for stage in self.stages:
            if stage.first_layer != expected:
                raise ProfileError(f"{self.dnn_id}: stages must be contiguous from layer 1")
            expected = stage.last_layer + 1
        if not self.layer_groups:
            object.__setattr__(self, "layer_groups", ((1, self.num_layers),))
        _check_groups(self.dnn_id, self.layer_groups, self.num_layers)

    @property
    def num_layers(self) -> int:
        return self.stages[-1].last_layer

    @property
    def num_groups(self) -> int:
        return len(self.layer_groups)

    @property
    def max_batch(self) -> int:
        """Наибольший батч, для которого в таблицах есть значения."""
        return min(s.component.cost_table.max_batch for s in self.stages)

    @cached_property
    def _stage_starts(self) -> List[int]:
        return [s.first_layer for s in self.stages]

    def stage_of(self, k: int) -> StageRef:
        if not 1 <= k <= self.num_layers:
            raise ValueError(f"{self.dnn_id}: layer {k} out of range 1..{self.num_layers}")
        return self.stages[bisect.bisect_right(self._stage_starts, k) - 1]

    def locate(self, k: int) -> Tuple[str, int]:
        """Глобальный слой -> (component_id, локальный слой)."""
        stage = self.stage_of(k)
        return stage.component.component_id, k - stage.first_layer + 1

    def layer_of(self, component_id: str, local: int) -> Optional[int]:
        """Обратное отображение; None, если компонент не входит в DNN."""
        for stage in self.stages:
            if stage.component.component_id == component_id and 1 <= local <= stage.component.num_layers:
                return stage.first_layer + local - 1
        return None

    @cached_property
    def cost_rows(self) -> Tuple[Tuple[float, ...], ...]:
        """cost_rows[k][b] = h_k(b) по глобальному номеру слоя; строка 0 не используется."""
        rows: List[Tuple[float, ...]] = [()]
        for stage in self.stages:
            rows.extend(stage.component.cost_table.dense)
        return tuple(rows)

    @cached_property
    def group_index(self) -> Tuple[int, ...]:
        """group_index[k] — номер группы (с 0) слоя k; для k = N+1 — число групп."""
        index = [0] * (self.num_layers + 2)
        for g, (first, last) in enumerate(self.layer_groups):
            for k in range(first, last + 1):
                index[k] = g
        index[self.num_layers + 1] = len(self.layer_groups)
        return tuple(index)

    def group_end(self, k: int) -> int:
        return self.layer_groups[self.group_index[k]][1]

    def layer_cost(self, k: int, b: int) -> float:
        row = self.cost_rows[k]
        return row[b] if b < len(row) else INFEASIBLE

    def runtime(self, first: int = 1, last: Optional[int] = None, batch: int = 1) -> float:
        """Время прохода слоёв first..last одним батчем фиксированного размера."""
        last = self.num_layers if last is None else last
        return sum(self.layer_cost(k, batch) for k in range(first, last + 1))

    def output_size(self, k: int) -> float:
        """Размер выхода слоя k (бит на запрос)."""
        stage = self.stage_of(k)
        return stage.component.output_size(k - stage.first_layer + 1)

    def with_groups(self, groups: LayerGroups) -> "DnnProfile":
        return replace(self, layer_groups=tuple(groups))


def _check_groups(dnn_id: str, groups: LayerGroups, n: int) -> None:
    expected = 1
    for first, last in groups:
        if first != expected or last < first:
            raise ProfileError(f"{dnn_id}: layer groups must partition 1..{n} contiguously")
        expected = last + 1
    if expected != n + 1:
        raise ProfileError(f"{dnn_id}: layer groups must cover 1..{n}")


def group_layers(profile: DnnProfile, count: int) -> LayerGroups:
    """
    Жадное разбиение на count непрерывных групп с близким временем при b=1:
    группа закрывается, когда её сумма достигает total/count, или когда оставшихся слоёв
    ровно столько, сколько ещё нужно групп. Последняя группа забирает остаток.
    """
    n = profile.num_layers
    if count < 1:
        raise ProfileError(f"group count must be >= 1, got {count}")
    if count > n:
        raise ProfileError(f"{profile.dnn_id}: cannot form {count} groups from {n} layers")
    costs = [profile.layer_cost(k, 1) for k in range(1, n + 1)]
    threshold = sum(costs) / count
    groups: List[Tuple[int, int]] = []
    start, acc = 1, 0.0
    for k in range(1, n + 1):
        acc += costs[k - 1]
        needed_after = count - len(groups) - 1
        if needed_after == 0 or k == n:
            continue
        if acc >= threshold * (1 - 1e-9) or n - k == needed_after:
            groups.append((start, k))
            start, acc = k + 1, 0.0
    groups.append((start, n))
    return tuple(groups)


@dataclass(frozen=True, eq=False)
class ProfileSet:
    """Все компоненты и DNN из одного файла профиля."""
    components: Mapping[str, SharedComponent]
    dnns: Mapping[str, DnnProfile]
    max_batch: int

    def dnn(self, dnn_id: str) -> DnnProfile:
        try:
            return self.dnns[dnn_id]
        except KeyError:
            raise ProfileError(f"unknown dnn {dnn_id!r}; known: {sorted(self.dnns)}") from None

    @cached_property
    def shared_component_ids(self) -> frozenset:
        """Компоненты, на которые ссылаются хотя бы две DNN."""
        users: Dict[str, set] = {}
        for dnn in self.dnns.values():
            for stage in dnn.stages:
                users.setdefault(stage.component.component_id, set()).add(dnn.dnn_id)
        return frozenset(c for c, ds in users.items() if len(ds) > 1)

    def with_groups(self, count: int) -> "ProfileSet":
        """Сгруппировать слои каждой DNN; DNN с меньшим числом слоёв получают по группе на слой."""
        dnns = {
            d: p.with_groups(group_layers(p, min(count, p.num_layers)))
            for d, p in self.dnns.items()
        }
        return replace(self, dnns=dnns)

    def subset(self, dnn_ids: Iterable[str]) -> "ProfileSet":
        return replace(self, dnns={d: self.dnn(d) for d in dnn_ids})

    def subadditivity_report(self) -> Dict[str, List[SubadditivityViolation]]:
        return {cid: check_subadditivity(c.cost_table) for cid, c in sorted(self.components.items())}


def batch_reduction(profile: DnnProfile, batch: int = 10) -> float:
    """Сокращение времени на запрос при батче: 1 - (sum h_k(b) / b) / sum h_k(1)."""
    return 1.0 - (profile.runtime(batch=batch) / batch) / profile.runtime(batch=1)


def profile_from_dict(data: Mapping) -> ProfileSet:
    """Построить ProfileSet из разобранного JSON (времена в мс)."""
    try:
        max_batch = int(data["max_batch"])
        raw_components = data["components"]
        raw_dnns = data["dnns"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProfileError(f"profile must define max_batch, components and dnns: {exc}") from exc

    components: Dict[str, SharedComponent] = {}
    for comp in raw_components:
        cid = str(comp.get("component_id", ""))
        if not cid:
            raise ProfileError("component without component_id")
        if cid in components:
            raise ProfileError(f"duplicate component {cid!r}")
        entries: Dict[int, Dict[int, float]] = {}
        names, outputs = [], []
        for k, layer in enumerate(comp.get("layers", []), start=1):
            runtimes = layer.get("runtimes_ms", {})
            row = {}
            for b, ms in runtimes.items():
                ms = float(ms)
                if ms < 0:
                    raise ProfileError(f"{cid} layer {k}: negative runtime {ms} ms at b={b}")
                row[int(b)] = ms / 1000.0
            if 1 not in row:
                raise ProfileError(f"{cid} layer {k}: missing runtime for batch size 1")
            entries[k] = row
            names.append(str(layer.get("name", f"layer{k}")))
            outputs.append(float(layer.get("output_bits", 0.0)))
        if not entries:
            raise ProfileError(f"component {cid!r} has no layers")
        components[cid] = SharedComponent(
            component_id=cid,
            cost_table=CostTable(entries=entries, max_batch=max_batch),
            per_layer_output_size=tuple(outputs),
            layer_names=tuple(names),
        )

    dnns: Dict[str, DnnProfile] = {}
    for raw in raw_dnns:
        did = str(raw.get("dnn_id", ""))
        if not did:
            raise ProfileError("dnn without dnn_id")
        stages, first = [], 1
        for cid in raw.get("stages", []):
            if cid not in components:
                raise ProfileError(f"dnn {did!r} references undeclared component {cid!r}")
            stage = StageRef(component=components[cid], first_layer=first)
            stages.append(stage)
            first = stage.last_layer + 1
        dnns[did] = DnnProfile(dnn_id=did, stages=tuple(stages))
    return ProfileSet(components=components, dnns=dnns, max_batch=max_batch)


def profile_to_dict(profiles: ProfileSet) -> dict:
    """Обратное преобразование (мс), чтобы сохранить эталонные профили в файл."""
    components = []
    for cid, comp in profiles.components.items():
        layers = []
        for k in range(1, comp.num_layers + 1):
            row = comp.cost_table.entries[k]
            layers.append({
                "name": comp.layer_names[k - 1] if comp.layer_names else f"layer{k}",
                "runtimes_ms": {str(b): row[b] * 1000.0 for b in sorted(row)},
                "output_bits": comp.output_size(k),
            })
        components.append({"component_id": cid, "layers": layers})
    dnns = [
        {"dnn_id": d, "stages": [s.component.component_id for s in p.stages]}
        for d, p in profiles.dnns.items()
    ]
    return {"max_batch": profiles.max_batch, "components": components, "dnns": dnns}


def load_profile(path: str | Path) -> ProfileSet:
    """Загрузить профиль из JSON; ошибки разбора и валидации -> ProfileError."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise ProfileError(f"profile not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileError(f"cannot parse {path}: {exc}") from exc
    return profile_from_dict(data)
