"""
Динамическое программирование по сегментам (минимум суммарного времени завершения):
  min_cost(i) = min_j  min_cost(j-1) + active(j) * duration(j..i),  active(j) = |R| - j + 1.
Три варианта точек разбиения: после любого запроса, на границах слоёв, на границах групп слоёв.
Инкрементальный пересчёт переиспользует длительности сегментов и неизменный префикс таблицы.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..core.profile import INFEASIBLE, DnnProfile, group_layers
from ..core.state import Request, scheduling_key
from ..errors import InfeasibleScheduleError, ProfileError
from .segment import OBJECTIVE_COMPLETION, Schedule, SegmentPlan, assemble

logger = logging.getLogger(__name__)

VARIANT_FULL = "full"
VARIANT_LAYER = "layer"
VARIANT_GROUPED = "grouped"

Unit = Tuple[int, int]  # (первый, последний) индекс в упорядоченном снимке, включительно


@dataclass
class DpTable:
    """
    Таблица ДП по одному снимку. min_cost[u] — минимум для первых u единиц разбиения,
    choice[u] — первая единица последнего сегмента. Индексы с 0, единицы — в порядке поступления.
    """
    dnn_id: str
    variant: str
    max_batch: int
    extra_active: int
    request_ids: List[int]
    snapshot_layers: List[int]
    units: List[Unit]
    min_cost: List[float]
    choice: List[int]
    durations: Dict[Tuple[int, int], float] = field(default_factory=dict, repr=False)
    reused_units: int = 0  # сколько префиксных записей взято из предыдущей таблицы

    @property
    def size(self) -> int:
        return len(self.request_ids)

    @property
    def objective(self) -> float:
        return self.min_cost[-1]


def build_units(
    layers: Sequence[int],
    profile: DnnProfile,
    variant: str,
    max_batch: int,
    split_oversized: bool,
) -> List[Unit]:
    if variant == VARIANT_FULL:
        return [(p, p) for p in range(len(layers))]
    if variant == VARIANT_LAYER:
        bucket = list(layers)
    elif variant == VARIANT_GROUPED:
        bucket = [profile.group_index[l] for l in layers]
    else:
        raise ValueError(f"unknown dp variant {variant!r}")
    units: List[Unit] = []
    start = 0
    for p in range(1, len(layers) + 1):
        if p == len(layers) or bucket[p] != bucket[start]:
            if split_oversized:
                # Слой/группа с более чем B запросами режется на куски по B в порядке поступления
                for s in range(start, p, max_batch):
                    units.append((s, min(s + max_batch, p) - 1))
            else:
                units.append((start, p - 1))
            start = p
    return units


def _run_starts(ids: Sequence[int], layers: Sequence[int], previous: Optional[DpTable]) -> List[int]:
    """
    run_start[p] — наименьший q, при котором запросы q..p шли подряд в прошлом снимке
    с теми же слоями. Длительность сегмента j..i переиспользуется, только если run_start[i] <= j.
    """
    n = len(ids)
    if previous is None:
        return list(range(n))
    old_pos = {rid: p for p, rid in enumerate(previous.request_ids)}
    starts = [0] * n
    for p in range(n):
        pos = old_pos.get(ids[p])
        same = pos is not None and previous.snapshot_layers[pos] == layers[p]
        if not same:
            starts[p] = n  # сам с собой тоже не переиспользуется
        elif p > 0 and starts[p - 1] < n and old_pos.get(ids[p - 1]) == pos - 1:
            starts[p] = starts[p - 1]
        else:
            starts[p] = p
    return starts


def solve(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    variant: str = VARIANT_FULL,
    extra_active: int = 0,
    previous: Optional[DpTable] = None,
    split_oversized: bool = True,
) -> DpTable:
    """Заполнить таблицу ДП; previous (если есть) даёт переиспользуемые записи."""
    ordered = sorted(requests, key=scheduling_key)
    n_layers = profile.num_layers
    for r in ordered:
        if r.dnn_id != profile.dnn_id:
            raise ProfileError(f"request {r.id} belongs to {r.dnn_id!r}, profile is {profile.dnn_id!r}")
        if not 1 <= r.current_layer <= n_layers:
            raise ValueError(f"request {r.id}: layer {r.current_layer} out of range 1..{n_layers}")
    ids = [r.id for r in ordered]
    layers = [r.current_layer for r in ordered]
    n = len(ordered)
    units = build_units(layers, profile, variant, max_batch, split_oversized)
    u_count = len(units)

    min_cost = [0.0] + [INFEASIBLE] * u_count
    choice = [0] * (u_count + 1)
    durations: Dict[Tuple[int, int], float] = {}
    reuse_from = 0
    run_start = _run_starts(ids, layers, previous)
    old_durations = previous.durations if previous is not None and previous.max_batch == max_batch else {}

    if (
        previous is not None
        and previous.size == n
        and previous.extra_active == extra_active
        and previous.max_batch == max_batch
        and previous.variant == variant
    ):
        # Записи min_cost зависят только от единиц до них и от |R|
        while reuse_from < min(u_count, len(previous.units)):
            first, last = units[reuse_from]
            if previous.units[reuse_from] != (first, last) or run_start[last] > first:
                break
            if previous.request_ids[first] != ids[first]:
                break
            reuse_from += 1
        min_cost[: reuse_from + 1] = previous.min_cost[: reuse_from + 1]
        choice[: reuse_from + 1] = previous.choice[: reuse_from + 1]

    rows = profile.cost_rows
    hist = [0] * (n_layers + 2)
    for v in range(u_count):
        last = units[v][1]
        start_layer = layers[last]
        for k in range(len(hist)):
            hist[k] = 0
        for u in range(v, -1, -1):
            first, unit_last = units[u]
            for p in range(first, unit_last + 1):
                hist[layers[p]] += 1
            key = (ids[first], ids[last])
            if run_start[last] <= first and key in old_durations:
                dur = old_durations[key]
            else:
                dur = sweep_hist(hist, start_layer, n_layers, rows, max_batch)
            durations[key] = dur
            if dur == INFEASIBLE:
                break  # добавление участников только увеличивает b(k)
            if v < reuse_from:
                continue
            c = min_cost[u] + (n - first + extra_active) * dur
            if c < min_cost[v + 1]:
                min_cost[v + 1] = c
                choice[v + 1] = u

    return DpTable(
        dnn_id=profile.dnn_id,
        variant=variant,
        max_batch=max_batch,
        extra_active=extra_active,
        request_ids=ids,
        snapshot_layers=layers,
        units=units,
        min_cost=min_cost,
        choice=choice,
        durations=durations,
        reused_units=reuse_from,
    )


def sweep_hist(hist: List[int], start: int, n_layers: int, rows, max_batch: int) -> float:
    b = 0
    duration = 0.0
    for k in range(start, n_layers + 1):
        b += hist[k]
        row = rows[k]
        if b > max_batch or b >= len(row):
            return INFEASIBLE
        duration += row[b]
    return duration


def backtrack(table: DpTable) -> List[SegmentPlan]:
    """Сегменты в порядке исполнения (сегмент с самым ранним запросом первым)."""
    plans: List[SegmentPlan] = []
    v = len(table.units)
    while v > 0:
        u = table.choice[v]
        first, last = table.units[u][0], table.units[v - 1][1]
        key = (table.request_ids[first], table.request_ids[last])
        plans.append(SegmentPlan(
            dnn_id=table.dnn_id,
            request_ids=tuple(table.request_ids[first : last + 1]),
            start_layer=table.snapshot_layers[last],
            duration=table.durations[key],
        ))
        v = u
    plans.reverse()
    return plans


def _infeasible_layer(table: DpTable) -> Optional[int]:
    for first, last in table.units:
        if last - first + 1 > table.max_batch:
            return table.snapshot_layers[last]
    return None


def table_to_schedule(table: DpTable, compute_time_s: float = 0.0) -> Schedule:
    if table.units and math.isinf(table.objective):
        layer = _infeasible_layer(table)
        raise InfeasibleScheduleError(
            f"{table.dnn_id}: no segmentation fits max batch {table.max_batch}"
            + (f" (layer {layer} holds too many requests)" if layer is not None else ""),
            layer=layer,
        )
    segments, completion = assemble(backtrack(table))
    return Schedule(
        segments=segments,
        predicted_completion=completion,
        objective_value=table.objective,
        objective=OBJECTIVE_COMPLETION,
        compute_time_s=compute_time_s,
        table=table,
    )


def _timed(requests, profile, max_batch, variant, previous=None, split_oversized=True, extra_active=0) -> Schedule:
    started = time.perf_counter()
    table = solve(
        requests, profile, max_batch, variant,
        extra_active=extra_active, previous=previous, split_oversized=split_oversized,
    )
    elapsed = time.perf_counter() - started
    logger.debug(
        "dp %s/%s: %d requests, %d units, reused %d, %.3f ms",
        profile.dnn_id, variant, table.size, len(table.units), table.reused_units, elapsed * 1000.0,
    )
    return table_to_schedule(table, elapsed)


def compute_schedule(requests: Sequence[Request], profile: DnnProfile, max_batch: int) -> Schedule:
    """Оптимальное FIFO-расписание: точки разбиения после любого запроса, O(|R|^2 N)."""
    return _timed(requests, profile, max_batch, VARIANT_FULL)


def compute_schedule_layer_units(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    split_oversized: bool = True,
) -> Schedule:
    """Все запросы одного слоя батчатся вместе или не батчатся вовсе."""
    return _timed(requests, profile, max_batch, VARIANT_LAYER, split_oversized=split_oversized)


def compute_schedule_grouped(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    groups: Optional[int] = None,
    split_oversized: bool = True,
) -> Schedule:
    """Точки разбиения только на границах групп слоёв; groups=None — группы из профиля."""
    if groups is not None and profile.num_groups != groups:
        if groups > profile.num_layers:
            raise ProfileError(f"{profile.dnn_id}: cannot form {groups} groups from {profile.num_layers} layers")
        profile = profile.with_groups(group_layers(profile, groups))
    return _timed(requests, profile, max_batch, VARIANT_GROUPED, split_oversized=split_oversized)


def incremental_update(
    table: DpTable,
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    split_oversized: bool = True,
) -> Schedule:
    """
    Пересчёт после завершения слоёв и новых поступлений. requests — текущий снимок.
    Результат совпадает с пересчётом с нуля тем же вариантом.
    """
    return _timed(
        requests, profile, max_batch, table.variant,
        previous=table, split_oversized=split_oversized, extra_active=table.extra_active,
    )


def schedule_variant(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    variant: str,
    previous: Optional[DpTable] = None,
    extra_active: int = 0,
    split_oversized: bool = True,
) -> Schedule:
    """Общая точка входа для планировщиков симулятора."""
    if previous is not None and (previous.variant != variant or previous.dnn_id != profile.dnn_id):
        previous = None
    return _timed(
        requests, profile, max_batch, variant,
        previous=previous, split_oversized=split_oversized, extra_active=extra_active,
    )
