"""
Планирование с дедлайнами: EDF с батчингом, ДП по числу опоздавших (Our-Tardy), сброс просроченных.
Дедлайн включительный: запрос успевает, если c_i <= deadline.
"""
from __future__ import annotations

import bisect
import logging
import time
from dataclasses import dataclass
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

from ..core.profile import INFEASIBLE, DnnProfile
from ..core.state import Request, RequestState, scheduling_key
from .dp import VARIANT_FULL, build_units, sweep_hist
from .segment import OBJECTIVE_TARDY, Schedule, SegmentPlan, assemble, profile_for, sweep

logger = logging.getLogger(__name__)

TIE_BREAK_ELAPSED = "elapsed"
TIE_BREAK_COMPLETION = "completion"


def drop_expired(requests: Sequence[Request], now: float) -> Tuple[List[Request], List[Request]]:
    """Запросы с deadline < now уходят в dropped (состояние dropped); порядок сохраняется."""
    kept: List[Request] = []
    dropped: List[Request] = []
    for r in requests:
        if r.deadline < now:
            if r.active:
                r.transition(RequestState.DROPPED)
            dropped.append(r)
        else:
            kept.append(r)
    return kept, dropped


def edf_batch(requests: Sequence[Request], profiles, max_batch: int, now: float = 0.0) -> Schedule:
    """
    Проходы в порядке дедлайнов: запрос добавляется в формируемый батч, если все участники
    (включая его) успевают по предсказанной временной шкале; иначе откладывается до следующего
    прохода. Батч — только из одной DNN. Запрос, не успевающий даже в одиночку, сбрасывается.
    """
    started = time.perf_counter()
    remaining = sorted(requests, key=lambda r: (r.deadline, r.arrival_time, r.id))
    t = now
    plans: List[SegmentPlan] = []
    dropped: List[int] = []
    while remaining:
        batch: List[Request] = []
        profile: Optional[DnnProfile] = None
        limit = max_batch
        duration = 0.0
        skipped: List[Request] = []
        for idx, r in enumerate(remaining):
            if batch and len(batch) >= limit:
                skipped.extend(remaining[idx:])
                break
            if profile is not None and r.dnn_id != profile.dnn_id:
                skipped.append(r)
                continue
            p = profile or profile_for(profiles, r.dnn_id)
            cap = max(1, min(max_batch, p.max_batch))
            candidate = batch + [r]
            d = sweep((m.current_layer for m in candidate), p, cap).duration
            finish = t + d
            if d != INFEASIBLE and all(finish <= m.deadline for m in candidate):
                batch, duration, profile, limit = candidate, d, p, cap
            elif not batch:
                dropped.append(r.id)
            else:
                skipped.append(r)
        if batch:
            batch.sort(key=scheduling_key)
            plans.append(SegmentPlan(
                dnn_id=profile.dnn_id,
                request_ids=tuple(m.id for m in batch),
                start_layer=min(m.current_layer for m in batch),
                duration=duration,
            ))
            t += duration
        remaining = skipped
    segments, completion = assemble(plans)
    return Schedule(
        segments=segments,
        predicted_completion=completion,
        objective_value=float(len(dropped)),
        objective=OBJECTIVE_TARDY,
        dropped=tuple(dropped),
        compute_time_s=time.perf_counter() - started,
    )


class TardyPhase(NamedTuple):
    """Итог ДП по опоздавшим для одной DNN, начиная с момента start."""
    plans: List[SegmentPlan]
    tardy_ids: Tuple[int, ...]
    tardy: int
    elapsed: float      # длительность всех сегментов фазы (до сброса опоздавших)
    cost: float         # взвешенная сумма active * duration


@dataclass
class _Cell:
    """Состояние префикса; prev/unit/duration — для восстановления разбиения."""
    tardy: int = 0
    elapsed: float = 0.0
    cost: float = 0.0
    prev: Optional["_Cell"] = None
    unit: int = 0
    duration: float = 0.0

    def key(self, tie_break: str):
        if tie_break == TIE_BREAK_COMPLETION:
            return (self.tardy, self.cost, self.elapsed)
        return (self.tardy, self.elapsed, self.cost)

    def dominates(self, other: "_Cell", tie_break: str) -> bool:
        if self.tardy > other.tardy or self.elapsed > other.elapsed:
            return False
        if tie_break == TIE_BREAK_COMPLETION:
            return self.cost <= other.cost
        return self.key(tie_break) <= other.key(tie_break)


def _insert(front: List[_Cell], cell: _Cell, tie_break: str) -> None:
    """Недоминируемые состояния префикса; при равенстве остаётся добавленное раньше."""
    if any(d.dominates(cell, tie_break) for d in front):
        return
    front[:] = [d for d in front if not cell.dominates(d, tie_break)]
    front.append(cell)


def solve_tardy(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    start: float,
    tie_break: str = TIE_BREAK_ELAPSED,
    variant: str = VARIANT_FULL,
    extra_active: int = 0,
) -> TardyPhase:
    """
    Та же рекурсия по сегментам, но значение префикса — (число опоздавших, прошедшее время).
    Опоздавший участник сегмента j..i: start + elapsed(j-1) + duration(j..i) > deadline.
    Для каждого префикса хранится множество недоминируемых состояний: опоздания суффикса
    зависят от префикса только через elapsed, поэтому минимум числа опоздавших точный.
    Итог — лексикографический минимум (tardy, elapsed, cost) или (tardy, cost, elapsed).
    """
    ordered = sorted(requests, key=scheduling_key)
    n = len(ordered)
    layers = [r.current_layer for r in ordered]
    units = build_units(layers, profile, variant, max_batch, split_oversized=True)
    n_layers = profile.num_layers
    rows = profile.cost_rows

    fronts: List[List[_Cell]] = [[_Cell()]] + [[] for _ in units]
    for v in range(len(units)):
        last = units[v][1]
        start_layer = layers[last]
        hist = [0] * (n_layers + 2)
        deadlines: List[float] = []
        for u in range(v, -1, -1):
            first, unit_last = units[u]
            for p in range(first, unit_last + 1):
                hist[layers[p]] += 1
                bisect.insort(deadlines, ordered[p].deadline)
            dur = sweep_hist(hist, start_layer, n_layers, rows, max_batch)
            if dur == INFEASIBLE:
                break
            weight = n - first + extra_active
            for prev in fronts[u]:
                finish = start + (prev.elapsed + dur)
                # число дедлайнов строго раньше finish
                late = bisect.bisect_left(deadlines, finish)
                _insert(fronts[v + 1], _Cell(
                    tardy=prev.tardy + late,
                    elapsed=prev.elapsed + dur,
                    cost=prev.cost + weight * dur,
                    prev=prev,
                    unit=u,
                    duration=dur,
                ), tie_break)

    if not fronts[-1]:
        # Недостижимо при split_oversized: одиночные единицы всегда помещаются
        raise ValueError(f"{profile.dnn_id}: no feasible segmentation")
    final = min(fronts[-1], key=lambda c: c.key(tie_break))

    offsets = []
    cell, v = final, len(units)
    while v > 0:
        offsets.append((units[cell.unit][0], units[v - 1][1], cell.duration))
        v = cell.unit
        cell = cell.prev
    offsets.reverse()

    plans: List[SegmentPlan] = []
    tardy_ids: List[int] = []
    elapsed = 0.0
    for first, last, dur in offsets:
        elapsed += dur
        members = ordered[first : last + 1]
        tardy_ids.extend(m.id for m in members if m.deadline < start + elapsed)
        plans.append(SegmentPlan(
            dnn_id=profile.dnn_id,
            request_ids=tuple(m.id for m in members),
            start_layer=layers[last],
            duration=dur,
        ))
    return TardyPhase(plans, tuple(tardy_ids), final.tardy, final.elapsed, final.cost)


def without(
    plans: Sequence[SegmentPlan],
    drop: Sequence[int],
    layers_of: Mapping[int, int],
    profiles,
    max_batch: int,
) -> List[SegmentPlan]:
    """
    Убрать сброшенные запросы (и попутчиков) из сегментов и пересчитать длительности проходов.
    layers_of — слой каждого участника на момент начала его сегмента.
    """
    gone = set(drop)
    if not gone:
        return list(plans)
    out = []
    for p in plans:
        keep = tuple(rid for rid in p.request_ids if rid not in gone)
        if not keep:
            continue
        absorbed = tuple(a for a in p.absorbed if a[0] not in gone)
        profile = profile_for(profiles, p.dnn_id)
        layers = [layers_of[rid] for rid in keep]
        riders = [(join, last) for _, join, last in absorbed]
        out.append(p._replace(
            request_ids=keep,
            start_layer=min(layers),
            duration=sweep(layers, profile, max_batch, riders).duration,
            absorbed=absorbed,
        ))
    return out


def tardy_dp(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    now: float = 0.0,
    tie_break: str = TIE_BREAK_ELAPSED,
    variant: str = VARIANT_FULL,
) -> Schedule:
    """Минимум числа опоздавших; предсказанно опоздавшие помечаются к сбросу."""
    started = time.perf_counter()
    phase = solve_tardy(requests, profile, max_batch, now, tie_break=tie_break, variant=variant)
    layers_of = {r.id: r.current_layer for r in requests}
    plans = without(phase.plans, phase.tardy_ids, layers_of, profile, max_batch)
    segments, completion = assemble(plans)
    if phase.tardy_ids:
        logger.debug("tardy dp %s: %d predicted late", profile.dnn_id, len(phase.tardy_ids))
    return Schedule(
        segments=segments,
        predicted_completion=completion,
        objective_value=float(phase.tardy),
        objective=OBJECTIVE_TARDY,
        dropped=phase.tardy_ids,
        compute_time_s=time.perf_counter() - started,
    )
