"""
Несколько DNN: перебор перестановок моделей, внутри перестановки — фазы по одной DNN подряд.
ДП фазы учитывает запросы следующих фаз в active(j), поэтому для фиксированной перестановки
результат точный. С общими компонентами сегмент DNN m подбирает на общих слоях более ранние
запросы других DNN и довозит их до конца общего блока.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..config import MAX_EXACT_PERMUTATION_DNNS
from ..core.events import EventKind, SimEvent
from ..core.profile import INFEASIBLE, DnnProfile, ProfileSet
from ..core.state import Request, arrival_key, scheduling_key
from ..errors import InfeasibleScheduleError, PermutationLimitError
from .deadline import TIE_BREAK_ELAPSED, solve_tardy, without
from .dp import VARIANT_FULL, DpTable, backtrack, solve
from .segment import (
    OBJECTIVE_COMPLETION,
    OBJECTIVE_TARDY,
    Schedule,
    SegmentPlan,
    assemble,
    sweep,
)

logger = logging.getLogger(__name__)


@dataclass
class _Candidate:
    order: Tuple[str, ...]
    shared: bool
    plans: List[SegmentPlan]
    completion: Dict[int, float]
    layers_of: Dict[int, int]
    late_ids: Tuple[int, ...]
    tables: Dict[str, DpTable] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return sum(self.completion.values())

    def key(self, objective: str):
        if objective == OBJECTIVE_TARDY:
            return (len(self.late_ids), self.total)
        return (self.total,)


def dnn_orders(
    by_dnn: Mapping[str, Sequence[Request]],
    heuristic: bool = False,
    exact_limit: int = MAX_EXACT_PERMUTATION_DNNS,
) -> List[Tuple[str, ...]]:
    """
    Перестановки DNN с ожидающими запросами. Первая — по самому раннему ожидающему запросу,
    она же единственная в эвристическом режиме.
    """
    ids = sorted(by_dnn, key=lambda d: min(arrival_key(r) for r in by_dnn[d]))
    if heuristic:
        return [tuple(ids)]
    if len(ids) > exact_limit:
        raise PermutationLimitError(
            f"{len(ids)} DNNs with pending requests exceed the exact-search limit of {exact_limit}; "
            "use heuristic mode (earliest-pending order)"
        )
    return list(itertools.permutations(ids))


def _absorb(
    plans: List[SegmentPlan],
    own: Sequence[Request],
    profile: DnnProfile,
    foreign: Sequence[Request],
    profiles: ProfileSet,
    max_batch: int,
) -> Tuple[List[SegmentPlan], Dict[int, int]]:
    """
    Попутчики для сегментов DNN profile. Запрос f другой DNN, стоящий на общем слое x
    (в нумерации этой DNN), едет с сегментом, содержащим i* — первый свой запрос со слоем <= x,
    поступивший позже f. Попутчик сходит на последнем слое общего блока; берутся в порядке
    поступления, пока проход помещается в B. Возвращает новые сегменты и новые слои попутчиков.
    """
    ordered = sorted(own, key=scheduling_key)
    plan_of = {}
    for pi, p in enumerate(plans):
        for rid in p.request_ids:
            plan_of[rid] = pi
    layers = {r.id: r.current_layer for r in ordered}
    absorbed: Dict[int, List[Tuple[int, int, int]]] = {}
    moved: Dict[int, int] = {}

    for f in sorted(foreign, key=arrival_key):
        fp = profiles.dnn(f.dnn_id)
        if f.current_layer > fp.num_layers:
            continue
        cid, local = fp.locate(f.current_layer)
        x = profile.layer_of(cid, local)
        if x is None:
            continue
        stage = profile.stage_of(x)
        exit_layer = fp.layer_of(cid, stage.component.num_layers) + 1
        if exit_layer > fp.num_layers:
            continue  # общий блок — последний у f; такие запросы не подбираются
        host = next(
            (r for r in ordered if r.current_layer <= x and arrival_key(f) < arrival_key(r)),
            None,
        )
        if host is None:
            continue
        pi = plan_of[host.id]
        trial = absorbed.get(pi, []) + [(f.id, x, stage.last_layer)]
        members = [layers[rid] for rid in plans[pi].request_ids]
        riders = [(join, last) for _, join, last in trial]
        if sweep(members, profile, max_batch, riders).duration == INFEASIBLE:
            continue
        absorbed[pi] = trial
        moved[f.id] = exit_layer

    out = []
    for pi, p in enumerate(plans):
        if pi not in absorbed:
            out.append(p)
            continue
        members = [layers[rid] for rid in p.request_ids]
        riders = [(join, last) for _, join, last in absorbed[pi]]
        out.append(p._replace(
            duration=sweep(members, profile, max_batch, riders).duration,
            absorbed=tuple(absorbed[pi]),
        ))
    return out, moved


def _evaluate(
    order: Tuple[str, ...],
    by_dnn: Mapping[str, Sequence[Request]],
    profiles: ProfileSet,
    max_batch: int,
    variant: str,
    share: bool,
    objective: str,
    now: float,
    tie_break: str,
    cache: Dict[str, DpTable],
) -> _Candidate:
    current: Dict[str, List[Request]] = {d: list(rs) for d, rs in by_dnn.items()}
    deadline = {r.id: r.deadline for rs in by_dnn.values() for r in rs}
    layers_of: Dict[int, int] = {}
    plans_all: List[SegmentPlan] = []
    tables: Dict[str, DpTable] = {}
    elapsed = 0.0
    for idx, dnn in enumerate(order):
        profile = profiles.dnn(dnn)
        limit = max(1, min(max_batch, profile.max_batch))
        own = current[dnn]
        later = order[idx + 1 :]
        extra = sum(len(current[d]) for d in later)
        for r in own:
            layers_of[r.id] = r.current_layer
        if objective == OBJECTIVE_TARDY:
            phase = solve_tardy(own, profile, limit, now + elapsed, tie_break, variant, extra)
            plans = phase.plans
        else:
            table = solve(own, profile, limit, variant, extra_active=extra, previous=cache.get(dnn))
            cache[dnn] = table
            tables[dnn] = table
            if math.isinf(table.objective):
                raise InfeasibleScheduleError(f"{dnn}: no segmentation fits max batch {limit}")
            plans = backtrack(table)
        if share and later:
            foreign = [r for d in later for r in current[d]]
            plans, moved = _absorb(plans, own, profile, foreign, profiles, limit)
            for d in later:
                current[d] = [
                    dataclasses.replace(r, current_layer=moved[r.id]) if r.id in moved else r
                    for r in current[d]
                ]
        plans_all.extend(plans)
        elapsed += sum(p.duration for p in plans)

    _, completion = assemble(plans_all)
    late = tuple(sorted(rid for rid, c in completion.items() if now + c > deadline[rid]))
    return _Candidate(order, share, plans_all, completion, layers_of, late, tables)


def _search(
    requests: Sequence[Request],
    profiles: ProfileSet,
    max_batch: int,
    share: bool,
    variant: str,
    objective: str,
    now: float,
    tie_break: str,
    heuristic: bool,
    exact_limit: int,
    previous: Optional[Mapping[str, DpTable]],
) -> Schedule:
    started = time.perf_counter()
    by_dnn: Dict[str, List[Request]] = {}
    for r in requests:
        by_dnn.setdefault(r.dnn_id, []).append(r)
    if not by_dnn:
        return Schedule(objective=objective)

    cache: Dict[str, DpTable] = dict(previous or {})
    best: Optional[_Candidate] = None
    for order in dnn_orders(by_dnn, heuristic, exact_limit):
        modes = (False, True) if share else (False,)
        for shared in modes:
            cand = _evaluate(order, by_dnn, profiles, max_batch, variant, shared, objective, now, tie_break, cache)
            if best is None or cand.key(objective) < best.key(objective):
                best = cand

    plans = best.plans
    dropped: Tuple[int, ...] = ()
    if objective == OBJECTIVE_TARDY:
        dropped = best.late_ids
        plans = without(plans, dropped, best.layers_of, profiles, max_batch)
    segments, completion = assemble(plans)
    elapsed = time.perf_counter() - started
    logger.debug(
        "multi-dnn order %s (shared=%s): total %.6f s, %d late, %.3f ms",
        "/".join(best.order), best.shared, best.total, len(best.late_ids), elapsed * 1000.0,
    )
    return Schedule(
        segments=segments,
        predicted_completion=completion,
        objective_value=float(len(dropped)) if objective == OBJECTIVE_TARDY else sum(completion.values()),
        objective=objective,
        dropped=dropped,
        compute_time_s=elapsed,
        table=best.tables,
    )


def schedule_multi(
    requests: Sequence[Request],
    profiles: ProfileSet,
    max_batch: int,
    *,
    variant: str = VARIANT_FULL,
    objective: str = OBJECTIVE_COMPLETION,
    now: float = 0.0,
    tie_break: str = TIE_BREAK_ELAPSED,
    heuristic: bool = False,
    exact_limit: int = MAX_EXACT_PERMUTATION_DNNS,
    previous: Optional[Mapping[str, DpTable]] = None,
) -> Schedule:
    """Лучшая перестановка DNN; все запросы одной DNN идут до следующей DNN."""
    return _search(
        requests, profiles, max_batch, False, variant, objective, now, tie_break,
        heuristic, exact_limit, previous,
    )


def schedule_multi_shared(
    requests: Sequence[Request],
    profiles: ProfileSet,
    max_batch: int,
    *,
    variant: str = VARIANT_FULL,
    objective: str = OBJECTIVE_COMPLETION,
    now: float = 0.0,
    tie_break: str = TIE_BREAK_ELAPSED,
    heuristic: bool = False,
    exact_limit: int = MAX_EXACT_PERMUTATION_DNNS,
    previous: Optional[Mapping[str, DpTable]] = None,
) -> Schedule:
    """
    Как schedule_multi, но с подбором попутчиков на общих компонентах. Каждая перестановка
    оценивается с подбором и без, поэтому результат не хуже schedule_multi.
    """
    return _search(
        requests, profiles, max_batch, True, variant, objective, now, tie_break,
        heuristic, exact_limit, previous,
    )


def reschedule_trigger(event: SimEvent, arrivals_since_plan: int = 0) -> bool:
    """
    Пересчёт нужен, если шаг на сервере завершился и с прошлого плана были поступления,
    либо батч пересёк границу общих и собственных слоёв.
    """
    if event.kind != EventKind.LAYER_COMPLETE:
        return False
    if event.payload.get("crossed_shared_boundary", False):
        return True
    return arrivals_since_plan > 0
