"""Базовые планировщики: No-Batch (по одному, FIFO) и Batch (жадно до B с самого раннего)."""
from __future__ import annotations

from typing import Dict, List, Sequence

from ..core.state import Request, arrival_key, scheduling_key
from .segment import OBJECTIVE_COMPLETION, Schedule, SegmentPlan, assemble, profile_for, sweep


def _finish(plans: List[SegmentPlan]) -> Schedule:
    segments, completion = assemble(plans)
    return Schedule(
        segments=segments,
        predicted_completion=completion,
        objective_value=sum(completion.values()),
        objective=OBJECTIVE_COMPLETION,
    )


def baseline_no_batch(requests: Sequence[Request], profiles) -> Schedule:
    """Каждый запрос — отдельный сегмент, в порядке поступления."""
    plans = []
    for r in sorted(requests, key=arrival_key):
        profile = profile_for(profiles, r.dnn_id)
        plans.append(SegmentPlan(
            dnn_id=r.dnn_id,
            request_ids=(r.id,),
            start_layer=r.current_layer,
            duration=sweep((r.current_layer,), profile, 1).duration,
        ))
    return _finish(plans)


def baseline_batch(requests: Sequence[Request], profiles, max_batch: int) -> Schedule:
    """
    Сеть самого раннего ожидающего запроса; её первые до B запросов — один сегмент.
    Повторять, пока запросы не кончатся.
    """
    by_dnn: Dict[str, List[Request]] = {}
    for r in sorted(requests, key=arrival_key):
        by_dnn.setdefault(r.dnn_id, []).append(r)
    for queue in by_dnn.values():
        queue.sort(key=scheduling_key)

    plans = []
    pending = sorted(requests, key=arrival_key)
    taken = set()
    for head in pending:
        if head.id in taken:
            continue
        profile = profile_for(profiles, head.dnn_id)
        limit = max(1, min(max_batch, profile.max_batch))
        queue = by_dnn[head.dnn_id]
        batch = [r for r in queue if r.id not in taken][:limit]
        taken.update(r.id for r in batch)
        plans.append(SegmentPlan(
            dnn_id=head.dnn_id,
            request_ids=tuple(r.id for r in batch),
            start_layer=min(r.current_layer for r in batch),
            duration=sweep((r.current_layer for r in batch), profile, limit).duration,
        ))
    return _finish(plans)
