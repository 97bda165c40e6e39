"""
Метрики прогона: время завершения (среднее, медиана, p95), доля успевших к дедлайну
по всем сгенерированным запросам, распределение по месту исполнения.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ..core.state import Location, RequestOutcome


@dataclass
class SummaryMetrics:
    generated: int = 0
    completed: int = 0
    dropped: int = 0
    on_time: int = 0
    on_time_ratio: float = 0.0
    mean_completion_s: float = 0.0     # от генерации до результата, только завершённые
    median_completion_s: float = 0.0
    p95_completion_s: float = 0.0
    by_location: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(outcomes: Sequence[RequestOutcome], deadline: Optional[float] = None) -> SummaryMetrics:
    """
    deadline — относительный дедлайн (с) для пересчёта попаданий; None — дедлайны из исходов.
    Сброшенные запросы входят в знаменатель и считаются опоздавшими.
    """
    generated = len(outcomes)
    by_location = {loc.value: 0 for loc in Location}
    if generated == 0:
        return SummaryMetrics(by_location=by_location)

    latencies = []
    on_time = 0
    dropped = 0
    for o in outcomes:
        if o.dropped or o.completion_time is None:
            dropped += 1
            continue
        latency = o.latency
        latencies.append(latency)
        by_location[o.location.value] += 1
        hit = latency <= deadline if deadline is not None else o.on_time
        on_time += int(hit)

    lat = np.asarray(latencies, dtype=float)
    return SummaryMetrics(
        generated=generated,
        completed=len(latencies),
        dropped=dropped,
        on_time=on_time,
        on_time_ratio=on_time / generated,
        mean_completion_s=float(lat.mean()) if lat.size else 0.0,
        median_completion_s=float(np.median(lat)) if lat.size else 0.0,
        p95_completion_s=float(np.percentile(lat, 95)) if lat.size else 0.0,
        by_location=by_location,
    )
