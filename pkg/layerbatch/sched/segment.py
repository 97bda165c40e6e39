"""
Сегменты и расписания. Сегмент — последовательные по поступлению запросы одной DNN, которые
исполняются одним батчем от слоя самого «молодого» участника до конца сети: проход (sweep)
подбирает остальных участников по мере достижения их слоёв.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from ..core.profile import INFEASIBLE, DnnProfile
from ..core.state import Request, scheduling_key
from ..errors import ProfileError

OBJECTIVE_COMPLETION = "completion"
OBJECTIVE_TARDY = "tardy"


class SweepResult(NamedTuple):
    duration: float                  # секунды; INFEASIBLE, если где-то b(k) > B
    max_batch: int
    batch_sizes: Tuple[int, ...]     # b(k) для k = start_layer..N (до первого превышения)


@dataclass(frozen=True)
class Segment:
    request_ids: Tuple[int, ...]     # в порядке поступления
    start_layer: int                 # слой самого позднего участника
    duration: float
    finish_offset: float             # от начала расписания
    dnn_id: str = ""
    # Попутчики из других DNN на общем компоненте: (id, слой присоединения, последний слой),
    # слои — в нумерации DNN сегмента; после последнего слоя попутчик возвращается в свою очередь
    absorbed: Tuple[Tuple[int, int, int], ...] = ()

    @property
    def size(self) -> int:
        return len(self.request_ids)

    @property
    def start_offset(self) -> float:
        return self.finish_offset - self.duration


@dataclass
class Schedule:
    """
    Упорядоченные сегменты и предсказанные времена завершения (смещения от начала расписания).
    objective_value — суммарное время завершения или число опоздавших, в зависимости от objective.
    """
    segments: List[Segment] = field(default_factory=list)
    predicted_completion: Dict[int, float] = field(default_factory=dict)
    objective_value: float = 0.0
    objective: str = OBJECTIVE_COMPLETION
    dropped: Tuple[int, ...] = ()
    compute_time_s: float = 0.0
    # Таблица(ы) ДП для инкрементального пересчёта: DpTable или {dnn_id: DpTable}
    table: Any = field(default=None, repr=False, compare=False)

    @property
    def makespan(self) -> float:
        return self.segments[-1].finish_offset if self.segments else 0.0

    @property
    def total_completion(self) -> float:
        return sum(self.predicted_completion.values())

    def order(self) -> List[int]:
        return [rid for seg in self.segments for rid in seg.request_ids]

    def segment_of(self, request_id: int) -> Optional[Segment]:
        for seg in self.segments:
            if request_id in seg.request_ids:
                return seg
        return None

    def same_plan(self, other: "Schedule") -> bool:
        """Совпадают ли разбиение и objective (без учёта времени расчёта)."""
        return (
            self.objective_value == other.objective_value
            and [s.request_ids for s in self.segments] == [s.request_ids for s in other.segments]
            and [s.absorbed for s in self.segments] == [s.absorbed for s in other.segments]
        )


def profile_for(profiles, dnn_id: str) -> DnnProfile:
    """profiles — DnnProfile (одна сеть) или ProfileSet."""
    if isinstance(profiles, DnnProfile):
        if profiles.dnn_id != dnn_id:
            raise ProfileError(f"request for {dnn_id!r} scheduled with profile {profiles.dnn_id!r}")
        return profiles
    return profiles.dnn(dnn_id)


def sweep(
    layers: Iterable[int],
    profile: DnnProfile,
    max_batch: int,
    riders: Sequence[Tuple[int, int]] = (),
) -> SweepResult:
    """
    Проход от min(layers) до N: b(k) = число участников со слоем <= k.
    riders — (слой присоединения, последний слой) для попутчиков из других DNN.
    """
    n = profile.num_layers
    delta = [0] * (n + 2)
    start = n + 1
    for l in layers:
        delta[l] += 1
        start = min(start, l)
    if start > n:
        return SweepResult(0.0, 0, ())
    for join, until in riders:
        delta[join] += 1
        delta[until + 1] -= 1
    rows = profile.cost_rows
    b = 0
    duration = 0.0
    sizes: List[int] = []
    for k in range(start, n + 1):
        b += delta[k]
        if b > max_batch or b >= len(rows[k]):
            return SweepResult(INFEASIBLE, b, tuple(sizes))
        sizes.append(b)
        duration += rows[k][b]
    return SweepResult(duration, max(sizes), tuple(sizes))


def segment_duration(requests: Sequence[Request], profile: DnnProfile, max_batch: int) -> SweepResult:
    """Длительность сегмента j..i: сумма h_k(b(k)) от l_i до N."""
    return sweep((r.current_layer for r in requests), profile, max_batch)


def cost(
    requests: Sequence[Request],
    j: int,
    i: int,
    profile: DnnProfile,
    max_batch: int,
    extra_active: int = 0,
) -> float:
    """
    cost(i, j) = active(j) * duration(j..i), active(j) = |R| - j + 1 (+ запросы следующих фаз).
    j, i — номера с 1 в порядке поступления.
    """
    if not 1 <= j <= i <= len(requests):
        raise ValueError(f"need 1 <= j <= i <= {len(requests)}, got j={j}, i={i}")
    ordered = sorted(requests, key=scheduling_key)
    duration = segment_duration(ordered[j - 1 : i], profile, max_batch).duration
    if duration == INFEASIBLE:
        return INFEASIBLE
    return (len(ordered) - j + 1 + extra_active) * duration


class SegmentPlan(NamedTuple):
    dnn_id: str
    request_ids: Tuple[int, ...]
    start_layer: int
    duration: float
    absorbed: Tuple[Tuple[int, int, int], ...] = ()

    @property
    def riders(self) -> List[Tuple[int, int]]:
        return [(join, last) for _, join, last in self.absorbed]


def assemble(
    plans: Iterable[SegmentPlan],
    offset: float = 0.0,
) -> Tuple[List[Segment], Dict[int, float]]:
    """Разложить сегменты подряд по времени; участники сегмента завершаются вместе с ним."""
    segments: List[Segment] = []
    completion: Dict[int, float] = {}
    t = offset
    for p in plans:
        t += p.duration
        segments.append(Segment(
            request_ids=p.request_ids,
            start_layer=p.start_layer,
            duration=p.duration,
            finish_offset=t,
            dnn_id=p.dnn_id,
            absorbed=p.absorbed,
        ))
        for rid in p.request_ids:
            completion[rid] = t
    return segments, completion
