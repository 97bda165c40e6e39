"""
Очередь событий симулятора: поступления, завершения шагов на сервере и у клиентов, передачи.
Min-heap по (time, приоритет вида, id запроса, seq): при равном времени завершения идут
раньше поступлений.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List


class EventKind(str, Enum):
    LAYER_COMPLETE = "layer_complete"                  # сервер закончил шаг (слой или группа)
    CLIENT_LOCAL_COMPLETE = "client_local_complete"    # клиент закончил локальную часть
    TRANSMISSION_COMPLETE = "transmission_complete"    # данные дошли до сервера
    REQUEST_ARRIVAL = "request_arrival"                # запрос сгенерирован


_PRIORITY = {
    EventKind.LAYER_COMPLETE: 0,
    EventKind.CLIENT_LOCAL_COMPLETE: 1,
    EventKind.TRANSMISSION_COMPLETE: 2,
    EventKind.REQUEST_ARRIVAL: 3,
}


@dataclass(order=True)
class SimEvent:
    """Событие с приоритетом по времени."""
    time: float
    priority: int = field(init=False)
    tag: int = field(init=False)  # id запроса из payload, -1 для событий сервера
    seq: int = field(init=False, default=0)
    kind: EventKind = field(compare=False, default=EventKind.REQUEST_ARRIVAL)
    payload: Dict[str, Any] = field(compare=False, default_factory=dict)

    def __post_init__(self):
        self.priority = _PRIORITY[self.kind]
        self.tag = int(self.payload.get("request_id", -1))


class EventQueue:
    """Min-heap по (time, priority, tag, seq); seq делает порядок детерминированным."""
    def __init__(self):
        self._heap: List[SimEvent] = []
        self._counter = itertools.count()

    def push(self, event: SimEvent) -> None:
        event.seq = next(self._counter)
        heapq.heappush(self._heap, event)

    def pop(self) -> SimEvent | None:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)

    def peek(self) -> SimEvent | None:
        if not self._heap:
            return None
        return self._heap[0]

    def pop_simultaneous(self) -> list[SimEvent]:
        """Извлечь все события с тем же временем, что и ближайшее."""
        if not self._heap:
            return []
        t = self._heap[0].time
        out = []
        while self._heap and self._heap[0].time == t:
            out.append(heapq.heappop(self._heap))
        return out

    def __len__(self) -> int:
        return len(self._heap)
