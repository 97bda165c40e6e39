"""
Состояние запросов: позиция в сети, жизненный цикл, итоговая запись об исполнении.
Слои нумеруются с 1; current_layer = N+1 означает, что запрос завершён.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple


class RequestState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    DROPPED = "dropped"


# Допустимые переходы: pending -> running -> completed, {pending, running} -> dropped
_TRANSITIONS = {
    RequestState.PENDING: {RequestState.RUNNING, RequestState.DROPPED},
    RequestState.RUNNING: {RequestState.RUNNING, RequestState.COMPLETED, RequestState.DROPPED},
    RequestState.COMPLETED: set(),
    RequestState.DROPPED: set(),
}


class Location(str, Enum):
    """Где исполнялся запрос."""
    SERVER = "server"
    CLIENT_FULL = "client-full"
    CLIENT_PARTIAL = "client-partial"


@dataclass
class Request:
    """
    Один запрос на инференс.
    arrival_time — момент появления на сервере (a_i), created_time — момент генерации на клиенте.
    Мутирует только симулятор.
    """
    id: int
    dnn_id: str
    arrival_time: float
    deadline: float = math.inf
    current_layer: int = 1
    state: RequestState = RequestState.PENDING
    client_id: Optional[int] = None  # None = удалённая трасса без клиента
    created_time: Optional[float] = None
    size_bits: float = 0.0

    def __post_init__(self) -> None:
        if self.created_time is None:
            self.created_time = self.arrival_time
        if not self.deadline > self.created_time:
            raise ValueError(f"request {self.id}: deadline must be after arrival")
        if self.current_layer < 1:
            raise ValueError(f"request {self.id}: layers are 1-based")

    @property
    def origin(self) -> str:
        return "remote-trace" if self.client_id is None else f"local-client {self.client_id}"

    @property
    def active(self) -> bool:
        return self.state in (RequestState.PENDING, RequestState.RUNNING)

    def advance_to(self, layer: int) -> None:
        if layer < self.current_layer:
            raise ValueError(
                f"request {self.id}: layer cannot decrease ({self.current_layer} -> {layer})"
            )
        self.current_layer = layer

    def transition(self, new_state: RequestState) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise ValueError(f"request {self.id}: illegal transition {self.state.value} -> {new_state.value}")
        self.state = new_state


def arrival_key(request: Request) -> Tuple[float, int]:
    """Порядок поступления; одновременные запросы упорядочены по id."""
    return (request.arrival_time, request.id)


def scheduling_key(request: Request, layer: Optional[int] = None) -> Tuple[int, float, int]:
    """
    Порядок в снимке планировщика: глубже — раньше, затем по поступлению.
    Для FIFO-корректного набора совпадает с порядком поступления.
    """
    l = request.current_layer if layer is None else layer
    return (-l, request.arrival_time, request.id)


@dataclass
class RequestOutcome:
    """Итог по запросу: c_i, попадание в дедлайн, место исполнения и разбивка задержки."""
    request_id: int
    dnn_id: str
    created_time: float
    deadline: float
    completion_time: Optional[float] = None
    on_time: bool = False
    location: Location = Location.SERVER
    offload_k: int = 0  # число групп, выполненных на клиенте при частичном offloading
    network_delay: float = 0.0
    server_time: float = 0.0
    client_time: float = 0.0
    dropped: bool = False

    def __post_init__(self) -> None:
        if self.dropped:
            self.completion_time = None
            self.on_time = False
        elif self.completion_time is not None:
            self.on_time = self.completion_time <= self.deadline

    @property
    def latency(self) -> Optional[float]:
        if self.completion_time is None:
            return None
        return self.completion_time - self.created_time


@dataclass
class ValidationReport:
    """Отчёт о проверке набора запросов (ничего не бросает)."""
    fifo_violations: List[Tuple[int, int]] = field(default_factory=list)  # (старший id, младший id)
    out_of_range: List[int] = field(default_factory=list)
    duplicate_ids: List[int] = field(default_factory=list)
    unknown_dnn: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.fifo_violations or self.out_of_range or self.duplicate_ids or self.unknown_dnn)

    def describe(self) -> str:
        lines = []
        for earlier, later in self.fifo_violations:
            lines.append(f"FIFO violation: request {later} is deeper than earlier request {earlier}")
        for rid in self.out_of_range:
            lines.append(f"layer out of range: request {rid}")
        for rid in self.duplicate_ids:
            lines.append(f"duplicate id: {rid}")
        for rid in self.unknown_dnn:
            lines.append(f"unknown dnn: request {rid}")
        return "\n".join(lines) if lines else "ok"


def validate_request_set(requests: Sequence[Request], profile) -> ValidationReport:
    """
    Проверка FIFO-упорядоченности слоёв (l_j >= l_i при j <= i по поступлению),
    диапазона слоёв и уникальности id. profile — DnnProfile или ProfileSet.
    """
    report = ValidationReport()
    seen = set()
    for r in requests:
        if r.id in seen:
            report.duplicate_ids.append(r.id)
        seen.add(r.id)

    by_dnn: dict[str, List[Request]] = {}
    for r in requests:
        dnn = _dnn_profile(profile, r.dnn_id)
        if dnn is None:
            report.unknown_dnn.append(r.id)
            continue
        if not 1 <= r.current_layer <= dnn.num_layers + 1:
            report.out_of_range.append(r.id)
        by_dnn.setdefault(r.dnn_id, []).append(r)

    for group in by_dnn.values():
        shallowest: Optional[Request] = None
        for r in sorted(group, key=arrival_key):
            # Нарушение: более поздний запрос глубже хотя бы одного более раннего
            if shallowest is not None and r.current_layer > shallowest.current_layer:
                report.fifo_violations.append((shallowest.id, r.id))
            if shallowest is None or r.current_layer < shallowest.current_layer:
                shallowest = r
    return report


def _dnn_profile(profile, dnn_id: str):
    dnns = getattr(profile, "dnns", None)
    if dnns is not None:
        return dnns.get(dnn_id)
    return profile if getattr(profile, "dnn_id", None) == dnn_id else None
