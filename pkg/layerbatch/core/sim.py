"""
Движок симуляции: один сервер исполняет расписание шагами (слой или группа слоёв) без вытеснения,
клиенты решают, где исполнять запрос, сеть задаёт задержки передачи.
Однопоточный цикл событий; одинаковые (seed, конфигурация) дают одинаковый журнал.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple, Union

from ..config import SimConfig
from ..errors import ConfigError, ProfileError, SimulationError
from ..offload.client import (
    LOCAL,
    ClientProfile,
    ClientState,
    NetworkEstimator,
    decide_binary,
    decide_partial,
)
from ..sched.deadline import drop_expired
from ..sched.multidnn import reschedule_trigger
from ..sched.registry import Scheduler, make_scheduler
from ..sched.segment import OBJECTIVE_TARDY, Segment
from ..workload.arrivals import Arrival
from ..workload.network import NetworkTrace, transmission_delay
from .events import EventKind, EventQueue, SimEvent
from .profile import DnnProfile, ProfileSet
from .state import Location, Request, RequestOutcome, RequestState, arrival_key

logger = logging.getLogger(__name__)


@dataclass
class _Track:
    """Учёт по запросу на всём пути: клиент, сеть, сервер."""
    arrival: Arrival
    deadline: float
    k: int = 0                  # групп выполнено на клиенте
    network_delay: float = 0.0
    client_time: float = 0.0
    server_time: float = 0.0
    location: Location = Location.SERVER


@dataclass
class _Step:
    """Исполняемый на сервере шаг: слои first..last одним батчем."""
    segment: Segment
    first: int
    last: int
    members: List[Request]
    riders: List[Tuple[Request, int, int]]   # (запрос, слой присоединения, последний слой) в нумерации сегмента
    duration: float
    crossed_shared_boundary: bool


@dataclass
class SimState:
    clock: float = 0.0
    server_busy_until: float = 0.0
    server_busy: bool = False
    arrivals_since_plan: int = 0
    plans: int = 0
    plan_end: float = 0.0
    schedule_compute_s: float = 0.0
    steps: int = 0
    outcomes: Dict[int, RequestOutcome] = field(default_factory=dict)


class Sim:
    """
    Сервер с подключаемым планировщиком и клиенты с offloading.
    Расписание пересчитывается по reschedule_trigger на границах шагов и применяется
    со следующего шага.
    """

    def __init__(
        self,
        profiles: ProfileSet,
        scheduler: Union[str, Scheduler],
        config: Optional[SimConfig] = None,
        trace: Optional[NetworkTrace] = None,
        client_profile: Optional[ClientProfile] = None,
    ):
        self.config = config or SimConfig()
        if isinstance(scheduler, Scheduler):
            self.scheduler = scheduler
            self.profiles = scheduler.profiles
        else:
            self.profiles = profiles.with_groups(self.config.groups)
            self.scheduler = make_scheduler(scheduler, self.profiles, self.config)
        self.trace = trace
        self.client_profile = client_profile
        self.max_batch = self.scheduler.max_batch
        self._reset()

    def _reset(self) -> None:
        self.state = SimState()
        self.queue = EventQueue()
        self.requests: Dict[int, Request] = {}      # запросы, дошедшие до сервера
        self.tracks: Dict[int, _Track] = {}
        self.plan: Deque[Segment] = deque()
        self.step: Optional[_Step] = None
        self._last_segment: Optional[Segment] = None
        self.clients: Dict[int, Tuple[ClientState, NetworkEstimator]] = {}
        self.shared_ids: frozenset = frozenset()
        self.scheduler.reset()

    # ---- подготовка ----

    def _check_inputs(self, arrivals: Sequence[Arrival]) -> None:
        present = sorted({a.dnn_id for a in arrivals})
        missing = [d for d in present if d not in self.profiles.dnns]
        if missing:
            raise SimulationError(f"workload uses DNNs without a server profile: {missing}")
        self.shared_ids = self.profiles.subset(present).shared_component_ids
        if self.config.offload == "none" or not any(a.client_id is not None for a in arrivals):
            return
        if self.client_profile is None:
            raise ConfigError(f"offload mode {self.config.offload!r} needs a client profile")
        for d in present:
            client = self.client_profile.dnn(d)
            server = self.profiles.dnn(d)
            if self.config.offload == "partial" and client.num_groups != server.num_groups:
                raise ProfileError(
                    f"{d}: client profile has {client.num_groups} groups, server uses {server.num_groups}"
                )

    def _client(self, client_id: int) -> Tuple[ClientState, NetworkEstimator]:
        if client_id not in self.clients:
            initial = self.config.initial_throughput_bps
            if initial is None and self.trace is not None:
                initial = self.trace.throughput_at(0.0)
            estimator = NetworkEstimator(weight=self.config.ewma_weight, estimate=initial)
            self.clients[client_id] = (ClientState(client_id), estimator)
        return self.clients[client_id]

    # ---- цикл событий ----

    def run(self, arrivals: Sequence[Arrival], deadline_s: float = math.inf) -> List[RequestOutcome]:
        """Прогнать все поступления до разрешения каждого запроса; исходы — в порядке id."""
        self._reset()
        self._check_inputs(arrivals)
        for a in arrivals:
            self.tracks[a.id] = _Track(arrival=a, deadline=a.time + deadline_s)
            self.queue.push(SimEvent(a.time, kind=EventKind.REQUEST_ARRIVAL, payload={"request_id": a.id}))

        while len(self.queue):
            batch = self.queue.pop_simultaneous()
            now = batch[0].time
            if now < self.state.clock:
                raise SimulationError(f"clock moved backwards: {self.state.clock} -> {now}")
            self.state.clock = now
            completed: List[SimEvent] = []
            for ev in batch:
                if ev.kind == EventKind.REQUEST_ARRIVAL:
                    self._on_request(ev, now)
                elif ev.kind == EventKind.CLIENT_LOCAL_COMPLETE:
                    self._on_client_done(ev, now)
                elif ev.kind == EventKind.TRANSMISSION_COMPLETE:
                    self._on_transmitted(ev, now)
                elif ev.kind == EventKind.LAYER_COMPLETE:
                    self._on_step_done(now)
                    completed.append(ev)
            trigger = any(reschedule_trigger(ev, self.state.arrivals_since_plan) for ev in completed)
            if not self.state.server_busy:
                self._dispatch(now, trigger)

        unresolved = [rid for rid in self.tracks if rid not in self.state.outcomes]
        if unresolved:
            raise SimulationError(f"{len(unresolved)} requests unresolved at end of run, e.g. {unresolved[:5]}")
        logger.info(
            "run finished at %.3f s: %d requests, %d schedules, %d steps",
            self.state.clock, len(self.tracks), self.state.plans, self.state.steps,
        )
        return [self.state.outcomes[rid] for rid in sorted(self.state.outcomes)]

    def _on_request(self, ev: SimEvent, now: float) -> None:
        track = self.tracks[ev.payload["request_id"]]
        a = track.arrival
        if a.client_id is None or self.config.offload == "none":
            self._transmit(track, now, a.size_bits)
            return
        state, estimator = self._client(a.client_id)
        client = self.client_profile.dnn(a.dnn_id)
        server = self.profiles.dnn(a.dnn_id)
        pending = Request(a.id, a.dnn_id, now, deadline=track.deadline, created_time=a.time, size_bits=a.size_bits)
        wait = self.server_wait(now)
        if self.config.offload == "binary":
            decision = decide_binary(
                pending, state, wait + server.runtime(), estimator, client, now, self.config.battery_threshold,
            )
            logger.debug(
                "request %d: %s (local %.4f s, remote %.4f s)",
                a.id, decision.choice, decision.local_estimate, decision.remote_estimate,
            )
            k = server.num_groups if decision.choice == LOCAL else 0
        else:
            if self.config.battery_threshold is not None and state.busy_fraction(now) > self.config.battery_threshold:
                k = 0
            else:
                k = decide_partial(
                    pending, state, wait, estimator, client, server, now,
                    rule=self.config.partial_rule,
                    compress_s=self.client_profile.compress_s,
                    decompress_s=self.client_profile.decompress_s,
                ).k
        track.k = k
        if k == 0:
            self._transmit(track, now, a.size_bits)
            return
        local = client.full_runtime if k == server.num_groups else client.local_time(k) + self.client_profile.compress_s
        track.client_time = local
        finish = state.reserve(now, local)
        self.queue.push(SimEvent(finish, kind=EventKind.CLIENT_LOCAL_COMPLETE, payload={"request_id": a.id}))

    def _on_client_done(self, ev: SimEvent, now: float) -> None:
        track = self.tracks[ev.payload["request_id"]]
        server = self.profiles.dnn(track.arrival.dnn_id)
        if track.k >= server.num_groups:
            track.location = Location.CLIENT_FULL
            self._finish(track, now)
            return
        track.location = Location.CLIENT_PARTIAL
        payload = self.client_profile.dnn(track.arrival.dnn_id).payload_bits[track.k - 1]
        self._transmit(track, now, payload, decompress=self.client_profile.decompress_s)

    def _transmit(self, track: _Track, now: float, size_bits: float, decompress: float = 0.0) -> None:
        if self.trace is None:
            delay = 0.0
        else:
            delay = transmission_delay(size_bits, now, self.trace)
        track.network_delay = delay
        if track.arrival.client_id is not None and delay > 0:
            self._client(track.arrival.client_id)[1].observe(size_bits, delay)
        if delay + decompress == 0.0:
            self._enter_server(track, now)
            return
        self.queue.push(SimEvent(
            now + delay + decompress,
            kind=EventKind.TRANSMISSION_COMPLETE,
            payload={"request_id": track.arrival.id},
        ))

    def _on_transmitted(self, ev: SimEvent, now: float) -> None:
        self._enter_server(self.tracks[ev.payload["request_id"]], now)

    def _enter_server(self, track: _Track, now: float) -> None:
        a = track.arrival
        profile = self.profiles.dnn(a.dnn_id)
        layer = profile.layer_groups[track.k][0] if track.k else 1
        self.requests[a.id] = Request(
            id=a.id,
            dnn_id=a.dnn_id,
            arrival_time=now,
            deadline=track.deadline,
            current_layer=layer,
            client_id=a.client_id,
            created_time=a.time,
            size_bits=a.size_bits,
        )
        self.state.arrivals_since_plan += 1

    # ---- планирование ----

    def server_wait(self, now: float) -> float:
        """Оценка ожидания до старта нового запроса: остаток текущего расписания."""
        return max(0.0, self.state.plan_end - now)

    def _live(self) -> List[Request]:
        return [r for r in self.requests.values() if r.active]

    def _replan(self, now: float) -> None:
        live = self._live()
        if self.config.drop_expired and self.scheduler.objective == OBJECTIVE_TARDY:
            live, expired = drop_expired(live, now)
            for r in expired:
                self._drop(r, now)
        snapshot = sorted(live, key=arrival_key)[: self.config.snapshot_cap]
        schedule = self.scheduler.plan(snapshot, now)
        for rid in schedule.dropped:
            r = self.requests[rid]
            if r.active:
                r.transition(RequestState.DROPPED)
            self._drop(r, now)
        self.plan = deque(schedule.segments)
        self.step = None
        self._last_segment = None
        self.state.plans += 1
        self.state.arrivals_since_plan = 0
        self.state.schedule_compute_s += schedule.compute_time_s
        self.state.plan_end = now + self.config.scheduler_latency_s + schedule.makespan
        logger.debug(
            "t=%.6f: schedule #%d over %d requests -> %d segments, %d dropped",
            now, self.state.plans, len(snapshot), len(schedule.segments), len(schedule.dropped),
        )

    def _dispatch(self, now: float, trigger: bool) -> None:
        current = self._current_segment()
        at_boundary = current is None or current is not self._last_segment
        replan = (
            (trigger and self.scheduler.step_replan)
            or current is None
            or (at_boundary and self.state.arrivals_since_plan > 0)
        )
        replanned = False
        if replan and self._live():
            self._replan(now)
            replanned = True
        step = self._next_step()
        if step is None and self._live() and not replanned:
            self._replan(now)
            replanned = True
            step = self._next_step()
        if step is None:
            if self._live():
                raise SimulationError(f"scheduler {self.scheduler.name!r} left {len(self._live())} requests unplanned")
            return
        start = now + (self.config.scheduler_latency_s if replanned else 0.0)
        self._start(step, start)

    def _current_segment(self) -> Optional[Segment]:
        """Первый сегмент плана, в котором ещё есть незавершённые участники."""
        while self.plan:
            seg = self.plan[0]
            if any(self._member_live(rid, seg) for rid in seg.request_ids):
                return seg
            self.plan.popleft()
        return None

    def _member_live(self, rid: int, seg: Segment) -> bool:
        r = self.requests.get(rid)
        return r is not None and r.active and r.current_layer <= self.profiles.dnn(seg.dnn_id).num_layers

    # ---- исполнение шагов ----

    def _next_step(self) -> Optional[_Step]:
        seg = self._current_segment()
        if seg is None:
            return None
        host = self.profiles.dnn(seg.dnn_id)
        members = [self.requests[rid] for rid in seg.request_ids if self._member_live(rid, seg)]
        first = min(r.current_layer for r in members)
        last = host.group_end(first) if self.config.step_granularity == "group" else first
        last = self._cut_at_shared(host, first, last)

        riders = []
        for rid, _, until in seg.absorbed:
            r = self.requests.get(rid)
            if r is None or not r.active:
                continue
            fp = self.profiles.dnn(r.dnn_id)
            if r.current_layer > fp.num_layers:
                continue
            cid, local = fp.locate(r.current_layer)
            x = host.layer_of(cid, local)
            if x is None or x < first or x > until:
                continue
            riders.append((r, x, until))

        duration = 0.0
        for q in range(first, last + 1):
            b = sum(1 for r in members if r.current_layer <= q)
            b += sum(1 for _, x, until in riders if x <= q <= until)
            if b > self.max_batch:
                raise SimulationError(f"{host.dnn_id} layer {q}: batch of {b} exceeds max batch {self.max_batch}")
            if b:
                duration += host.layer_cost(q, b)
        duration += self.config.batch_overhead_s

        stage = host.stage_of(last)
        crossed = (
            stage.component.component_id in self.shared_ids
            and last == stage.last_layer
            and last < host.num_layers
        )
        return _Step(seg, first, last, members, riders, duration, crossed)

    def _cut_at_shared(self, host: DnnProfile, first: int, last: int) -> int:
        """Шаг не пересекает границу общего компонента."""
        stage = host.stage_of(first)
        if stage.component.component_id in self.shared_ids:
            return min(last, stage.last_layer)
        for s in host.stages:
            if s.component.component_id in self.shared_ids and first < s.first_layer <= last:
                return s.first_layer - 1
        return last

    def _start(self, step: _Step, start: float) -> None:
        for r in step.members + [rider for rider, _, _ in step.riders]:
            if r.state == RequestState.PENDING:
                r.transition(RequestState.RUNNING)
        self.step = step
        self.state.server_busy = True
        self.state.server_busy_until = start + step.duration
        self.state.steps += 1
        self.queue.push(SimEvent(
            start + step.duration,
            kind=EventKind.LAYER_COMPLETE,
            payload={
                "dnn_id": step.segment.dnn_id,
                "first_layer": step.first,
                "last_layer": step.last,
                "crossed_shared_boundary": step.crossed_shared_boundary,
            },
        ))

    def _on_step_done(self, now: float) -> None:
        step = self.step
        self.step = None
        self.state.server_busy = False
        if step is None:
            raise SimulationError("layer completion without a running step")
        self._last_segment = step.segment
        host = self.profiles.dnn(step.segment.dnn_id)
        for r in step.members:
            if r.current_layer > step.last or not r.active:
                continue
            self.tracks[r.id].server_time += step.duration
            r.advance_to(step.last + 1)
            if r.current_layer > host.num_layers:
                r.transition(RequestState.COMPLETED)
                self._finish(self.tracks[r.id], now)
        for r, x, until in step.riders:
            if x > step.last or not r.active:
                continue
            self.tracks[r.id].server_time += step.duration
            fp = self.profiles.dnn(r.dnn_id)
            cid, local = host.locate(min(step.last, until))
            r.advance_to(fp.layer_of(cid, local) + 1)

    # ---- исходы ----

    def _finish(self, track: _Track, now: float) -> None:
        a = track.arrival
        self.state.outcomes[a.id] = RequestOutcome(
            request_id=a.id,
            dnn_id=a.dnn_id,
            created_time=a.time,
            deadline=track.deadline,
            completion_time=now,
            location=track.location,
            offload_k=track.k,
            network_delay=track.network_delay,
            server_time=track.server_time,
            client_time=track.client_time,
        )

    def _drop(self, r: Request, now: float) -> None:
        track = self.tracks[r.id]
        logger.debug("t=%.6f: request %d dropped (deadline %.6f)", now, r.id, r.deadline)
        self.state.outcomes[r.id] = RequestOutcome(
            request_id=r.id,
            dnn_id=r.dnn_id,
            created_time=track.arrival.time,
            deadline=track.deadline,
            location=track.location,
            offload_k=track.k,
            network_delay=track.network_delay,
            server_time=track.server_time,
            client_time=track.client_time,
            dropped=True,
        )
