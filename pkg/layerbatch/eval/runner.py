"""
Прогоны: один прогон симулятора (run_sim) и развёртка по нагрузке с оценкой capacity
(наибольшая интенсивность, при которой доля успевших >= 90%). Несколько seed на точку,
независимые прогоны можно распараллелить по процессам.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import CAPACITY_THRESHOLD, SimConfig
from ..core.profile import ProfileSet
from ..core.sim import Sim
from ..core.state import RequestOutcome
from ..errors import ConfigError
from ..offload.client import ClientProfile
from ..sched.registry import Scheduler
from ..workload.arrivals import Arrival, WorkloadSpec, generate_arrivals
from ..workload.network import NetworkTrace
from .metrics import SummaryMetrics, summarize

logger = logging.getLogger(__name__)


@dataclass
class SimResult:
    outcomes: List[RequestOutcome]
    metrics: SummaryMetrics
    plans: int = 0                  # число пересчётов расписания
    steps: int = 0
    end_time: float = 0.0
    schedule_compute_s: float = 0.0


def run_sim(
    workload: Union[WorkloadSpec, Sequence[Arrival]],
    profiles: ProfileSet,
    scheduler: Union[str, Scheduler],
    config: Optional[SimConfig] = None,
    trace: Optional[NetworkTrace] = None,
    client_profile: Optional[ClientProfile] = None,
    deadline_s: Optional[float] = None,
) -> SimResult:
    """
    Один прогон. workload — описание нагрузки или готовый список поступлений;
    deadline_s переопределяет относительный дедлайн описания (None — из описания, без него — бесконечный).
    """
    if isinstance(workload, WorkloadSpec):
        arrivals = generate_arrivals(workload)
        deadline = workload.deadline if deadline_s is None else deadline_s
    else:
        arrivals = list(workload)
        deadline = math.inf if deadline_s is None else deadline_s
    sim = Sim(profiles, scheduler, config, trace=trace, client_profile=client_profile)
    outcomes = sim.run(arrivals, deadline)
    metrics = summarize(outcomes)
    logger.info(
        "%s: %d requests, on-time %.3f, mean completion %.2f ms",
        sim.scheduler.name, metrics.generated, metrics.on_time_ratio, metrics.mean_completion_s * 1000.0,
    )
    return SimResult(
        outcomes=outcomes,
        metrics=metrics,
        plans=sim.state.plans,
        steps=sim.state.steps,
        end_time=sim.state.clock,
        schedule_compute_s=sim.state.schedule_compute_s,
    )


@dataclass
class SweepPoint:
    """Агрегат по seed для одной интенсивности."""
    rate: float
    on_time_ratio: float
    on_time_std: float
    mean_completion_s: float
    mean_completion_std: float
    seeds: int
    ratios: Tuple[float, ...] = ()


@dataclass
class CapacityResult:
    scheduler: str
    points: List[SweepPoint] = field(default_factory=list)
    capacity: Optional[float] = None

    @property
    def curve(self) -> Dict[float, float]:
        return {p.rate: p.on_time_ratio for p in self.points}


def capacity_from_curve(
    rates: Sequence[float],
    ratios: Sequence[float],
    threshold: float = CAPACITY_THRESHOLD,
) -> Optional[float]:
    """Наибольшая интенсивность с долей успевших >= threshold; None, если таких нет."""
    ok = [r for r, q in zip(rates, ratios) if q >= threshold]
    return max(ok) if ok else None


def parse_rates(text: str) -> List[float]:
    """'10:350:10' (от:до:шаг, включительно) или '10,20,50'."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need start <= stop and step > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad rate list {text!r}: {exc}") from exc


_Job = Tuple[str, float, int, WorkloadSpec, ProfileSet, SimConfig, Optional[NetworkTrace], Optional[ClientProfile]]


def _run_job(job: _Job) -> Tuple[float, int, SummaryMetrics]:
    scheduler, rate, seed, spec, profiles, config, trace, client_profile = job
    result = run_sim(spec.with_rate(rate).with_seed(seed), profiles, scheduler, config, trace, client_profile)
    return rate, seed, result.metrics


def capacity_sweep(
    workload: WorkloadSpec,
    rates: Iterable[float],
    scheduler: str,
    profiles: ProfileSet,
    config: Optional[SimConfig] = None,
    seeds: Sequence[int] = (0,),
    trace: Optional[NetworkTrace] = None,
    client_profile: Optional[ClientProfile] = None,
    workers: Optional[int] = None,
    threshold: float = CAPACITY_THRESHOLD,
) -> CapacityResult:
    """
    run_sim для каждой пары (rate, seed); capacity — по средней по seed доле успевших.
    workers > 1 — параллельно по процессам; порядок результатов от этого не зависит.
    """
    rates = [float(r) for r in rates]
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ConfigError("rates must be strictly ascending")
    if not seeds:
        raise ConfigError("at least one seed required")
    config = config or SimConfig()
    jobs: List[_Job] = [
        (scheduler, rate, seed, workload, profiles, config, trace, client_profile)
        for rate in rates
        for seed in seeds
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    by_rate: Dict[float, List[SummaryMetrics]] = {}
    for rate, seed, metrics in sorted(results, key=lambda x: (x[0], x[1])):
        logger.info("%s rate=%g seed=%d: on-time %.3f", scheduler, rate, seed, metrics.on_time_ratio)
        by_rate.setdefault(rate, []).append(metrics)

    points = []
    for rate in rates:
        runs = by_rate[rate]
        ratios = np.array([m.on_time_ratio for m in runs])
        means = np.array([m.mean_completion_s for m in runs])
        points.append(SweepPoint(
            rate=rate,
            on_time_ratio=float(ratios.mean()),
            on_time_std=float(ratios.std()),
            mean_completion_s=float(means.mean()),
            mean_completion_std=float(means.std()),
            seeds=len(runs),
            ratios=tuple(float(x) for x in ratios),
        ))
    capacity = capacity_from_curve(rates, [p.on_time_ratio for p in points], threshold)
    logger.info("%s capacity: %s", scheduler, "none" if capacity is None else f"{capacity:g} req/s")
    return CapacityResult(scheduler=scheduler, points=points, capacity=capacity)
