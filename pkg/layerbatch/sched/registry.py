"""
Планировщики для симулятора: общий интерфейс plan(snapshot, now) -> Schedule и реестр по имени
(ours-time, ours-tardy, edf, batch, no-batch).
"""
from __future__ import annotations

import logging
from typing import Dict, Optional, Sequence, Type

from ..config import MAX_EXACT_PERMUTATION_DNNS, SimConfig
from ..core.profile import ProfileSet
from ..core.state import Request
from ..errors import ConfigError
from .baselines import baseline_batch, baseline_no_batch
from .deadline import edf_batch, tardy_dp
from .dp import DpTable, schedule_variant
from .multidnn import schedule_multi, schedule_multi_shared
from .segment import OBJECTIVE_COMPLETION, OBJECTIVE_TARDY, Schedule

logger = logging.getLogger(__name__)


class Scheduler:
    """База: профили, конфигурация и эффективная граница батча."""
    name = "base"
    objective = OBJECTIVE_COMPLETION
    # Пересчёт на границе любого шага; False — только после завершения текущего сегмента
    step_replan = True

    def __init__(self, profiles: ProfileSet, config: Optional[SimConfig] = None):
        self.profiles = profiles
        self.config = config or SimConfig()
        self.max_batch = max(1, min(self.config.max_batch, profiles.max_batch))
        self._warned_heuristic = False

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        raise NotImplementedError

    def reset(self) -> None:
        """Сбросить кэш между прогонами."""

    def _heuristic(self, requests: Sequence[Request]) -> bool:
        count = len({r.dnn_id for r in requests})
        if count <= MAX_EXACT_PERMUTATION_DNNS:
            return False
        if not self._warned_heuristic:
            logger.warning(
                "%d DNNs pending, above exact permutation limit %d: using earliest-pending order",
                count, MAX_EXACT_PERMUTATION_DNNS,
            )
            self._warned_heuristic = True
        return True

    @staticmethod
    def _single_dnn(requests: Sequence[Request]) -> bool:
        return len({r.dnn_id for r in requests}) <= 1


class OursTime(Scheduler):
    """ДП по суммарному времени завершения, с инкрементальным пересчётом."""
    name = "ours-time"

    def __init__(self, profiles: ProfileSet, config: Optional[SimConfig] = None):
        super().__init__(profiles, config)
        self._tables: Dict[str, DpTable] = {}

    def reset(self) -> None:
        self._tables = {}

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        if not requests:
            return Schedule()
        cfg = self.config
        if self._single_dnn(requests):
            dnn_id = requests[0].dnn_id
            previous = self._tables.get(dnn_id) if cfg.incremental else None
            schedule = schedule_variant(
                requests, self.profiles.dnn(dnn_id), self.max_batch, cfg.dp_variant, previous=previous,
            )
            self._tables[dnn_id] = schedule.table
            return schedule
        multi = schedule_multi_shared if cfg.sharing else schedule_multi
        schedule = multi(
            requests, self.profiles, self.max_batch,
            variant=cfg.dp_variant,
            heuristic=self._heuristic(requests),
            previous=self._tables if cfg.incremental else None,
        )
        if cfg.incremental:
            self._tables.update(schedule.table or {})
        return schedule


class OursTardy(Scheduler):
    """ДП по числу опоздавших; предсказанно опоздавшие сбрасываются."""
    name = "ours-tardy"
    objective = OBJECTIVE_TARDY

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        if not requests:
            return Schedule(objective=OBJECTIVE_TARDY)
        cfg = self.config
        if self._single_dnn(requests):
            profile = self.profiles.dnn(requests[0].dnn_id)
            return tardy_dp(
                requests, profile, self.max_batch, now,
                tie_break=cfg.tardy_tie_break, variant=cfg.dp_variant,
            )
        multi = schedule_multi_shared if cfg.sharing else schedule_multi
        return multi(
            requests, self.profiles, self.max_batch,
            variant=cfg.dp_variant,
            objective=OBJECTIVE_TARDY,
            now=now,
            tie_break=cfg.tardy_tie_break,
            heuristic=self._heuristic(requests),
        )


class Edf(Scheduler):
    name = "edf"
    objective = OBJECTIVE_TARDY
    step_replan = False

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        return edf_batch(requests, self.profiles, self.max_batch, now)


class Batch(Scheduler):
    name = "batch"
    step_replan = False

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        return baseline_batch(requests, self.profiles, self.max_batch)


class NoBatch(Scheduler):
    name = "no-batch"
    step_replan = False

    def plan(self, requests: Sequence[Request], now: float) -> Schedule:
        return baseline_no_batch(requests, self.profiles)


SCHEDULERS: Dict[str, Type[Scheduler]] = {
    cls.name: cls for cls in (OursTime, OursTardy, Edf, Batch, NoBatch)
}
SCHEDULER_NAMES = tuple(SCHEDULERS)


def make_scheduler(name: str, profiles: ProfileSet, config: Optional[SimConfig] = None) -> Scheduler:
    try:
        cls = SCHEDULERS[name]
    except KeyError:
        raise ConfigError(f"unknown scheduler {name!r}; choose one of {', '.join(SCHEDULER_NAMES)}") from None
    return cls(profiles, config)
