from .segment import (
    Segment,
    Schedule,
    SweepResult,
    sweep,
    segment_duration,
    cost,
    OBJECTIVE_COMPLETION,
    OBJECTIVE_TARDY,
)
from .dp import (
    DpTable,
    compute_schedule,
    compute_schedule_layer_units,
    compute_schedule_grouped,
    incremental_update,
)
from .baselines import baseline_no_batch, baseline_batch
from .deadline import edf_batch, tardy_dp, drop_expired
from .multidnn import schedule_multi, schedule_multi_shared, reschedule_trigger
from .registry import Scheduler, SCHEDULERS, SCHEDULER_NAMES, make_scheduler

__all__ = [
    "Segment",
    "Schedule",
    "SweepResult",
    "sweep",
    "segment_duration",
    "cost",
    "OBJECTIVE_COMPLETION",
    "OBJECTIVE_TARDY",
    "DpTable",
    "compute_schedule",
    "compute_schedule_layer_units",
    "compute_schedule_grouped",
    "incremental_update",
    "baseline_no_batch",
    "baseline_batch",
    "edf_batch",
    "tardy_dp",
    "drop_expired",
    "schedule_multi",
    "schedule_multi_shared",
    "reschedule_trigger",
    "Scheduler",
    "SCHEDULERS",
    "SCHEDULER_NAMES",
    "make_scheduler",
]
