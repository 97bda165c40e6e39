"""Запись результатов: журнал исходов (CSV), сводка (JSON), развёртка по нагрузке (CSV + JSON)."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import IO, Iterable, List, Optional, Sequence, Union

from ..core.state import RequestOutcome
from .metrics import SummaryMetrics
from .runner import CapacityResult

OUTCOME_COLUMNS = (
    "id", "dnn", "arrival_s", "completion_s", "deadline_s",
    "on_time", "location", "offload_k", "network_delay_s",
)
SWEEP_COLUMNS = (
    "scheduler", "rate", "on_time_ratio", "on_time_std",
    "mean_completion_s", "mean_completion_std", "seeds",
)

PathOrFile = Union[str, Path, IO[str]]


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else "%.9f" % x


def outcome_rows(outcomes: Iterable[RequestOutcome]) -> List[List[str]]:
    rows = []
    for o in sorted(outcomes, key=lambda o: o.request_id):
        rows.append([
            str(o.request_id),
            o.dnn_id,
            _fmt(o.created_time),
            _fmt(o.completion_time),
            _fmt(o.deadline),
            "1" if o.on_time else "0",
            o.location.value,
            str(o.offload_k),
            _fmt(o.network_delay),
        ])
    return rows


def _write_csv(dest: PathOrFile, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    if isinstance(dest, (str, Path)):
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", newline="", encoding="utf-8") as f:
            _write_csv(f, header, rows)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def write_outcomes_csv(outcomes: Iterable[RequestOutcome], dest: PathOrFile) -> None:
    """Одна строка на запрос в порядке id; у сброшенных completion_s пустой."""
    _write_csv(dest, OUTCOME_COLUMNS, outcome_rows(outcomes))


def write_summary_json(metrics: SummaryMetrics, dest: Union[str, Path], **extra) -> None:
    data = metrics.to_dict()
    data.update(extra)
    path = Path(dest)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def write_sweep_csv(results: Iterable[CapacityResult], dest: PathOrFile) -> None:
    rows = []
    for res in results:
        for p in res.points:
            rows.append([
                res.scheduler,
                "%g" % p.rate,
                _fmt(p.on_time_ratio),
                _fmt(p.on_time_std),
                _fmt(p.mean_completion_s),
                _fmt(p.mean_completion_std),
                str(p.seeds),
            ])
    _write_csv(dest, SWEEP_COLUMNS, rows)


def write_capacity_json(results: Iterable[CapacityResult], dest: Union[str, Path]) -> None:
    """{scheduler: capacity или null}."""
    data = {res.scheduler: res.capacity for res in results}
    path = Path(dest)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
