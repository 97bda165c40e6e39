"""
Генерация запросов: Poisson / Pareto / Constant, размеры кадров, смесь DNN, клиенты.
ГСЧ: numpy PCG64, SeedSequence(seed).spawn — отдельный поток на каждую цель (интервалы,
размеры, смесь, клиенты); смена одного параметра не сдвигает остальные потоки.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from ..config import (
    DEFAULT_DEADLINE_S,
    DEFAULT_REQUEST_COUNT,
    IMAGE_SIZE_RANGE_BITS,
    PARETO_ALPHA,
    read_toml,
)
from ..errors import ConfigError, WorkloadError

PROCESSES = ("poisson", "pareto", "constant")

# Порядок потоков в SeedSequence.spawn; новые цели — только в конец
_STREAMS = ("arrivals", "sizes", "mix", "clients")


@dataclass(frozen=True)
class WorkloadSpec:
    process: str = "poisson"
    rate: float = 100.0                     # запросов/с
    count: int = DEFAULT_REQUEST_COUNT
    mix: Mapping[str, float] = field(default_factory=lambda: {"googlenet": 1.0})
    deadline_s: Optional[float] = DEFAULT_DEADLINE_S  # относительный; None — без дедлайна
    seed: int = 0
    alpha: float = PARETO_ALPHA
    clients: int = 0                        # 0 — все запросы из удалённой трассы
    size_trace: Tuple[float, ...] = ()      # бит; по кругу вместо равномерного распределения

    def __post_init__(self) -> None:
        if self.process not in PROCESSES:
            raise WorkloadError(f"process must be one of {PROCESSES}, got {self.process!r}")
        if not self.rate > 0:
            raise WorkloadError(f"rate must be > 0, got {self.rate}")
        if self.count < 0:
            raise WorkloadError(f"count must be >= 0, got {self.count}")
        if self.process == "pareto" and not self.alpha > 1:
            raise WorkloadError(f"pareto alpha must be > 1 for a finite mean, got {self.alpha}")
        if not self.mix or any(v < 0 for v in self.mix.values()):
            raise WorkloadError("mix must map dnn ids to non-negative fractions")
        if not math.isclose(sum(self.mix.values()), 1.0, abs_tol=1e-6):
            raise WorkloadError(f"mix fractions must sum to 1, got {sum(self.mix.values())}")
        if self.deadline_s is not None and not self.deadline_s > 0:
            raise WorkloadError(f"deadline must be > 0, got {self.deadline_s}")
        if self.clients < 0:
            raise WorkloadError(f"clients must be >= 0, got {self.clients}")
        if any(not s > 0 for s in self.size_trace):
            raise WorkloadError("size trace entries must be > 0")

    @property
    def deadline(self) -> float:
        return math.inf if self.deadline_s is None else self.deadline_s

    def with_rate(self, rate: float) -> "WorkloadSpec":
        return replace(self, rate=rate)

    def with_seed(self, seed: int) -> "WorkloadSpec":
        return replace(self, seed=seed)


class Arrival(NamedTuple):
    id: int
    time: float         # момент генерации, с
    dnn_id: str
    size_bits: float
    client_id: Optional[int]


def _streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(_STREAMS, children)}


def interarrival_times(process: str, rate: float, count: int, rng: np.random.Generator, alpha: float = PARETO_ALPHA) -> np.ndarray:
    if process == "poisson":
        return rng.exponential(1.0 / rate, count)
    if process == "pareto":
        # Lomax: kappa * pareto(alpha), среднее kappa / (alpha - 1) = 1 / rate
        kappa = (alpha - 1.0) / rate
        return kappa * rng.pareto(alpha, count)
    if process == "constant":
        return np.full(count, 1.0 / rate)
    raise WorkloadError(f"unknown arrival process {process!r}")


def generate_arrivals(spec: WorkloadSpec) -> List[Arrival]:
    """Последовательность поступлений; одинаковый seed — одинаковый результат."""
    if spec.count == 0:
        return []
    rng = _streams(spec.seed)
    times = np.cumsum(interarrival_times(spec.process, spec.rate, spec.count, rng["arrivals"], spec.alpha))

    if spec.size_trace:
        trace = np.asarray(spec.size_trace, dtype=float)
        sizes = trace[np.arange(spec.count) % len(trace)]
    else:
        lo, hi = IMAGE_SIZE_RANGE_BITS
        sizes = rng["sizes"].uniform(lo, hi, spec.count)

    dnn_ids = list(spec.mix)
    weights = np.asarray([spec.mix[d] for d in dnn_ids], dtype=float)
    picks = rng["mix"].choice(len(dnn_ids), size=spec.count, p=weights / weights.sum())

    if spec.clients > 0:
        clients = rng["clients"].integers(0, spec.clients, spec.count).tolist()
    else:
        clients = [None] * spec.count

    return [
        Arrival(i, float(times[i]), dnn_ids[picks[i]], float(sizes[i]), clients[i])
        for i in range(spec.count)
    ]


def load_size_trace(path: str | Path) -> Tuple[float, ...]:
    """CSV с колонкой size_bits."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            return tuple(float(row["size_bits"]) for row in csv.DictReader(f))
    except FileNotFoundError as exc:
        raise WorkloadError(f"size trace not found: {path}") from exc
    except (KeyError, ValueError) as exc:
        raise WorkloadError(f"{path}: expected a size_bits column of numbers ({exc})") from exc


_KEYS = {"process", "rate", "count", "mix", "deadline_ms", "seed", "alpha", "clients", "size_trace"}


def workload_from_mapping(data: Mapping, base_dir: Optional[Path] = None) -> WorkloadSpec:
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"unknown workload keys: {sorted(unknown)}")
    kwargs = {k: data[k] for k in ("process", "rate", "count", "seed", "alpha", "clients") if k in data}
    if "mix" in data:
        kwargs["mix"] = {str(k): float(v) for k, v in data["mix"].items()}
    if "deadline_ms" in data:
        ms = data["deadline_ms"]
        kwargs["deadline_s"] = None if ms is None or ms == 0 else float(ms) / 1000.0
    if "size_trace" in data:
        trace_path = Path(data["size_trace"])
        if base_dir is not None and not trace_path.is_absolute():
            trace_path = base_dir / trace_path
        kwargs["size_trace"] = load_size_trace(trace_path)
    return WorkloadSpec(**kwargs)


def load_workload(path: str | Path) -> WorkloadSpec:
    """Файл нагрузки: TOML (таблица [workload] или верхний уровень) либо JSON."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as exc:
            raise WorkloadError(f"workload not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"cannot parse {path}: {exc}") from exc
    else:
        data = read_toml(path)
        data = {k: v for k, v in data.get("workload", data).items() if k != "sim"}
    return workload_from_mapping(data, base_dir=path.parent)
