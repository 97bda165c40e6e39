"""
Сетевая трасса: кусочно-постоянная пропускная способность между точками трассы.
Задержка передачи = время, за которое накопленный объём достигает size бит (без задержки
распространения). Последняя точка длится медианный интервал трассы, после чего трасса
повторяется с начала.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Tuple

import numpy as np

from ..errors import WorkloadError


@dataclass(frozen=True, eq=False)
class NetworkTrace:
    timestamps: Tuple[float, ...]          # секунды, строго возрастают
    throughputs_bps: Tuple[float, ...]     # бит/с, > 0
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.timestamps or len(self.timestamps) != len(self.throughputs_bps):
            raise WorkloadError("trace needs matching, non-empty timestamp and throughput columns")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise WorkloadError("trace timestamps must be strictly increasing")
        if any(not v > 0 for v in self.throughputs_bps):
            raise WorkloadError("trace throughputs must be > 0")

    @classmethod
    def constant(cls, throughput_bps: float) -> "NetworkTrace":
        return cls((0.0,), (float(throughput_bps),), name=f"constant-{throughput_bps:g}")

    @cached_property
    def _bounds(self) -> np.ndarray:
        """Смещения начала каждого участка от первой точки плюс длина периода в конце."""
        t = np.asarray(self.timestamps, dtype=float) - self.timestamps[0]
        if len(t) == 1:
            return np.array([0.0, math.inf])
        tail = float(np.median(np.diff(t)))
        return np.append(t, t[-1] + tail)

    @property
    def period(self) -> float:
        return float(self._bounds[-1])

    def segment_at(self, t: float) -> Tuple[float, float]:
        """(пропускная способность, абсолютный конец участка) в момент t."""
        bounds = self._bounds
        if len(bounds) == 2 and math.isinf(bounds[-1]):
            return self.throughputs_bps[0], math.inf
        phase = (t - self.timestamps[0]) % self.period
        idx = int(np.searchsorted(bounds, phase, side="right")) - 1
        idx = min(max(idx, 0), len(self.throughputs_bps) - 1)
        end = t - phase + float(bounds[idx + 1])
        return self.throughputs_bps[idx], end

    def throughput_at(self, t: float) -> float:
        return self.segment_at(t)[0]


def transmission_delay(size_bits: float, start: float, trace: NetworkTrace) -> float:
    """Интегрирует пропускную способность от start, пока не передано size_bits."""
    if size_bits < 0:
        raise ValueError(f"size must be >= 0, got {size_bits}")
    if size_bits == 0:
        return 0.0
    remaining = float(size_bits)
    t = float(start)
    while True:
        rate, end = trace.segment_at(t)
        if end <= t:
            # граница участка совпала с t с точностью до округления
            t = math.nextafter(t, math.inf)
            continue
        capacity = rate * (end - t)
        if remaining <= capacity:
            return t + remaining / rate - start
        remaining -= capacity
        t = end


def scale_trace(trace: NetworkTrace, factor: float) -> NetworkTrace:
    if not factor > 0:
        raise WorkloadError(f"trace scale factor must be > 0, got {factor}")
    return NetworkTrace(
        trace.timestamps,
        tuple(v * factor for v in trace.throughputs_bps),
        name=f"{trace.name}x{factor:g}" if trace.name else "",
    )


def load_trace(path: str | Path) -> NetworkTrace:
    """CSV с колонками timestamp_s,throughput_mbps."""
    path = Path(path)
    timestamps, rates = [], []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                timestamps.append(float(row["timestamp_s"]))
                rates.append(float(row["throughput_mbps"]) * 1e6)
    except FileNotFoundError as exc:
        raise WorkloadError(f"trace not found: {path}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        raise WorkloadError(f"{path}: expected columns timestamp_s,throughput_mbps ({exc})") from exc
    return NetworkTrace(tuple(timestamps), tuple(rates), name=path.stem)
