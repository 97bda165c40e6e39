"""
Конфигурация симуляции по умолчанию.
Приоритет: флаги CLI > значения из файла > значения по умолчанию.
"""
from __future__ import annotations

import dataclasses
import os
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

from .errors import ConfigError

# B=90 хватает даже SSD
DEFAULT_MAX_BATCH = 90
# Расписание считается максимум для первых 500 активных запросов
SNAPSHOT_CAP = 500
# 5 групп слоёв, каждая ~1/5 времени всей сети
DEFAULT_GROUPS = 5

# Дедлайн по умолчанию: 150 мс без клиентов, 300 мс при совместном исполнении
DEFAULT_DEADLINE_S = 0.150
CLIENT_DEADLINE_S = 0.300

# EWMA пропускной способности сети: вес 0.3 на новую выборку
EWMA_WEIGHT = 0.3
# H.264 для промежуточных данных: 1.5 мс сжатие на клиенте, 0.6 мс распаковка на сервере
COMPRESS_S = 0.0015
DECOMPRESS_S = 0.0006

# Размер JPEG-кадра: от 0.12 до 0.33 Мбит
IMAGE_SIZE_RANGE_BITS: Tuple[float, float] = (0.12e6, 0.33e6)
# Pareto inter-arrival: alpha=1.25, kappa=(alpha-1)/rate
PARETO_ALPHA = 1.25

# Capacity: максимальная нагрузка, при которой on-time ratio >= 90%
CAPACITY_THRESHOLD = 0.90
# Запросов на прогон
DEFAULT_REQUEST_COUNT = 5000
# M! <= 720 перестановок
MAX_EXACT_PERMUTATION_DNNS = 6

# Каталог с профилями по умолчанию (для путей без директории в CLI)
PROFILE_DIR_ENV = "LAYERBATCH_PROFILE_DIR"

DP_VARIANTS = ("full", "layer", "grouped")
OFFLOAD_MODES = ("none", "binary", "partial")
PARTIAL_RULES = ("min-completion", "first-available")
TARDY_TIE_BREAKS = ("elapsed", "completion")


@dataclass(frozen=True)
class SimConfig:
    max_batch: int = DEFAULT_MAX_BATCH
    snapshot_cap: int = SNAPSHOT_CAP
    dp_variant: str = "grouped"
    groups: int = DEFAULT_GROUPS
    incremental: bool = True
    sharing: bool = True
    drop_expired: bool = True
    # Время работы планировщика на CPU; 0 — планировщик работает параллельно GPU
    scheduler_latency_s: float = 0.0
    # Накладные расходы на копирование/формирование батча на каждый шаг
    batch_overhead_s: float = 0.0
    offload: str = "none"
    partial_rule: str = "min-completion"
    tardy_tie_break: str = "elapsed"
    ewma_weight: float = EWMA_WEIGHT
    initial_throughput_bps: Optional[float] = None
    # Опционально: клиент всегда отдаёт запрос на сервер, если его загрузка выше порога
    battery_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ConfigError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.snapshot_cap < 1:
            raise ConfigError(f"snapshot_cap must be >= 1, got {self.snapshot_cap}")
        if self.groups < 1:
            raise ConfigError(f"groups must be >= 1, got {self.groups}")
        _check_choice("dp_variant", self.dp_variant, DP_VARIANTS)
        _check_choice("offload", self.offload, OFFLOAD_MODES)
        _check_choice("partial_rule", self.partial_rule, PARTIAL_RULES)
        _check_choice("tardy_tie_break", self.tardy_tie_break, TARDY_TIE_BREAKS)
        if self.scheduler_latency_s < 0 or self.batch_overhead_s < 0:
            raise ConfigError("latencies must be non-negative")
        if not 0.0 < self.ewma_weight <= 1.0:
            raise ConfigError(f"ewma_weight must be in (0, 1], got {self.ewma_weight}")

    @property
    def step_granularity(self) -> str:
        """Шаг исполнения совпадает с гранулярностью точек разбиения планировщика."""
        return "group" if self.dp_variant == "grouped" else "layer"

    def merged(self, **overrides: Any) -> "SimConfig":
        """Новая конфигурация с переопределёнными полями; None означает «не задано»."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **clean)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SimConfig":
        return cls().merged(**dict(data))


def _check_choice(name: str, value: str, choices: Tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {choices}, got {value!r}")


def read_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def load_config(path: str | Path) -> SimConfig:
    """Прочитать таблицу [sim] из TOML-файла (остальные таблицы игнорируются)."""
    data = read_toml(path)
    return SimConfig.from_mapping(data.get("sim", {}))


def resolve_profile_path(name: str | Path) -> Path:
    """Голое имя файла ищется в каталоге из LAYERBATCH_PROFILE_DIR."""
    path = Path(name)
    if path.parent == Path(".") and not path.exists():
        base = os.environ.get(PROFILE_DIR_ENV)
        if base:
            return Path(base) / path
    return path
