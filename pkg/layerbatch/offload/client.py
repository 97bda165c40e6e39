"""
Клиентская сторона: локальная очередь исполнения (FIFO), решение о полном или частичном offloading
и EWMA-оценка пропускной способности сети.

Формат клиентского профиля (JSON, времена в мс):
{
  "compress_ms": 1.5, "decompress_ms": 0.6,
  "dnns": {"vgg16": {"full_runtime_ms": 230, "group_runtimes_ms": [...], "payload_bits": [...]}}
}
payload_bits[g] — размер выхода после группы g+1 (бит), передаётся при k = g+1.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from ..config import COMPRESS_S, DECOMPRESS_S, EWMA_WEIGHT, PARTIAL_RULES
from ..core.profile import DnnProfile
from ..core.state import Request
from ..errors import ConfigError, ProfileError

logger = logging.getLogger(__name__)

LOCAL = "local"
OFFLOAD = "offload"

RULE_MIN_COMPLETION = "min-completion"
RULE_FIRST_AVAILABLE = "first-available"

# Допуск на расхождение суммы групп и полного времени
_RUNTIME_TOLERANCE = 0.01


@dataclass(frozen=True)
class ClientDnn:
    dnn_id: str
    group_runtimes: Tuple[float, ...]   # с
    full_runtime: float                 # с, среднее по повторным прогонам
    payload_bits: Tuple[float, ...]     # выход после каждой группы

    def __post_init__(self) -> None:
        if not self.group_runtimes:
            raise ProfileError(f"client {self.dnn_id}: at least one layer group required")
        if any(t < 0 for t in self.group_runtimes) or self.full_runtime < 0:
            raise ProfileError(f"client {self.dnn_id}: negative runtime")
        if len(self.payload_bits) != len(self.group_runtimes):
            raise ProfileError(
                f"client {self.dnn_id}: {len(self.payload_bits)} payload sizes for {len(self.group_runtimes)} groups"
            )
        total = sum(self.group_runtimes)
        if not math.isclose(total, self.full_runtime, rel_tol=_RUNTIME_TOLERANCE):
            raise ProfileError(
                f"client {self.dnn_id}: group runtimes sum to {total * 1000:.3f} ms, "
                f"full runtime is {self.full_runtime * 1000:.3f} ms (tolerance 1%)"
            )

    @property
    def num_groups(self) -> int:
        return len(self.group_runtimes)

    def local_time(self, k: int) -> float:
        """Время первых k групп на клиенте."""
        return sum(self.group_runtimes[:k])


@dataclass(frozen=True)
class ClientProfile:
    dnns: Mapping[str, ClientDnn]
    compress_s: float = COMPRESS_S
    decompress_s: float = DECOMPRESS_S

    def dnn(self, dnn_id: str) -> ClientDnn:
        try:
            return self.dnns[dnn_id]
        except KeyError:
            raise ProfileError(f"client profile has no dnn {dnn_id!r}") from None


def client_profile_from_dict(data: Mapping) -> ClientProfile:
    try:
        raw = data["dnns"]
        dnns = {
            str(d): ClientDnn(
                dnn_id=str(d),
                group_runtimes=tuple(float(ms) / 1000.0 for ms in v["group_runtimes_ms"]),
                full_runtime=float(v["full_runtime_ms"]) / 1000.0,
                payload_bits=tuple(float(b) for b in v["payload_bits"]),
            )
            for d, v in raw.items()
        }
        return ClientProfile(
            dnns=dnns,
            compress_s=float(data.get("compress_ms", COMPRESS_S * 1000.0)) / 1000.0,
            decompress_s=float(data.get("decompress_ms", DECOMPRESS_S * 1000.0)) / 1000.0,
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ProfileError(f"malformed client profile: {exc}") from exc


def load_client_profile(path: str | Path) -> ClientProfile:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise ProfileError(f"client profile not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileError(f"cannot parse {path}: {exc}") from exc
    return client_profile_from_dict(data)


def ewma_update(est: Optional[float], sample: float, weight: float = EWMA_WEIGHT) -> float:
    """est' = weight * sample + (1 - weight) * est; первая выборка задаёт оценку напрямую."""
    if not sample > 0:
        raise ValueError(f"throughput sample must be > 0, got {sample}")
    if est is None:
        return float(sample)
    return weight * sample + (1.0 - weight) * est


@dataclass
class NetworkEstimator:
    """EWMA пропускной способности (бит/с) по наблюдённым передачам."""
    weight: float = EWMA_WEIGHT
    estimate: Optional[float] = None

    def observe(self, size_bits: float, delay: float) -> Optional[float]:
        if size_bits > 0 and delay > 0:
            self.estimate = ewma_update(self.estimate, size_bits / delay, self.weight)
        return self.estimate

    def delay(self, size_bits: float) -> float:
        """Ожидаемая задержка передачи; без оценки сеть считается мгновенной."""
        if size_bits <= 0 or self.estimate is None:
            return 0.0
        return size_bits / self.estimate


@dataclass
class ClientState:
    """Локальная очередь клиента: запросы исполняются по порядку поступления."""
    client_id: int
    busy_until: float = 0.0
    busy_time: float = 0.0
    history: List[Tuple[float, float]] = field(default_factory=list, repr=False)

    def backlog(self, now: float) -> float:
        return max(0.0, self.busy_until - now)

    def reserve(self, now: float, duration: float) -> float:
        """Поставить работу в очередь; вернуть момент завершения."""
        start = max(now, self.busy_until)
        self.busy_until = start + duration
        self.busy_time += duration
        self.history.append((start, self.busy_until))
        return self.busy_until

    def busy_fraction(self, now: float) -> float:
        """Доля прошедшего времени, занятая локальными вычислениями."""
        if now <= 0:
            return 0.0
        done = self.busy_time - self.backlog(now)
        return min(1.0, max(0.0, done / now))


class BinaryDecision(NamedTuple):
    choice: str             # LOCAL или OFFLOAD
    local_estimate: float   # backlog + полное локальное время
    remote_estimate: float  # передача кадра + оценка сервера


def decide_binary(
    request: Request,
    state: ClientState,
    server_estimate: float,
    estimator: NetworkEstimator,
    client: ClientDnn,
    now: float,
    battery_threshold: Optional[float] = None,
) -> BinaryDecision:
    """
    Локально, если клиент успевает к дедлайну; иначе меньшая из оценок (при равенстве — offload).
    server_estimate — ожидание плюс исполнение на сервере, относительно now.
    """
    local = state.backlog(now) + client.full_runtime
    remote = estimator.delay(request.size_bits) + server_estimate
    if battery_threshold is not None and state.busy_fraction(now) > battery_threshold:
        return BinaryDecision(OFFLOAD, local, remote)
    if now + local <= request.deadline:
        return BinaryDecision(LOCAL, local, remote)
    choice = LOCAL if local < remote else OFFLOAD
    return BinaryDecision(choice, local, remote)


class PartialDecision(NamedTuple):
    k: int                          # число групп на клиенте: 0 — сразу на сервер, G — целиком локально
    estimate: float
    estimates: Tuple[float, ...]    # по всем k = 0..G


def partial_estimates(
    t_c: Sequence[float],
    t_s: Sequence[float],
    tx: Sequence[float],
    remaining: Sequence[float],
    compress_s: float,
    decompress_s: float,
) -> List[float]:
    """
    Оценка завершения для каждого k = 0..G:
    max(t_c(k) + сжатие + передача(k), t_s(k)) + остаток на сервере + распаковка,
    сжатие/распаковка только для промежуточных данных (0 < k < G); для k = G — t_c(G).
    """
    g = len(t_c) - 1
    out = []
    for k in range(g + 1):
        if k == g:
            out.append(t_c[g])
            continue
        intermediate = 0 < k < g
        comp = compress_s if intermediate else 0.0
        decomp = decompress_s if intermediate else 0.0
        out.append(max(t_c[k] + comp + tx[k], t_s[k]) + remaining[k] + decomp)
    return out


def decide_partial(
    request: Request,
    state: ClientState,
    server_wait: Union[float, Sequence[float]],
    estimator: NetworkEstimator,
    client: ClientDnn,
    server: DnnProfile,
    now: float,
    rule: str = RULE_MIN_COMPLETION,
    compress_s: float = COMPRESS_S,
    decompress_s: float = DECOMPRESS_S,
) -> PartialDecision:
    """
    Выбор k по группам слоёв сервера. server_wait — t_s(k), ожидание до старта на сервере
    (одно число — одинаково для всех k).
    """
    if rule not in PARTIAL_RULES:
        raise ConfigError(f"partial rule must be one of {PARTIAL_RULES}, got {rule!r}")
    g = server.num_groups
    if client.num_groups != g:
        raise ProfileError(f"{client.dnn_id}: client has {client.num_groups} groups, server has {g}")
    backlog = state.backlog(now)
    t_c = [backlog + client.local_time(k) for k in range(g + 1)]
    if isinstance(server_wait, (int, float)):
        t_s = [float(server_wait)] * (g + 1)
    else:
        t_s = list(server_wait)
        if len(t_s) != g + 1:
            raise ValueError(f"need {g + 1} server wait values, got {len(t_s)}")
    tx = [estimator.delay(request.size_bits)]
    tx += [estimator.delay(client.payload_bits[k - 1]) for k in range(1, g)]
    tx.append(0.0)
    remaining = [server.runtime(server.layer_groups[k][0]) for k in range(g)] + [0.0]

    estimates = partial_estimates(t_c, t_s, tx, remaining, compress_s, decompress_s)
    if rule == RULE_FIRST_AVAILABLE:
        k = next((k for k in range(g + 1) if t_s[k] <= t_c[k]), g)
    else:
        k = min(range(g + 1), key=lambda i: (estimates[i], i))
    logger.debug("request %d: partial offload k=%d of %d (estimate %.6f s)", request.id, k, g, estimates[k])
    return PartialDecision(k, estimates[k], tuple(estimates))
