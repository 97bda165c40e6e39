"""
Переборные оракулы для проверки планировщиков на малых случайных экземплярах:
  - все 2^(n-1) разбиений на сегменты (суммарное время завершения и число опоздавших);
  - все перестановки DNN x разбиения для нескольких DNN;
  - все чередования шагов (слой, подмножество) при FIFO-порядке завершения;
  - инкрементальный пересчёт против пересчёта с нуля на случайных последовательностях событий.
Таблицы стоимости целочисленные, поэтому сравнения точные.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.profile import (
    INFEASIBLE,
    CostTable,
    DnnProfile,
    ProfileSet,
    SharedComponent,
    StageRef,
    group_layers,
)
from ..core.state import Request, scheduling_key
from ..errors import InfeasibleScheduleError
from ..sched.deadline import TIE_BREAK_ELAPSED, tardy_dp
from ..sched.dp import VARIANT_FULL, VARIANT_GROUPED, VARIANT_LAYER, backtrack, schedule_variant, solve
from ..sched.multidnn import schedule_multi, schedule_multi_shared
from ..sched.segment import sweep

logger = logging.getLogger(__name__)

Segmentation = List[Tuple[int, int]]  # (первый, последний) индекс в порядке планирования


# ---- случайные экземпляры ----

def _rng(seed: int, tag: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([seed, tag, index]))


SHAPE_LINEAR = "linear"
SHAPE_IRREGULAR = "irregular"


def random_component(
    rng: np.random.Generator,
    component_id: str,
    n_layers: int,
    max_batch: int,
    max_ms: int = 20,
    shape: str = SHAPE_LINEAR,
) -> SharedComponent:
    """
    linear: h_k(b) = base + slope * (b - 1), целые, slope <= base: монотонно и субаддитивно.
    irregular: каждое h_k(b) — независимое целое из 1..max_ms*b, без монотонности и субаддитивности.
    """
    if shape not in (SHAPE_LINEAR, SHAPE_IRREGULAR):
        raise ValueError(f"unknown table shape {shape!r}")
    entries = {}
    for k in range(1, n_layers + 1):
        if shape == SHAPE_IRREGULAR:
            entries[k] = {b: float(rng.integers(1, max_ms * b + 1)) for b in range(1, max_batch + 1)}
            continue
        base = int(rng.integers(1, max_ms + 1))
        slope = int(rng.integers(0, base + 1))
        entries[k] = {b: float(base + slope * (b - 1)) for b in range(1, max_batch + 1)}
    return SharedComponent(component_id, CostTable(entries=entries, max_batch=max_batch))


def random_profile(
    rng: np.random.Generator,
    n_layers: int,
    max_batch: int,
    dnn_id: str = "d0",
    groups: Optional[int] = None,
    shape: str = SHAPE_LINEAR,
) -> DnnProfile:
    comp = random_component(rng, f"{dnn_id}.c", n_layers, max_batch, shape=shape)
    profile = DnnProfile(dnn_id, (StageRef(comp, 1),))
    if groups is not None:
        profile = profile.with_groups(group_layers(profile, min(groups, n_layers)))
    return profile


def random_requests(
    rng: np.random.Generator,
    n: int,
    n_layers: int,
    dnn_id: str = "d0",
    first_id: int = 0,
    t0: float = 0.0,
    deadline_range: Optional[Tuple[int, int]] = None,
) -> List[Request]:
    """FIFO-корректный набор: слои не возрастают по порядку поступления."""
    layers = sorted((int(x) for x in rng.integers(1, n_layers + 1, n)), reverse=True)
    out = []
    for i, layer in enumerate(layers):
        deadline = math.inf
        if deadline_range is not None:
            deadline = t0 + float(rng.integers(deadline_range[0], deadline_range[1] + 1))
        out.append(Request(
            id=first_id + i,
            dnn_id=dnn_id,
            arrival_time=t0 - n + i,
            deadline=deadline,
            current_layer=layer,
        ))
    return out


# ---- перебор разбиений ----

def segmentations(n: int) -> Iterator[Segmentation]:
    """Все разбиения 0..n-1 на непрерывные сегменты."""
    if n == 0:
        yield []
        return
    for mask in range(1 << (n - 1)):
        segs, first = [], 0
        for p in range(n - 1):
            if mask >> p & 1:
                segs.append((first, p))
                first = p + 1
        segs.append((first, n - 1))
        yield segs


def _durations(layers: Sequence[int], segs: Segmentation, profile: DnnProfile, max_batch: int) -> Optional[List[float]]:
    out = []
    for first, last in segs:
        d = sweep(layers[first : last + 1], profile, max_batch).duration
        if d == INFEASIBLE:
            return None
        out.append(d)
    return out


def brute_force_completion(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    extra_active: int = 0,
) -> Tuple[float, Optional[Segmentation]]:
    """Минимум sum active(j) * duration по всем разбиениям; (inf, None), если ничего не помещается в B."""
    ordered = sorted(requests, key=scheduling_key)
    layers = [r.current_layer for r in ordered]
    n = len(ordered)
    best, best_segs = INFEASIBLE, None
    for segs in segmentations(n):
        durs = _durations(layers, segs, profile, max_batch)
        if durs is None:
            continue
        total = 0.0
        for (first, _), d in zip(segs, durs):
            total = total + (n - first + extra_active) * d
        if total < best:
            best, best_segs = total, segs
    return best, best_segs


def brute_force_tardy(
    requests: Sequence[Request],
    profile: DnnProfile,
    max_batch: int,
    start: float = 0.0,
) -> int:
    """Минимальное число опоздавших (deadline < завершение) по всем разбиениям."""
    ordered = sorted(requests, key=scheduling_key)
    layers = [r.current_layer for r in ordered]
    best = len(ordered) + 1
    for segs in segmentations(len(ordered)):
        durs = _durations(layers, segs, profile, max_batch)
        if durs is None:
            continue
        elapsed, tardy = 0.0, 0
        for (first, last), d in zip(segs, durs):
            elapsed += d
            finish = start + elapsed
            tardy += sum(1 for m in ordered[first : last + 1] if m.deadline < finish)
        best = min(best, tardy)
    return best


def brute_force_multi(requests: Sequence[Request], profiles: ProfileSet, max_batch: int) -> float:
    """Минимум суммарного завершения по всем перестановкам DNN и разбиениям внутри каждой."""
    by_dnn: Dict[str, List[Request]] = {}
    for r in requests:
        by_dnn.setdefault(r.dnn_id, []).append(r)
    options: Dict[str, List[Tuple[List[float], List[int]]]] = {}
    for d, rs in by_dnn.items():
        ordered = sorted(rs, key=scheduling_key)
        layers = [r.current_layer for r in ordered]
        opts = []
        for segs in segmentations(len(ordered)):
            durs = _durations(layers, segs, profiles.dnn(d), max_batch)
            if durs is not None:
                opts.append((durs, [last - first + 1 for first, last in segs]))
        options[d] = opts

    best = INFEASIBLE
    for order in itertools.permutations(sorted(by_dnn)):
        for choice in itertools.product(*(options[d] for d in order)):
            t, total = 0.0, 0.0
            for durs, sizes in choice:
                for d, size in zip(durs, sizes):
                    t += d
                    for _ in range(size):
                        total += t
            best = min(best, total)
    return best


def brute_force_interleaving(
    layers: Sequence[int],
    profile: DnnProfile,
    max_batch: int,
) -> float:
    """
    Минимум суммарного завершения по всем последовательностям шагов «слой k, объединение когорт
    на слое k», без требования исполнять сегмент до конца. Когорта — запросы, уже прошедшие слой
    в одном батче: дальше они идут только вместе, когорты на одном слое могут слиться. Запрос может
    завершиться только вместе с более ранними или после них. Шаг длительностью h добавляет h каждому
    незавершённому запросу.
    """
    done = profile.num_layers + 1

    @lru_cache(maxsize=None)
    def best(state: Tuple[Tuple[int, int], ...]) -> float:
        # state[i] = (слой, когорта), когорта — наименьший индекс среди её запросов
        unfinished = sum(1 for layer, _ in state if layer < done)
        if unfinished == 0:
            return 0.0
        result = INFEASIBLE
        for k in sorted({layer for layer, _ in state if layer < done}):
            cohorts: Dict[int, List[int]] = {}
            for i, (layer, cohort) in enumerate(state):
                if layer == k:
                    cohorts.setdefault(cohort, []).append(i)
            keys = sorted(cohorts)
            for count in range(1, len(keys) + 1):
                for chosen in itertools.combinations(keys, count):
                    members = [i for c in chosen for i in cohorts[c]]
                    if len(members) > max_batch:
                        continue
                    merged = min(members)
                    nxt = list(state)
                    for i in members:
                        nxt[i] = (k + 1, merged)
                    if k + 1 == done and not _fifo_finish(nxt, members, done):
                        continue
                    h = profile.layer_cost(k, len(members))
                    result = min(result, h * unfinished + best(tuple(nxt)))
        return result

    return best(tuple((layer, i) for i, layer in enumerate(layers)))


def _fifo_finish(state: List[Tuple[int, int]], finishing: Sequence[int], done: int) -> bool:
    """Все запросы раньше завершающихся уже завершены или завершаются сейчас."""
    last = max(finishing)
    return all(state[i][0] == done for i in range(last))


# ---- проверки ----

@dataclass
class OracleMismatch:
    check: str
    seed: int
    index: int
    detail: str

    def describe(self) -> str:
        return f"[{self.check}] seed={self.seed} instance={self.index}: {self.detail}"


@dataclass
class OracleReport:
    instances: Dict[str, int] = field(default_factory=dict)
    mismatches: List[OracleMismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def add(self, check: str, count: int, found: List[OracleMismatch]) -> None:
        self.instances[check] = self.instances.get(check, 0) + count
        self.mismatches.extend(found)


def _dump(requests: Sequence[Request], profile: DnnProfile, max_batch: int) -> str:
    reqs = ", ".join(f"#{r.id}@{r.current_layer}" + ("" if math.isinf(r.deadline) else f"<={r.deadline:g}")
                     for r in sorted(requests, key=scheduling_key))
    rows = "; ".join(
        f"h{k}=" + ",".join(f"{profile.layer_cost(k, b):g}" for b in range(1, min(max_batch, 4) + 1))
        for k in range(1, profile.num_layers + 1)
    )
    return f"B={max_batch} requests [{reqs}] table [{rows}]"


def check_completion(
    seed: int,
    instances: int = 200,
    max_n: int = 8,
    max_layers: int = 4,
    bounded: bool = False,
    shape: str = SHAPE_LINEAR,
) -> List[OracleMismatch]:
    """compute_schedule (полный вариант) против перебора разбиений."""
    check = "completion-bounded" if bounded else "completion"
    tag = 2 if bounded else 1
    if shape == SHAPE_IRREGULAR:
        check, tag = f"{check}-irregular", tag + 7
    found = []
    for i in range(instances):
        rng = _rng(seed, tag, i)
        n = int(rng.integers(1, max_n + 1))
        n_layers = int(rng.integers(1, max_layers + 1))
        max_batch = int(rng.integers(1, 4)) if bounded else n
        profile = random_profile(rng, n_layers, max(max_batch, 1), shape=shape)
        requests = random_requests(rng, n, n_layers)
        expected, _ = brute_force_completion(requests, profile, max_batch)
        try:
            got = schedule_variant(requests, profile, max_batch, VARIANT_FULL).objective_value
        except InfeasibleScheduleError:
            got = INFEASIBLE
        if got != expected:
            found.append(OracleMismatch(check, seed, i, f"dp {got} != brute {expected}; {_dump(requests, profile, max_batch)}"))
    return found


def check_tardy(
    seed: int,
    instances: int = 200,
    max_n: int = 8,
    max_layers: int = 4,
    shape: str = SHAPE_LINEAR,
) -> List[OracleMismatch]:
    """Число опоздавших у tardy_dp против перебора разбиений."""
    check = "tardy-irregular" if shape == SHAPE_IRREGULAR else "tardy"
    found = []
    for i in range(instances):
        rng = _rng(seed, 11 if shape == SHAPE_IRREGULAR else 3, i)
        n = int(rng.integers(1, max_n + 1))
        n_layers = int(rng.integers(1, max_layers + 1))
        profile = random_profile(rng, n_layers, n, shape=shape)
        requests = random_requests(rng, n, n_layers, deadline_range=(5, 30 * n_layers * n))
        expected = brute_force_tardy(requests, profile, n)
        got = tardy_dp(requests, profile, n, now=0.0, tie_break=TIE_BREAK_ELAPSED).objective_value
        if got != expected:
            found.append(OracleMismatch(check, seed, i, f"dp {got:g} != brute {expected}; {_dump(requests, profile, n)}"))
    return found


def random_multi_instance(
    rng: np.random.Generator,
    dnns: int = 3,
    max_per_dnn: int = 3,
    max_layers: int = 3,
    shared_prefix: bool = False,
) -> Tuple[List[Request], ProfileSet]:
    """Несколько DNN; при shared_prefix у всех общий первый компонент."""
    components: Dict[str, SharedComponent] = {}
    profiles: Dict[str, DnnProfile] = {}
    max_batch = dnns * max_per_dnn
    prefix = None
    if shared_prefix:
        prefix = random_component(rng, "prefix", int(rng.integers(1, max_layers + 1)), max_batch)
        components[prefix.component_id] = prefix
    requests: List[Request] = []
    layers_by_dnn: Dict[str, List[int]] = {}
    for m in range(dnns):
        dnn_id = f"m{m}"
        head = random_component(rng, f"{dnn_id}.head", int(rng.integers(1, max_layers + 1)), max_batch)
        components[head.component_id] = head
        stages = [StageRef(head, 1)] if prefix is None else [StageRef(prefix, 1), StageRef(head, prefix.num_layers + 1)]
        profile = DnnProfile(dnn_id, tuple(stages))
        profiles[dnn_id] = profile
        count = int(rng.integers(1, max_per_dnn + 1))
        layers_by_dnn[dnn_id] = sorted((int(x) for x in rng.integers(1, profile.num_layers + 1, count)), reverse=True)
    # Общий порядок поступления перемешивает DNN, внутри DNN слои не возрастают
    sequence = [d for d, ls in layers_by_dnn.items() for _ in ls]
    for t, idx in enumerate(rng.permutation(len(sequence))):
        dnn_id = sequence[int(idx)]
        layer = layers_by_dnn[dnn_id].pop(0)
        requests.append(Request(id=t, dnn_id=dnn_id, arrival_time=float(t), current_layer=layer))
    return requests, ProfileSet(components=components, dnns=profiles, max_batch=max_batch)


def check_multi(seed: int, instances: int = 100) -> List[OracleMismatch]:
    """schedule_multi против перебора (перестановки x разбиения) при M=3, до 3 запросов на DNN."""
    found = []
    for i in range(instances):
        rng = _rng(seed, 4, i)
        requests, profiles = random_multi_instance(rng)
        expected = brute_force_multi(requests, profiles, profiles.max_batch)
        got = schedule_multi(requests, profiles, profiles.max_batch).objective_value
        if got != expected:
            found.append(OracleMismatch("multi", seed, i, f"multi {got} != brute {expected}"))
    return found


def check_shared(seed: int, instances: int = 100) -> List[OracleMismatch]:
    """Подбор попутчиков на общих слоях никогда не хуже планирования без него."""
    found = []
    for i in range(instances):
        rng = _rng(seed, 5, i)
        requests, profiles = random_multi_instance(rng, dnns=2, shared_prefix=True)
        plain = schedule_multi(requests, profiles, profiles.max_batch).objective_value
        shared = schedule_multi_shared(requests, profiles, profiles.max_batch).objective_value
        if shared > plain:
            found.append(OracleMismatch("shared", seed, i, f"shared {shared} > plain {plain}"))
    return found


def check_interleaving(seed: int, instances: int = 50) -> List[OracleMismatch]:
    """
    Никакое чередование шагов не лучше лучшего разбиения на сегменты (n <= 4, N <= 3).
    Таблицы линейные и субаддитивные, B не ограничен.
    """
    found = []
    for i in range(instances):
        rng = _rng(seed, 6, i)
        n = int(rng.integers(1, 5))
        n_layers = int(rng.integers(1, 4))
        profile = random_profile(rng, n_layers, n)
        requests = random_requests(rng, n, n_layers)
        layers = [r.current_layer for r in sorted(requests, key=scheduling_key)]
        segmented, _ = brute_force_completion(requests, profile, n)
        interleaved = brute_force_interleaving(layers, profile, n)
        if interleaved < segmented:
            found.append(OracleMismatch(
                "interleaving", seed, i,
                f"interleaving {interleaved} < segments {segmented}; {_dump(requests, profile, n)}",
            ))
    return found


def _advance_first_segment(requests: List[Request], plans, profile: DnnProfile) -> List[Request]:
    """Исполнить один слой первого сегмента: участники на его начальном слое переходят дальше."""
    if not plans:
        return requests
    seg = plans[0]
    members = set(seg.request_ids)
    k = min(r.current_layer for r in requests if r.id in members)
    out = []
    for r in requests:
        if r.id in members and r.current_layer == k:
            if k + 1 > profile.num_layers:
                continue
            r = Request(r.id, r.dnn_id, r.arrival_time, r.deadline, k + 1)
        out.append(r)
    return out


def check_incremental(seed: int, sequences: int = 1000, steps: int = 6) -> List[OracleMismatch]:
    """Инкрементальный пересчёт совпадает с пересчётом с нуля (objective и разбиение)."""
    found = []
    variants = (VARIANT_FULL, VARIANT_LAYER, VARIANT_GROUPED)
    for i in range(sequences):
        rng = _rng(seed, 7, i)
        n_layers = int(rng.integers(1, 7))
        max_batch = int(rng.integers(2, 9))
        profile = random_profile(rng, n_layers, max_batch, groups=int(rng.integers(1, n_layers + 1)))
        variant = variants[i % len(variants)]
        requests = random_requests(rng, int(rng.integers(1, 9)), n_layers)
        next_id = len(requests)
        table = None
        clock = 0.0
        for step in range(steps):
            if not requests:
                break
            fresh = solve(requests, profile, max_batch, variant)
            reused = solve(requests, profile, max_batch, variant, previous=table)
            same = (
                reused.objective == fresh.objective
                and [p.request_ids for p in backtrack(reused)] == [p.request_ids for p in backtrack(fresh)]
            )
            if not same:
                found.append(OracleMismatch(
                    "incremental", seed, i,
                    f"step {step} ({variant}): incremental {reused.objective} != full {fresh.objective}",
                ))
                break
            table = reused
            requests = _advance_first_segment(requests, backtrack(fresh), profile)
            clock += 1.0
            for _ in range(int(rng.integers(0, 3))):
                requests.append(Request(next_id, profile.dnn_id, clock + next_id * 1e-3, current_layer=1))
                next_id += 1
    return found


CHECKS: Dict[str, Callable[..., List[OracleMismatch]]] = {
    "completion": check_completion,
    "completion-bounded": lambda seed, instances=200: check_completion(seed, instances, bounded=True),
    "completion-irregular": lambda seed, instances=200: check_completion(seed, instances, shape=SHAPE_IRREGULAR),
    "tardy": check_tardy,
    "tardy-irregular": lambda seed, instances=200: check_tardy(seed, instances, shape=SHAPE_IRREGULAR),
    "multi": check_multi,
    "shared": check_shared,
    "interleaving": check_interleaving,
    "incremental": check_incremental,
}

# Число экземпляров (для incremental — последовательностей событий) без явного instances
DEFAULT_COUNTS: Dict[str, int] = {
    "completion": 200,
    "completion-bounded": 200,
    "completion-irregular": 200,
    "tardy": 200,
    "tardy-irregular": 200,
    "multi": 100,
    "shared": 100,
    "interleaving": 50,
    "incremental": 1000,
}


def run_oracle_suite(
    seed: int = 0,
    instances: Optional[int] = None,
    checks: Optional[Sequence[str]] = None,
) -> OracleReport:
    """Все проверки (или выбранные); instances=None — у каждой своё число из DEFAULT_COUNTS."""
    report = OracleReport()
    for name in checks or CHECKS:
        count = DEFAULT_COUNTS[name] if instances is None else instances
        found = CHECKS[name](seed, count)
        report.add(name, count, found)
        logger.info("oracle %s: %d instances, %d mismatches", name, count, len(found))
    return report
