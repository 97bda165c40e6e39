"""
CLI: simulate, sweep-capacity, validate-profile, oracle-check.
Коды выхода: 0 — успех, 1 — расхождение оракула или сбой симуляции, 2 — ошибка конфигурации/входных данных.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, Tuple

from .config import CLIENT_DEADLINE_S, DP_VARIANTS, OFFLOAD_MODES, SimConfig, load_config, resolve_profile_path
from .core.profile import ProfileSet, load_profile
from .data import reference_client_dict, reference_profiles
from .errors import ConfigError, LayerBatchError, ProfileError, WorkloadError
from .eval.export import write_capacity_json, write_outcomes_csv, write_summary_json, write_sweep_csv
from .eval.oracle import CHECKS, run_oracle_suite
from .eval.runner import capacity_sweep, parse_rates, run_sim
from .offload.client import ClientProfile, client_profile_from_dict, load_client_profile
from .sched.registry import SCHEDULER_NAMES
from .workload.arrivals import PROCESSES, WorkloadSpec, load_workload
from .workload.network import NetworkTrace, load_trace, scale_trace

logger = logging.getLogger(__name__)

_INPUT_ERRORS = (ConfigError, ProfileError, WorkloadError)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML с таблицей [sim]")
    p.add_argument("--workload", help="файл нагрузки (TOML/JSON)")
    p.add_argument("--profile", help="профиль сервера (JSON); по умолчанию встроенный эталонный")
    p.add_argument("--client-profile", help="профиль клиентов (JSON); по умолчанию из эталонного")
    p.add_argument("--seed", type=int)
    p.add_argument("--rate", type=float, help="запросов/с")
    p.add_argument("--process", choices=PROCESSES)
    p.add_argument("--count", type=int, help="запросов на прогон")
    p.add_argument("--deadline-ms", type=float, help="относительный дедлайн; 0 — без дедлайна")
    p.add_argument("--clients", type=int)
    p.add_argument("--trace", help="CSV timestamp_s,throughput_mbps")
    p.add_argument("--trace-scale", type=float, default=1.0)
    p.add_argument("--offload", choices=OFFLOAD_MODES)
    p.add_argument("--max-batch", type=int)
    p.add_argument("--dp-variant", choices=DP_VARIANTS)
    p.add_argument("--groups", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layerbatch", description="Layer-wise batching scheduler simulator")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="один прогон симулятора")
    _add_common(p)
    p.add_argument("--scheduler", choices=SCHEDULER_NAMES, default="ours-time")
    p.add_argument("--out", help="CSV исходов; сводка пишется рядом в .json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-capacity", help="развёртка по интенсивности и оценка capacity")
    _add_common(p)
    p.add_argument("--scheduler", nargs="+", choices=SCHEDULER_NAMES, default=["ours-time"])
    p.add_argument("--rates", required=True, help="'от:до:шаг' или список через запятую")
    p.add_argument("--seeds", type=int, default=1, help="число seed на точку, начиная с --seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="CSV развёртки; capacity пишется рядом в .json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-profile", help="проверить профиль и вывести отчёт о субаддитивности")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate_profile)

    p = sub.add_parser("oracle-check", help="сравнить планировщики с перебором на случайных экземплярах")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=None, help="по умолчанию своё для каждой проверки, incremental — 1000")
    p.add_argument("--checks", nargs="+", choices=sorted(CHECKS), default=None)
    p.set_defaults(func=cmd_oracle_check)
    return parser


# ---- сборка входных данных из флагов ----

def _config(args: argparse.Namespace) -> SimConfig:
    config = load_config(args.config) if args.config else SimConfig()
    return config.merged(
        max_batch=args.max_batch,
        offload=args.offload,
        dp_variant=args.dp_variant,
        groups=args.groups,
    )


def _profiles(args: argparse.Namespace, config: SimConfig) -> ProfileSet:
    if args.profile:
        profiles = load_profile(resolve_profile_path(args.profile))
    else:
        profiles = reference_profiles(config.max_batch)
    return profiles.with_groups(config.groups)


def _workload(args: argparse.Namespace) -> WorkloadSpec:
    spec = load_workload(args.workload) if args.workload else WorkloadSpec()
    overrides = {
        "rate": args.rate,
        "process": args.process,
        "count": args.count,
        "seed": args.seed,
        "clients": args.clients,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.deadline_ms is not None:
        overrides["deadline_s"] = args.deadline_ms / 1000.0 if args.deadline_ms > 0 else None
    elif not args.workload and (args.clients or 0) > 0:
        overrides["deadline_s"] = CLIENT_DEADLINE_S
    return dataclasses.replace(spec, **overrides)


def _trace(args: argparse.Namespace) -> Optional[NetworkTrace]:
    if not args.trace:
        return None
    trace = load_trace(args.trace)
    return scale_trace(trace, args.trace_scale) if args.trace_scale != 1.0 else trace


def _client_profile(args: argparse.Namespace, config: SimConfig, profiles: ProfileSet) -> Optional[ClientProfile]:
    if args.client_profile:
        return load_client_profile(args.client_profile)
    if config.offload == "none":
        return None
    return client_profile_from_dict(reference_client_dict(profiles))


def _inputs(args: argparse.Namespace) -> Tuple[SimConfig, ProfileSet, WorkloadSpec, Optional[NetworkTrace], Optional[ClientProfile]]:
    config = _config(args)
    profiles = _profiles(args, config)
    return config, profiles, _workload(args), _trace(args), _client_profile(args, config, profiles)


def _sidecar(out: str, suffix: str) -> Path:
    return Path(out).with_suffix(suffix)


# ---- команды ----

def cmd_simulate(args: argparse.Namespace) -> int:
    config, profiles, spec, trace, client_profile = _inputs(args)
    result = run_sim(spec, profiles, args.scheduler, config, trace=trace, client_profile=client_profile)
    m = result.metrics
    print(f"=== {args.scheduler}: {spec.process} {spec.rate:g} req/s, seed {spec.seed} ===")
    print(f"Generated: {m.generated}  completed: {m.completed}  dropped: {m.dropped}")
    print(f"On-time ratio: {m.on_time_ratio:.4f}")
    print(f"Completion mean/median/p95: {m.mean_completion_s * 1e3:.2f} / "
          f"{m.median_completion_s * 1e3:.2f} / {m.p95_completion_s * 1e3:.2f} ms")
    print("Locations: " + ", ".join(f"{k}={v}" for k, v in m.by_location.items()))
    if args.out:
        write_outcomes_csv(result.outcomes, args.out)
        write_summary_json(
            m, _sidecar(args.out, ".json"),
            scheduler=args.scheduler, rate=spec.rate, seed=spec.seed, plans=result.plans, steps=result.steps,
        )
        print(f"Outcomes: {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config, profiles, spec, trace, client_profile = _inputs(args)
    rates = parse_rates(args.rates)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    seeds = [spec.seed + i for i in range(args.seeds)]
    results = []
    for name in args.scheduler:
        res = capacity_sweep(
            spec, rates, name, profiles, config,
            seeds=seeds, trace=trace, client_profile=client_profile, workers=args.workers,
        )
        results.append(res)
        print(f"{name}: capacity {'none' if res.capacity is None else f'{res.capacity:g} req/s'}")
        for p in res.points:
            print(f"  {p.rate:>8g}  on-time {p.on_time_ratio:.4f} (+-{p.on_time_std:.4f})  "
                  f"mean {p.mean_completion_s * 1e3:.2f} ms")
    if args.out:
        write_sweep_csv(results, args.out)
        write_capacity_json(results, _sidecar(args.out, ".json"))
        print(f"Sweep: {args.out}")
    return 0


def cmd_validate_profile(args: argparse.Namespace) -> int:
    profiles = load_profile(resolve_profile_path(args.path))
    print(f"max_batch: {profiles.max_batch}")
    for dnn_id, dnn in sorted(profiles.dnns.items()):
        stages = " -> ".join(s.component.component_id for s in dnn.stages)
        print(f"{dnn_id}: {dnn.num_layers} layers [{stages}], b=1 runtime {dnn.runtime() * 1e3:.2f} ms")
    shared = sorted(profiles.shared_component_ids)
    if shared:
        print("shared components: " + ", ".join(shared))
    total = 0
    for cid, violations in profiles.subadditivity_report().items():
        total += len(violations)
        for v in violations:
            print(f"  {cid} layer {v.layer}: h({v.b1 + v.b2})={v.combined * 1e3:.3f} ms > "
                  f"h({v.b1})+h({v.b2})={v.separate * 1e3:.3f} ms")
    print(f"sub-additivity violations: {total}")
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    report = run_oracle_suite(args.seed, args.instances, args.checks)
    for name, count in report.instances.items():
        bad = sum(1 for m in report.mismatches if m.check == name)
        print(f"{name}: {count} instances, {bad} mismatches")
    for m in report.mismatches:
        print(m.describe())
    return 0 if report.ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LayerBatchError as exc:
        logger.error("run failed: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
