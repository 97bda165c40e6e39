from .runner import run_sim, SimResult, capacity_sweep, CapacityResult, SweepPoint, capacity_from_curve, parse_rates
from .metrics import summarize, SummaryMetrics
from .export import write_outcomes_csv, write_summary_json, write_sweep_csv, write_capacity_json
from .oracle import run_oracle_suite, OracleReport, OracleMismatch

__all__ = [
    "run_sim",
    "SimResult",
    "capacity_sweep",
    "CapacityResult",
    "SweepPoint",
    "capacity_from_curve",
    "parse_rates",
    "summarize",
    "SummaryMetrics",
    "write_outcomes_csv",
    "write_summary_json",
    "write_sweep_csv",
    "write_capacity_json",
    "run_oracle_suite",
    "OracleReport",
    "OracleMismatch",
]
