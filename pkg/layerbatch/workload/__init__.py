from .arrivals import Arrival, WorkloadSpec, generate_arrivals, load_workload, workload_from_mapping
from .network import NetworkTrace, transmission_delay, scale_trace, load_trace

__all__ = [
    "Arrival",
    "WorkloadSpec",
    "generate_arrivals",
    "load_workload",
    "workload_from_mapping",
    "NetworkTrace",
    "transmission_delay",
    "scale_trace",
    "load_trace",
]
