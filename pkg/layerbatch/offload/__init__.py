from .client import (
    ClientDnn,
    ClientProfile,
    ClientState,
    NetworkEstimator,
    BinaryDecision,
    PartialDecision,
    client_profile_from_dict,
    load_client_profile,
    ewma_update,
    decide_binary,
    decide_partial,
    partial_estimates,
    LOCAL,
    OFFLOAD,
)

__all__ = [
    "ClientDnn",
    "ClientProfile",
    "ClientState",
    "NetworkEstimator",
    "BinaryDecision",
    "PartialDecision",
    "client_profile_from_dict",
    "load_client_profile",
    "ewma_update",
    "decide_binary",
    "decide_partial",
    "partial_estimates",
    "LOCAL",
    "OFFLOAD",
]
