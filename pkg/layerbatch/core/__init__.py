from .state import (
    Request,
    RequestState,
    RequestOutcome,
    Location,
    ValidationReport,
    validate_request_set,
    arrival_key,
    scheduling_key,
)
from .events import SimEvent, EventKind, EventQueue
from .profile import (
    CostTable,
    SharedComponent,
    StageRef,
    DnnProfile,
    ProfileSet,
    lookup_h,
    check_subadditivity,
    group_layers,
    batch_reduction,
    load_profile,
    profile_from_dict,
    profile_to_dict,
)
from .sim import Sim, SimState

__all__ = [
    "Request",
    "RequestState",
    "RequestOutcome",
    "Location",
    "ValidationReport",
    "validate_request_set",
    "arrival_key",
    "scheduling_key",
    "SimEvent",
    "EventKind",
    "EventQueue",
    "CostTable",
    "SharedComponent",
    "StageRef",
    "DnnProfile",
    "ProfileSet",
    "lookup_h",
    "check_subadditivity",
    "group_layers",
    "batch_reduction",
    "load_profile",
    "profile_from_dict",
    "profile_to_dict",
    "Sim",
    "SimState",
]
