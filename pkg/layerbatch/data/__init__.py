from .reference_profiles import (
    reference_profile_dict,
    reference_profiles,
    reference_client_dict,
    CLIENT_RUNTIME_MS,
)

__all__ = [
    "reference_profile_dict",
    "reference_profiles",
    "reference_client_dict",
    "CLIENT_RUNTIME_MS",
]
