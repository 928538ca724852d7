"""TWT acceptance and scheduling for AoI-constrained Wi-Fi uplink traffic."""

from .model import (
    FeasibilityError,
    Instance,
    Schedule,
    ScheduleEntry,
    SolveConfig,
    Station,
    TransmissionRequest,
    ValidationError,
    check_schedule_feasibility,
    rejection_cost,
    schedule_objective,
    validate_instance,
)
from .tasper import solve_tasper
from .exact import enumerate_all, solve_exact

__version__ = "0.1.0"

__all__ = [
    "FeasibilityError", "Instance", "Schedule", "ScheduleEntry", "SolveConfig", "Station",
    "TransmissionRequest", "ValidationError", "check_schedule_feasibility", "rejection_cost",
    "schedule_objective", "validate_instance", "solve_tasper", "solve_exact", "enumerate_all",
]
