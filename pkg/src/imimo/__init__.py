"""Rate-outage analysis and energy-constrained power allocation for
incremental-MIMO retransmission schemes (ARQ, CC-HARQ, IR-HARQ)."""
from .model import (
    OutageMethod,
    OutageProfile,
    PowerSchedule,
    Scheme,
    SystemConfig,
    db_to_linear,
    linear_to_db,
)

__version__ = "0.1.0"

__all__ = [
    "OutageMethod",
    "OutageProfile",
    "PowerSchedule",
    "Scheme",
    "SystemConfig",
    "db_to_linear",
    "linear_to_db",
]
