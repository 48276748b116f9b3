from __future__ import annotations

import enum
from dataclasses import dataclass

from ..errors import InvalidArgumentError
from ..model import PowerSchedule, SystemConfig


class Method(str, enum.Enum):
    EXACT = "exact"
    GPP = "gpp"
    EPA = "epa"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown method {value!r}") from None


@dataclass(frozen=True)
class GppCoefficients:
    """Asymptotic outage coefficients (W_0, ..., W_L), W_0 = 1."""

    W: tuple

    def __post_init__(self):
        if not self.W or self.W[0] != 1.0 or any(w <= 0 for w in self.W):
            raise InvalidArgumentError(f"invalid coefficients {self.W!r}")


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one power-allocation solve.

    ``objective`` is always the final-round outage under the exact
    evaluator. ``avg_energy`` is measured with the evaluator the method
    optimizes against (asymptotic for GPP, exact otherwise).
    """

    method: Method
    config: SystemConfig
    schedule: PowerSchedule
    objective: float
    avg_energy: float
    kkt_residual: float
    evaluations: int
    converged: bool
    starts_tried: int
