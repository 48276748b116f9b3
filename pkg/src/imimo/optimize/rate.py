from __future__ import annotations

import math
from dataclasses import replace

from ..errors import UnsupportedSchemeError
from ..model import Scheme, SystemConfig, snr_threshold
from .report import SolverReport

__all__ = ["rate_scale_factor", "scale_for_rate"]


def rate_scale_factor(rate_old: float, rate_new: float) -> float:
    """(2^R_new - 1) / (2^R_old - 1)."""
    return snr_threshold(rate_new) / snr_threshold(rate_old)


def scale_for_rate(report: SolverReport, config_old: SystemConfig, rate_new: float) -> SolverReport:
    """Carry a solution at rate R_old over to ``rate_new``.

    ARQ and CC outage depend on the powers only through (2^R - 1) / P_k, so
    scaling every power and the budget by the same factor keeps the whole
    outage profile. IR-HARQ has no such invariance.
    """
    if config_old.scheme is Scheme.IR_HARQ:
        raise UnsupportedSchemeError("rate scaling does not hold for IR-HARQ")
    if not (math.isfinite(rate_new) and rate_new > 0):
        raise ValueError(f"rate must be positive, got {rate_new!r}")
    factor = rate_scale_factor(config_old.rate, rate_new)
    config_new = replace(
        config_old, rate=rate_new, energy_budget=config_old.energy_budget * factor
    )
    return replace(
        report,
        config=config_new,
        schedule=report.schedule.scaled(factor),
        avg_energy=report.avg_energy * factor,
    )
