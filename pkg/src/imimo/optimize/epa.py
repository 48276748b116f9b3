from __future__ import annotations

import math

import numpy as np

from ..errors import InternalError
from ..model import OutageMethod, PowerSchedule, SystemConfig
from .gpp import _exact_objective
from .problem import Problem, kkt_residual_exact
from .report import Method, SolverReport

__all__ = ["solve_epa"]

_REL_TOL = 1e-10


def solve_epa(config: SystemConfig, outage_method=OutageMethod.EXACT) -> SolverReport:
    """Equal power P in every round, spending exactly the budget.

    E_avg(P, ..., P) lies between P and L P, so [E/L, E] brackets a root.
    The lower end of the final bracket is returned, keeping the schedule
    feasible.
    """
    L = config.max_rounds
    budget = config.energy_budget
    problem = Problem(config, outage_method)

    def excess(p):
        return problem.profile([p] * L).avg_energy - budget

    lo, hi = budget / L, budget
    if L > 1:
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo > 0 or f_hi < 0:
            raise InternalError(
                f"EPA bracket [{lo!r}, {hi!r}] does not straddle the budget: "
                f"excess {f_lo!r}, {f_hi!r}"
            )
        while hi - lo > _REL_TOL * hi:
            mid = 0.5 * (lo + hi)
            if excess(mid) <= 0:
                lo = mid
            else:
                hi = mid
    schedule = PowerSchedule.equal(lo, L)
    energy = problem.profile(schedule.powers).avg_energy
    u = np.full(L, math.log(lo))
    return SolverReport(
        method=Method.EPA,
        config=config,
        schedule=schedule,
        objective=_exact_objective(config, schedule),
        avg_energy=energy,
        kkt_residual=kkt_residual_exact(problem, u),
        evaluations=problem.evaluations,
        converged=True,
        starts_tried=1,
    )
