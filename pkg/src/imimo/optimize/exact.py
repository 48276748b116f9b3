"""Local solver for the exact (quadrature-evaluated) allocation problem.

Log-barrier outer loop, barrier weight divided by 10 per stage from 1e-1
down to 1e-8 (both scaled down when the objective is flat), damped Newton inner loop on finite-difference derivatives with an
Armijo backtracking line search. The problem is not convex, so several
starts are tried and the best feasible point is kept.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, UnsupportedDimensionError
from ..model import OutageMethod, PowerSchedule, Scheme, SystemConfig
from ..outage import MAX_NESTED_ROUNDS, NESTED_ORDER
from .epa import solve_epa
from .gpp import gpp_schedule
from .problem import LOG_POWER_FLOOR, ZERO_POWER, Problem, kkt_residual_exact
from .report import Method, SolverReport

__all__ = ["solve_exact", "default_starts", "BarrierOptions"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BarrierOptions:
    mu_initial: float = 1e-1
    mu_final: float = 1e-8
    mu_factor: float = 10.0
    kkt_tol: float = 1e-6
    max_newton: int = 60
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_step: float = 2.0  # in ln P units
    interior_margin: float = 1e-3


@dataclass
class _Run:
    u: np.ndarray
    f: float
    c: float
    residual: float
    converged: bool


def default_starts(config: SystemConfig, n_perturbed: int = 8, seed: int = 0):
    """GPP and EPA schedules, ``n_perturbed`` log-uniform +-3 dB
    perturbations of the GPP schedule, and the whole budget in round one.

    The last start covers small budgets, where the best schedule puts
    everything into the first round and the barrier path from an interior
    start only creeps towards that corner.
    """
    gpp = gpp_schedule(config).as_array()
    epa = np.asarray(solve_epa(config).schedule.powers)
    rng = np.random.default_rng(seed)
    starts = [gpp, epa]
    for _ in range(n_perturbed):
        db = rng.uniform(-3.0, 3.0, size=gpp.size)
        starts.append(gpp * 10.0 ** (db / 10.0))
    if config.max_rounds > 1:
        first = np.zeros(config.max_rounds)
        first[0] = config.energy_budget
        starts.append(first)
    return starts


def _interior(problem: Problem, powers, margin):
    """Scale ``powers`` down until E_avg <= (1 - margin) E_given."""
    u = np.maximum(np.log(np.maximum(powers, 1e-300)), LOG_POWER_FLOOR)
    for _ in range(200):
        _, c = problem(u)
        if c <= -margin:
            return u
        shift = math.log1p(-margin) - (math.log1p(c) if c > -1 else 0.0)
        u = np.maximum(u + min(shift, -1e-3), LOG_POWER_FLOOR)
    raise InvalidArgumentError("could not find a strictly feasible starting point")


def _barrier_value(f, c, mu):
    if not c < 0 or not math.isfinite(f):
        return math.inf
    return f - mu * math.log(-c)


def _newton_stage(problem: Problem, u, mu, opts: BarrierOptions):
    for _ in range(opts.max_newton):
        (f, c), (gf, gc), (hf, hc) = problem.derivatives(u)
        nu = mu / -c
        grad = gf + nu * gc
        hess = hf + nu * hc + (mu / (c * c)) * np.outer(gc, gc)
        hess = 0.5 * (hess + hess.T)
        direction = _damped_newton_direction(hess, grad)
        decrement = -float(grad @ direction)
        if decrement < 1e-14:
            break
        norm = np.max(np.abs(direction))
        if norm > opts.max_step:
            direction *= opts.max_step / norm
        phi0 = _barrier_value(f, c, mu)
        step = 1.0
        accepted = False
        for _ in range(60):
            trial = np.maximum(u + step * direction, LOG_POWER_FLOOR)
            ft, ct = problem(trial)
            phi = _barrier_value(ft, ct, mu)
            if phi <= phi0 + opts.armijo * float(grad @ (trial - u)):
                accepted = True
                break
            step *= opts.backtrack
        if not accepted or np.max(np.abs(trial - u)) < 1e-13:
            break
        u = trial
    return u


def _damped_newton_direction(hess, grad):
    scale = max(1e-12, float(np.max(np.abs(np.diag(hess)))))
    tau = 0.0
    eye = np.eye(grad.size)
    for _ in range(60):
        try:
            chol = np.linalg.cholesky(hess + tau * eye)
            y = np.linalg.solve(chol, -grad)
            return np.linalg.solve(chol.T, y)
        except np.linalg.LinAlgError:
            tau = max(2.0 * tau, 1e-8 * scale)
    return -grad


def _run_barrier(problem: Problem, u0, opts: BarrierOptions) -> _Run:
    u = u0.copy()
    # At low SNR ln p_out is nearly flat; an unscaled barrier would then
    # push every power down to the floor where the outage saturates at 1.
    gf, _ = problem.gradients(u)
    scale = min(1.0, max(float(np.max(np.abs(gf))), 1e-12))
    mu = opts.mu_initial * scale
    mu_final = opts.mu_final * scale
    while True:
        u = _newton_stage(problem, u, mu, opts)
        if mu <= mu_final * (1 + 1e-12):
            break
        mu = max(mu / opts.mu_factor, mu_final)
    f, c = problem(u)
    residual = kkt_residual_exact(problem, u)
    return _Run(u=u, f=f, c=c, residual=residual, converged=residual <= opts.kkt_tol)


def _finalize_powers(u):
    powers = np.exp(u)
    powers[powers <= ZERO_POWER] = 0.0
    return powers


def solve_exact(
    config: SystemConfig,
    starts=None,
    seed: int = 0,
    n_perturbed: int = 8,
    order: int = NESTED_ORDER,
    options: BarrierOptions | None = None,
) -> SolverReport:
    """Local minimizer of the exact final-round outage under the budget.

    Every start is run through the barrier method; the start points
    themselves (once made feasible) also compete. The winner is the
    feasible candidate with the smallest outage, ties broken by the power
    vector, so the order of ``starts`` does not matter.
    """
    if config.scheme is Scheme.IR_HARQ and config.max_rounds > MAX_NESTED_ROUNDS:
        raise UnsupportedDimensionError(
            f"the exact IR-HARQ method is limited to L <= {MAX_NESTED_ROUNDS} "
            f"(nested quadrature); got L = {config.max_rounds}"
        )
    opts = options or BarrierOptions()
    problem = Problem(config, OutageMethod.EXACT, order)
    if starts is None:
        starts = default_starts(config, n_perturbed=n_perturbed, seed=seed)
    budget = config.energy_budget

    candidates = []
    for start in starts:
        start = np.asarray(start, float)
        if start.shape != (config.max_rounds,):
            raise InvalidArgumentError(f"start {start!r} has the wrong length")
        if np.any(start < 0) or not np.all(np.isfinite(start)):
            raise InvalidArgumentError(f"start {start!r} must be finite and nonnegative")
        raw = np.maximum(np.log(np.maximum(start, 1e-300)), LOG_POWER_FLOOR)
        u0 = _interior(problem, start, opts.interior_margin)
        run = _run_barrier(problem, u0, opts)
        for u in (raw, u0, run.u):
            powers = _finalize_powers(u)
            prof = problem.profile(powers)
            if prof.avg_energy <= budget + 1e-8:
                candidates.append(
                    (prof.final_outage, tuple(powers.tolist()), prof.avg_energy, u is run.u, run)
                )

    if not candidates:
        raise InvalidArgumentError("no feasible candidate found")
    candidates.sort(key=lambda item: (item[0], item[1]))
    outage, powers, energy, from_run, run = candidates[0]
    if from_run:
        residual = run.residual
    else:
        residual = kkt_residual_exact(problem, np.log(np.maximum(powers, 1e-300)))
    converged = residual <= opts.kkt_tol
    if not converged:
        logger.warning(
            "exact solve did not reach the KKT tolerance (best residual %.3e)", residual
        )
    return SolverReport(
        method=Method.EXACT,
        config=config,
        schedule=PowerSchedule(powers),
        objective=outage,
        avg_energy=energy,
        kkt_residual=residual,
        evaluations=problem.evaluations,
        converged=converged,
        starts_tried=len(starts),
    )
