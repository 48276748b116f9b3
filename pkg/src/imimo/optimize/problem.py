"""The exact power-allocation problem in log-power coordinates.

Variables are ``u_l = ln P_l``. The objective is ``F(u) = ln p_out,L`` and
the constraint is ``c(u) = E_avg(u) / E_given - 1 <= 0``; both come from a
single outage-profile evaluation. The log of the outage keeps the
objective well scaled from 1e-1 down to 1e-300.
"""
from __future__ import annotations

import math

import numpy as np

from ..model import OutageMethod, PowerSchedule, SystemConfig
from ..outage import NESTED_ORDER, outage_profile

LOG_POWER_FLOOR = math.log(1e-12)
ZERO_POWER = 1e-9


def fd_step(u):
    return 1e-5 * np.maximum(1.0, np.abs(u))


class Problem:
    """Caching evaluator of (F, c) for one configuration."""

    def __init__(self, config: SystemConfig, method=OutageMethod.EXACT, order: int = NESTED_ORDER):
        self.config = config
        self.method = OutageMethod.parse(method)
        self.order = order
        self.evaluations = 0
        self._cache = {}

    def powers(self, u):
        return np.exp(np.maximum(np.asarray(u, float), LOG_POWER_FLOOR))

    def profile(self, powers):
        self.evaluations += 1
        return outage_profile(self.config, PowerSchedule(tuple(powers)), self.method, self.order)

    def __call__(self, u):
        """Return (F, c) at ``u``."""
        key = tuple(np.asarray(u, float).tolist())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        prof = self.profile(self.powers(u))
        p = prof.final_outage
        f = math.log(p) if p > 0 else -math.inf
        c = prof.avg_energy / self.config.energy_budget - 1.0
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = (f, c)
        return f, c

    def gradients(self, u):
        """Central-difference gradients of F and c."""
        u = np.asarray(u, float)
        h = fd_step(u)
        gf = np.empty(u.size)
        gc = np.empty(u.size)
        for i in range(u.size):
            e = np.zeros(u.size)
            e[i] = h[i]
            fp, cp = self(u + e)
            fm, cm = self(u - e)
            gf[i] = (fp - fm) / (2 * h[i])
            gc[i] = (cp - cm) / (2 * h[i])
        return gf, gc

    def derivatives(self, u):
        """Gradients and Hessians of F and c from function values."""
        u = np.asarray(u, float)
        n = u.size
        h = fd_step(u)
        f0, c0 = self(u)
        gf, gc = self.gradients(u)
        hf = np.empty((n, n))
        hc = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h[i]
            fp, cp = self(u + e)
            fm, cm = self(u - e)
            hf[i, i] = (fp - 2 * f0 + fm) / h[i] ** 2
            hc[i, i] = (cp - 2 * c0 + cm) / h[i] ** 2
            for j in range(i + 1, n):
                d = np.zeros(n)
                d[j] = h[j]
                fpp, cpp = self(u + e + d)
                fpm, cpm = self(u + e - d)
                fmp, cmp_ = self(u - e + d)
                fmm, cmm = self(u - e - d)
                hf[i, j] = hf[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
                hc[i, j] = hc[j, i] = (cpp - cpm - cmp_ + cmm) / (4 * h[i] * h[j])
        return (f0, c0), (gf, gc), (hf, hc)


def kkt_residual_exact(problem: Problem, u) -> float:
    """First-order residual of the log-coordinate problem at ``u``.

    The multiplier nu >= 0 minimizes ||grad F + nu grad c|| over the free
    coordinates; the residual is that stationarity norm (max-norm) plus the
    slackness |nu c|. Coordinates sitting on the power floor only count
    when the Lagrangian gradient points further down.
    """
    u = np.maximum(np.asarray(u, float), LOG_POWER_FLOOR)
    _, c = problem(u)
    gf, gc = problem.gradients(u)
    free = u > LOG_POWER_FLOOR + 1e-9
    denom = float(gc[free] @ gc[free])
    nu = max(0.0, -float(gf[free] @ gc[free]) / denom) if denom > 0 else 0.0
    r = gf + nu * gc
    r[~free] = np.minimum(r[~free], 0.0)
    return float(np.max(np.abs(r)) + abs(nu * c))
