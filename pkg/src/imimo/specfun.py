"""Special functions and Gauss-Legendre quadrature.

Everything here is pure; cached rules are returned as read-only arrays so
they can be shared between threads.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalDomainError

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "lower_gamma_regularized",
    "log_gamma",
    "integrate_01",
    "MAX_ORDER",
]

MAX_ORDER = 4096

_EPS = np.finfo(float).eps
_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def mapped_01(self):
        """Nodes and weights affinely mapped onto [0, 1]."""
        return 0.5 * (self.nodes + 1.0), 0.5 * self.weights


def gauss_legendre(order: int) -> QuadratureRule:
    """Return the Gauss-Legendre rule with ``order`` points.

    Nodes come from Newton iteration on the three-term Legendre recurrence
    started at the usual cosine guesses. Rules are cached per order.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise InvalidArgumentError(f"order must be an integer, got {order!r}")
    if not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"order must lie in [1, {MAX_ORDER}], got {order}")
    return _cached_rule(int(order))


@functools.lru_cache(maxsize=None)
def _cached_rule(n: int) -> QuadratureRule:
    nodes, weights = _legendre_newton(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order=n, nodes=nodes, weights=weights)


def _legendre_p_and_dp(n, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def _legendre_newton(n):
    m = (n + 1) // 2
    i = np.arange(1, m + 1)
    # positive half, descending
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(30):
        p, dp = _legendre_p_and_dp(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= 4 * _EPS:
            break
    p, dp = _legendre_p_and_dp(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    nodes = np.empty(n)
    weights = np.empty(n)
    nodes[:m] = -x
    weights[:m] = w
    nodes[n - m:] = x[::-1]
    weights[n - m:] = w[::-1]
    if n % 2:
        nodes[m - 1] = 0.0
    return nodes, weights


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    if not math.isfinite(x) or x <= 0:
        raise InvalidArgumentError(f"log_gamma needs a finite positive argument, got {x!r}")
    return math.lgamma(x)


def lower_gamma_regularized(shape, x):
    """Regularized lower incomplete gamma P(shape, x).

    Uses the power series below ``x = shape + 1`` and the Lentz continued
    fraction for the upper tail above it. Accepts scalars or arrays for
    ``x``; returns a float for scalar input.
    """
    a = float(shape)
    if not math.isfinite(a) or a <= 0:
        raise InvalidArgumentError(f"shape must be finite and positive, got {shape!r}")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise InvalidArgumentError("x must be finite")
    if np.any(xa < 0):
        raise InvalidArgumentError("x must be nonnegative")

    out = np.zeros(xa.shape)
    use_series = (xa < a + 1.0) & (xa > 0)
    use_cf = xa >= a + 1.0
    if np.any(use_series):
        out[use_series] = _gamma_series(a, xa[use_series])
    if np.any(use_cf):
        out[use_cf] = 1.0 - _gamma_cf(a, xa[use_cf])
    np.clip(out, 0.0, 1.0, out=out)
    if out.ndim == 0:
        return float(out)
    return out


def _log_prefactor(a, x):
    return a * np.log(x) - x - math.lgamma(a)


def _gamma_series(a, x):
    term = np.full(x.shape, 1.0 / a)
    total = term.copy()
    ap = a
    active = np.ones(x.shape, dtype=bool)
    max_iter = 200 + int(20 * math.sqrt(a))
    for _ in range(max_iter):
        ap += 1.0
        term = np.where(active, term * x / ap, 0.0)
        total += term
        active &= np.abs(term) > np.abs(total) * _EPS
        if not active.any():
            break
    return total * np.exp(_log_prefactor(a, x))


def _gamma_cf(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = np.full(x.shape, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, 1000):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h = h * delta
        active &= np.abs(delta - 1.0) > _EPS
        if not active.any():
            break
    return np.exp(_log_prefactor(a, x)) * h


def integrate_01(f, rule: QuadratureRule) -> float:
    """Approximate the integral of ``f`` over [0, 1] with ``rule``.

    ``f`` is called once on the array of mapped nodes and must return an
    array of the same length.
    """
    t, w = rule.mapped_01()
    values = np.asarray(f(t), dtype=float)
    if values.shape != t.shape:
        values = np.broadcast_to(values, t.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalDomainError(
            f"integrand is not finite at node {idx} (t={t[idx]!r})", node_index=idx
        )
    return float(np.dot(w, values))
