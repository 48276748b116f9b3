"""Rate-outage probabilities and average energy for IMIMO with ARQ, CC-HARQ
and IR-HARQ over Rayleigh block fading.

The channel gain of round k is ``g_k ~ Gamma(N, 1)`` and a round-l outage is

* ARQ:  every ``log2(1 + P_k g_k) < R`` for k <= l
* CC:   ``log2(1 + sum_k P_k g_k) < R``
* IR:   ``sum_k log2(1 + P_k g_k) < R``

The exact CC and IR evaluators integrate the gains one round at a time over
the bounded region that can still end in outage, mapped onto [0, 1] and
integrated by Gauss-Legendre; the last round is closed by the regularized
incomplete gamma function. The integrand carries the outage value as a
product of positive factors, so relative accuracy survives down to the
underflow range.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .errors import InvalidArgumentError, UnsupportedDimensionError
from .model import (
    OutageMethod,
    OutageProfile,
    PowerSchedule,
    Scheme,
    SystemConfig,
    jensen_threshold,
)
from .specfun import gauss_legendre, integrate_01, lower_gamma_regularized

__all__ = [
    "ARQ_ORDER",
    "GIL_PELAEZ_ORDER",
    "NESTED_ORDER",
    "MAX_NESTED_ROUNDS",
    "arq_outage_exact",
    "arq_outage_quadrature",
    "cc_outage_exact",
    "cc_outage_gil_pelaez",
    "ir_outage_exact",
    "ir_q_kernel",
    "ir_outage_convolution",
    "ir_jensen_bound",
    "outage_asymptotic",
    "outage_exact",
    "outage_profile",
    "average_energy",
    "asymptotic_coefficient",
    "asymptotic_coefficients",
]

logger = logging.getLogger(__name__)

ARQ_ORDER = 1024
GIL_PELAEZ_ORDER = 512
NESTED_ORDER = 256
MAX_NESTED_ROUNDS = 3

_CLAMP_LOG_THRESHOLD = 1e-9


def _clamp(p, what="outage"):
    if p < 0.0 or p > 1.0:
        excess = -p if p < 0.0 else p - 1.0
        if excess >= _CLAMP_LOG_THRESHOLD:
            logger.warning("%s value %.3e clamped to [0, 1]", what, p)
        return min(max(p, 0.0), 1.0)
    return p


def _validated(config: SystemConfig, schedule, rounds=None):
    if not isinstance(schedule, PowerSchedule):
        schedule = PowerSchedule.of(schedule)
    schedule.check_for(config)
    if rounds is None:
        rounds = config.max_rounds
    if isinstance(rounds, bool) or not isinstance(rounds, (int, np.integer)):
        raise InvalidArgumentError(f"rounds must be an integer, got {rounds!r}")
    if not 1 <= rounds <= config.max_rounds:
        raise InvalidArgumentError(
            f"rounds must lie in [1, {config.max_rounds}], got {rounds}"
        )
    return schedule, int(rounds)


# ---------------------------------------------------------------------------
# ARQ
# ---------------------------------------------------------------------------


def _arq_round_terms(config, powers):
    N = config.num_rx
    z = config.threshold
    terms = []
    for p in powers:
        # a silent round always fails
        terms.append(1.0 if p == 0.0 else lower_gamma_regularized(N, z / p))
    return terms


def arq_outage_exact(config: SystemConfig, schedule, rounds: int) -> float:
    """Product of per-round gamma CDFs, prod_k P(N, Z / P_k)."""
    schedule, rounds = _validated(config, schedule, rounds)
    return _clamp(math.prod(_arq_round_terms(config, schedule.powers[:rounds])))


def arq_outage_quadrature(
    config: SystemConfig, schedule, rounds: int, order: int = ARQ_ORDER
) -> float:
    """ARQ outage with each gamma CDF written as a Gauss-Legendre sum.

    Round k contributes ``Z_k^N / Gamma(N) * int_0^1 t^(N-1) exp(-t Z_k) dt``.
    """
    schedule, rounds = _validated(config, schedule, rounds)
    N = config.num_rx
    rule = gauss_legendre(order)
    lg = math.lgamma(N)
    total = 1.0
    for p in schedule.powers[:rounds]:
        if p == 0.0:
            continue
        zk = config.threshold / p
        integral = integrate_01(lambda t: t ** (N - 1) * np.exp(-t * zk), rule)
        total *= math.exp(N * math.log(zk) - lg) * integral
    return _clamp(total)


# ---------------------------------------------------------------------------
# nested quadrature shared by CC and IR
# ---------------------------------------------------------------------------


def _gain_cap(N):
    """Gain beyond which the Gamma(N, 1) tail is below ~1e-18."""
    return 45.0 + 2.5 * N


def _nested_outages(N, powers, threshold, accumulate, order):
    """Outage after each round for the given ``powers``.

    ``threshold`` is the initial SNR slack s (Z for CC, Y(l) for the Jensen
    bound, 2^R - 1 for IR). Round k's gain is integrated over [0, s / P_k],
    truncated at a gain whose tail mass is negligible: the conditional
    outage decreases in the gain, so the truncation error relative to the
    result is at most that tail mass. ``accumulate`` maps (s, f, 1 - f) to
    the slack left once a fraction f of it is used up by that round.
    """
    rule = gauss_legendre(order)
    t, w = rule.mapped_01()
    one_minus_t = t[::-1]  # exact by node symmetry
    t_pow = w * t ** (N - 1)
    lg = math.lgamma(N)
    cap = _gain_cap(N)

    slack = np.array([threshold], dtype=float)
    mass = np.array([1.0])
    out = []
    for k, p in enumerate(powers):
        last = k == len(powers) - 1
        if p == 0.0:
            out.append(_clamp(float(mass.sum())))
            continue
        bound = slack / p
        out.append(_clamp(float(np.dot(mass, lower_gamma_regularized(N, bound)))))
        if last:
            break
        span = np.minimum(bound, cap)[:, None]
        ratio = span / bound[:, None]
        # gain g = span * t has density span^N t^(N-1) e^(-span t) / Gamma(N)
        factor = np.exp(N * np.log(span) - span * t[None, :] - lg)
        mass = (mass[:, None] * factor * t_pow[None, :]).ravel()
        used = t[None, :] * ratio
        left = one_minus_t[None, :] + t[None, :] * (1.0 - ratio)
        slack = accumulate(slack[:, None], used, left).ravel()
    return out


def _cc_accumulate(s, t, one_minus_t):
    return s * one_minus_t


def _ir_accumulate(s, t, one_minus_t):
    # prod (1 + P_k g_k) < 2^R; s = remaining ratio minus one
    return s * one_minus_t / (1.0 + s * t)


def _check_nested_rounds(rounds, scheme_name):
    if rounds > MAX_NESTED_ROUNDS:
        raise UnsupportedDimensionError(
            f"{scheme_name} nested quadrature supports at most {MAX_NESTED_ROUNDS} rounds "
            f"(got {rounds}); use the Monte Carlo simulator for longer schedules"
        )


def cc_outage_exact(
    config: SystemConfig, schedule, rounds: int, order: int = NESTED_ORDER
) -> float:
    """CC-HARQ outage Pr{sum_k P_k g_k < Z}.

    Up to three rounds are integrated by nested quadrature; longer schedules
    fall back to the Gil-Pelaez integral, which is accurate there because
    the characteristic function decays like x^(-lN).
    """
    schedule, rounds = _validated(config, schedule, rounds)
    if rounds > MAX_NESTED_ROUNDS:
        return cc_outage_gil_pelaez(config, schedule, rounds)
    return _nested_outages(
        config.num_rx, schedule.powers[:rounds], config.threshold, _cc_accumulate, order
    )[-1]


def cc_outage_gil_pelaez(
    config: SystemConfig,
    schedule,
    rounds: int,
    order: int = GIL_PELAEZ_ORDER,
    scale: float | None = None,
    threshold: float | None = None,
) -> float:
    """CC-HARQ outage from the sine-kernel (Gil-Pelaez) inversion integral.

    The half-line is mapped to [0, 1] by ``x = t / (scale * (1 - t))``.
    ``scale=1`` is the plain substitution; the default uses the geometric
    mean of the active powers so the kernel's transition sits mid-interval.
    The result has an absolute error floor, so it cannot resolve outage
    values much below ~1e-12.
    """
    schedule, rounds = _validated(config, schedule, rounds)
    N = config.num_rx
    z = config.threshold if threshold is None else float(threshold)
    powers = np.array(schedule.powers[:rounds])
    if scale is None:
        active = powers[powers > 0]
        scale = float(np.exp(np.mean(np.log(active)))) if active.size else 1.0
    rule = gauss_legendre(order)

    def kernel(t):
        x = t / (scale * (1.0 - t))
        xp = np.outer(x, powers)
        phase = N * np.arctan(xp).sum(axis=1) - z * x
        log_amp = 0.5 * N * np.log1p(xp * xp).sum(axis=1)
        return np.sin(phase) * np.exp(-log_amp) / (t - t * t)

    return _clamp(0.5 - integrate_01(kernel, rule) / math.pi)


def ir_outage_exact(
    config: SystemConfig, schedule, rounds: int, order: int = NESTED_ORDER
) -> float:
    """IR-HARQ outage Pr{sum_k log2(1 + P_k g_k) < R} by nested quadrature."""
    schedule, rounds = _validated(config, schedule, rounds)
    _check_nested_rounds(rounds, "IR-HARQ")
    return _nested_outages(
        config.num_rx, schedule.powers[:rounds], config.threshold, _ir_accumulate, order
    )[-1]


def ir_jensen_bound(
    config: SystemConfig, schedule, rounds: int, order: int = NESTED_ORDER
) -> float:
    """Lower bound on IR outage: CC outage at threshold Y(l) = l(2^(R/l) - 1)."""
    schedule, rounds = _validated(config, schedule, rounds)
    y = jensen_threshold(rounds, config.rate)
    if rounds > MAX_NESTED_ROUNDS:
        return cc_outage_gil_pelaez(config, schedule, rounds, threshold=y)
    return _nested_outages(
        config.num_rx, schedule.powers[:rounds], y, _cc_accumulate, order
    )[-1]


def ir_q_kernel(k: int, t, config: SystemConfig, schedule, corrected: bool = False):
    """Per-round kernels whose convolution gives the IR outage transform g_l.

    ``k == 1``: ``-e^t (1 - P(N, (e^-t - 1)/P_1))`` for t < 0 and ``-e^t``
    for t > 0. ``k >= 2``: ``(e^-t - 1)^(N-1) exp(t + (1 - e^-t)/P_k)
    / (P_k^N Gamma(N))`` for t < 0 and zero otherwise.

    With ``corrected=True`` the k >= 2 kernels drop the leading ``e^t``:
    inverting ``E[(1 + P_k g)^(s-1)]`` leaves the delta function's Jacobian
    ``1 + r``, which cancels it. Only the corrected kernels convolve to the
    outage probability.
    """
    schedule = PowerSchedule.of(schedule) if not isinstance(schedule, PowerSchedule) else schedule
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= len(schedule):
        raise InvalidArgumentError(f"round index must lie in [1, {len(schedule)}], got {k!r}")
    p = schedule.powers[k - 1]
    if p <= 0:
        raise InvalidArgumentError(f"P_{k} must be positive for the kernel")
    ta = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(ta)):
        raise InvalidArgumentError("t must be finite")
    N = config.num_rx
    neg = ta < 0
    if k == 1:
        with np.errstate(over="ignore"):
            arg = np.where(neg, np.expm1(-np.where(neg, ta, 0.0)) / p, 0.0)
            survive = 1.0 - lower_gamma_regularized(N, arg)
            val = np.where(neg, -np.exp(ta) * survive, -np.exp(ta))
    else:
        tn = np.where(neg, ta, -1.0)
        r = np.expm1(-tn)
        log_val = (N - 1) * np.log(r) + tn - r / p - N * math.log(p) - math.lgamma(N)
        if corrected:
            log_val = log_val - tn
        val = np.where(neg, np.exp(log_val), 0.0)
    return float(val) if val.ndim == 0 else val


def ir_outage_convolution(
    config: SystemConfig, schedule, order: int = NESTED_ORDER, corrected: bool = True
) -> float:
    """Two-round IR outage as ``2^R g_2(-R ln 2) - g_2(0)``, g_2 = q_1 * q_2.

    The convolution integral over tau > s is taken in the variable
    ``r = exp(tau - s) - 1``, split where tau crosses zero (q_1 has a kink
    there); the tail uses ``r = r0 + P_2 v / (1 - v)``.
    """
    if config.max_rounds < 2:
        raise InvalidArgumentError("the convolution check needs at least two rounds")
    schedule, _ = _validated(config, schedule, 2)
    p2 = schedule.powers[1]
    rule = gauss_legendre(order)
    t, w = rule.mapped_01()

    def integrand(s, r):
        tau = s + np.log1p(r)
        q1 = ir_q_kernel(1, tau, config, schedule)
        q2 = ir_q_kernel(2, -np.log1p(r), config, schedule, corrected=corrected)
        return q1 * q2 / (1.0 + r)

    def g2(s):
        r0 = math.expm1(-s) if s < 0 else 0.0
        total = 0.0
        if r0 > 0:
            total += r0 * float(np.dot(w, integrand(s, r0 * t)))
        r = r0 + p2 * t / (1.0 - t)
        jac = p2 / (1.0 - t) ** 2
        total += float(np.dot(w, integrand(s, r) * jac))
        return total

    ln2r = config.rate * math.log(2.0)
    return _clamp(math.exp(ln2r) * g2(-ln2r) - g2(0.0))


# ---------------------------------------------------------------------------
# asymptotic leading terms
# ---------------------------------------------------------------------------


def asymptotic_coefficient(config: SystemConfig, rounds: int) -> float:
    """Leading-term coefficient W_l with ``outage ~ W_l / prod_k P_k^N``.

    W_0 = 1. ARQ: Z^(lN) / Gamma(N+1)^l (or Z^(lN) / N^l with
    ``arq_coefficient="power"``); CC: Z^(lN) / Gamma(lN+1);
    IR: Y(l)^(lN) / Gamma(lN+1).
    """
    if rounds == 0:
        return 1.0
    N = config.num_rx
    ln = rounds * N
    if config.scheme is Scheme.ARQ:
        if config.arq_coefficient == "power":
            log_den = rounds * math.log(N)
        else:
            log_den = rounds * math.lgamma(N + 1)
        return math.exp(ln * math.log(config.threshold) - log_den)
    if config.scheme is Scheme.CC_HARQ:
        return math.exp(ln * math.log(config.threshold) - math.lgamma(ln + 1))
    y = jensen_threshold(rounds, config.rate)
    return math.exp(ln * math.log(y) - math.lgamma(ln + 1))


def asymptotic_coefficients(config: SystemConfig) -> tuple:
    """(W_0, ..., W_L)."""
    return tuple(asymptotic_coefficient(config, l) for l in range(config.max_rounds + 1))


def outage_asymptotic(config: SystemConfig, schedule, rounds: int) -> float:
    """Leading asymptotic term W_l / prod_{k<=l} P_k^N.

    This is not clamped: at low power it can exceed one, and the GPP energy
    identity is stated for the raw term.
    """
    schedule, rounds = _validated(config, schedule, rounds)
    powers = schedule.powers[:rounds]
    if any(p == 0.0 for p in powers):
        return math.inf
    N = config.num_rx
    log_p = sum(math.log(p) for p in powers)
    return asymptotic_coefficient(config, rounds) * math.exp(-N * log_p)


# ---------------------------------------------------------------------------
# profiles and energy
# ---------------------------------------------------------------------------


def outage_exact(config: SystemConfig, schedule, rounds: int) -> float:
    """Dispatch to the scheme's exact evaluator."""
    if config.scheme is Scheme.ARQ:
        return arq_outage_exact(config, schedule, rounds)
    if config.scheme is Scheme.CC_HARQ:
        return cc_outage_exact(config, schedule, rounds)
    return ir_outage_exact(config, schedule, rounds)


def _exact_rounds(config, powers, order=NESTED_ORDER):
    if config.scheme is Scheme.ARQ:
        out, acc = [], 1.0
        for term in _arq_round_terms(config, powers):
            acc *= term
            out.append(_clamp(acc))
        return out
    if config.scheme is Scheme.IR_HARQ:
        _check_nested_rounds(len(powers), "IR-HARQ")
        return _nested_outages(config.num_rx, powers, config.threshold, _ir_accumulate, order)
    head = powers[:MAX_NESTED_ROUNDS]
    out = _nested_outages(config.num_rx, head, config.threshold, _cc_accumulate, order)
    for l in range(MAX_NESTED_ROUNDS + 1, len(powers) + 1):
        out.append(cc_outage_gil_pelaez(config, powers, l))
    return out


def outage_profile(
    config: SystemConfig, schedule, method=OutageMethod.EXACT, order: int = NESTED_ORDER
) -> OutageProfile:
    """Per-round cumulative outage and the normalized average energy."""
    method = OutageMethod.parse(method)
    schedule, L = _validated(config, schedule)
    powers = schedule.powers
    if method is OutageMethod.EXACT:
        per_round = _exact_rounds(config, powers, order)
    else:
        per_round = [outage_asymptotic(config, schedule, l) for l in range(1, L + 1)]
    energy = powers[0] + sum(powers[l] * per_round[l - 1] for l in range(1, L))
    return OutageProfile(
        per_round_outage=tuple(per_round),
        avg_energy=energy,
        method=method,
        powers=powers,
        symbols_per_round=config.symbols_per_round,
    )


def average_energy(config: SystemConfig, schedule, outage_method=OutageMethod.EXACT) -> float:
    """Normalized average energy per packet, P_1 + sum_{l>=2} P_l p_out,l-1."""
    return outage_profile(config, schedule, outage_method).avg_energy
