"""Seeded Monte Carlo oracle for per-round outage and average energy.

Trials are split into fixed blocks of 2**16. Each block draws from its own
Philox stream keyed by a hash of ``(seed, block_index)``, and blocks report
integer failure tallies, so the estimates do not depend on how blocks are
spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model import PowerSchedule, Scheme, SystemConfig

__all__ = ["SimSpec", "SimResult", "simulate", "gamma_sample", "block_stream", "BLOCK_SIZE"]

BLOCK_SIZE = 1 << 16
MAX_TRIALS = 1 << 40


@dataclass(frozen=True)
class SimSpec:
    config: SystemConfig
    schedule: PowerSchedule
    trials: int
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.schedule, PowerSchedule):
            object.__setattr__(self, "schedule", PowerSchedule.of(self.schedule))
        self.schedule.check_for(self.config)
        if isinstance(self.trials, bool) or not isinstance(self.trials, (int, np.integer)):
            raise InvalidArgumentError(f"trials must be an integer, got {self.trials!r}")
        if not 1 <= self.trials <= MAX_TRIALS:
            raise InvalidArgumentError(f"trials must lie in [1, 2**40], got {self.trials}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 1 << 64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if isinstance(self.workers, bool) or not isinstance(self.workers, (int, np.integer)) or self.workers < 1:
            raise InvalidArgumentError(f"workers must be a positive integer, got {self.workers!r}")


@dataclass(frozen=True)
class SimResult:
    per_round_outage_estimate: tuple
    per_round_std_error: tuple
    avg_energy_estimate: float
    trials_used: int
    failure_counts: tuple


def block_stream(seed: int, block_index: int) -> np.random.Generator:
    """Generator for one trial block, derived from (seed, block_index) only."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, dtype=np.uint64)))


def gamma_sample(shape: int, stream: np.random.Generator, size=None):
    """Gamma(N, 1) draws as the sum of N unit exponentials, -sum log U."""
    if isinstance(shape, bool) or not isinstance(shape, (int, np.integer)) or shape < 1:
        raise InvalidArgumentError(f"shape must be a positive integer, got {shape!r}")
    if size is None:
        u = stream.random(shape)
        return float(-np.log1p(-u).sum())
    dims = (size,) if np.isscalar(size) else tuple(size)
    u = stream.random(dims + (shape,))
    return -np.log1p(-u).sum(axis=-1)


def _failures(scheme, powers, gains, rate):
    snr = gains * powers
    if scheme is Scheme.ARQ:
        fail = np.logical_and.accumulate(snr < math.expm1(rate * math.log(2.0)), axis=1)
    elif scheme is Scheme.CC_HARQ:
        fail = np.cumsum(snr, axis=1) < math.expm1(rate * math.log(2.0))
    else:
        fail = np.cumsum(np.log1p(snr), axis=1) < rate * math.log(2.0)
    return fail.sum(axis=0, dtype=np.int64)


def _run_block(spec: SimSpec, block: int):
    start = block * BLOCK_SIZE
    n = min(BLOCK_SIZE, spec.trials - start)
    rng = block_stream(spec.seed, block)
    cfg = spec.config
    gains = gamma_sample(cfg.num_rx, rng, (n, cfg.max_rounds))
    return _failures(cfg.scheme, spec.schedule.as_array(), gains, cfg.rate)


def simulate(spec: SimSpec) -> SimResult:
    """Estimate per-round outage and average energy for ``spec``."""
    n_blocks = -(-spec.trials // BLOCK_SIZE)
    blocks = range(n_blocks)
    if spec.workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            tallies = list(pool.map(lambda b: _run_block(spec, b), blocks))
    else:
        tallies = [_run_block(spec, b) for b in blocks]
    counts = np.sum(tallies, axis=0, dtype=np.int64)

    n = spec.trials
    p_hat = counts / n
    std = np.sqrt(p_hat * (1.0 - p_hat) / n)
    powers = spec.schedule.powers
    energy = powers[0] + sum(powers[l] * counts[l - 1] / n for l in range(1, len(powers)))
    return SimResult(
        per_round_outage_estimate=tuple(float(x) for x in p_hat),
        per_round_std_error=tuple(float(x) for x in std),
        avg_energy_estimate=float(energy),
        trials_used=int(n),
        failure_counts=tuple(int(c) for c in counts),
    )
