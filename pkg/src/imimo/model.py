"""Configuration and result types shared across the package."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Scheme",
    "OutageMethod",
    "SystemConfig",
    "PowerSchedule",
    "OutageProfile",
    "snr_threshold",
    "jensen_threshold",
    "db_to_linear",
    "linear_to_db",
]


class Scheme(str, enum.Enum):
    ARQ = "arq"
    CC_HARQ = "cc"
    IR_HARQ = "ir"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "arq": cls.ARQ,
            "cc": cls.CC_HARQ,
            "cc_harq": cls.CC_HARQ,
            "ir": cls.IR_HARQ,
            "ir_harq": cls.IR_HARQ,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidArgumentError(f"unknown scheme {value!r}") from None


class OutageMethod(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown outage method {value!r}") from None


def snr_threshold(rate: float) -> float:
    """Z = 2^R - 1."""
    return math.expm1(rate * math.log(2.0))


def jensen_threshold(rounds: int, rate: float) -> float:
    """Y(l) = l (2^{R/l} - 1); equals ``snr_threshold(rate)`` for one round."""
    return rounds * math.expm1(rate * math.log(2.0) / rounds)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _positive_real(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise InvalidArgumentError(f"{name} must be finite and positive, got {value!r}")
    return v


@dataclass(frozen=True)
class SystemConfig:
    """System parameters for one IMIMO link.

    ``num_tx`` defaults to ``max_rounds``. ``arq_coefficient`` selects the
    ARQ asymptotic coefficient: ``"series"`` uses Gamma(N+1)^l, ``"power"``
    uses N^l (the two agree for N in {1, 2}).
    """

    scheme: Scheme
    num_rx: int
    max_rounds: int
    rate: float
    energy_budget: float = 1.0
    num_tx: int | None = None
    symbols_per_round: int = 1
    arq_coefficient: str = "series"

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "num_rx", _positive_int("num_rx", self.num_rx))
        object.__setattr__(self, "max_rounds", _positive_int("max_rounds", self.max_rounds))
        object.__setattr__(self, "rate", _positive_real("rate", self.rate))
        object.__setattr__(
            self, "energy_budget", _positive_real("energy_budget", self.energy_budget)
        )
        num_tx = self.max_rounds if self.num_tx is None else self.num_tx
        object.__setattr__(self, "num_tx", _positive_int("num_tx", num_tx))
        object.__setattr__(
            self, "symbols_per_round", _positive_int("symbols_per_round", self.symbols_per_round)
        )
        if self.max_rounds > self.num_tx:
            raise InvalidArgumentError(
                f"max_rounds ({self.max_rounds}) must not exceed num_tx ({self.num_tx})"
            )
        if self.arq_coefficient not in ("series", "power"):
            raise InvalidArgumentError(
                f"arq_coefficient must be 'series' or 'power', got {self.arq_coefficient!r}"
            )

    @property
    def threshold(self) -> float:
        return snr_threshold(self.rate)

    def with_budget(self, energy_budget: float) -> "SystemConfig":
        return replace(self, energy_budget=energy_budget)

    def with_rate(self, rate: float) -> "SystemConfig":
        return replace(self, rate=rate)

    def with_scheme(self, scheme) -> "SystemConfig":
        return replace(self, scheme=Scheme.parse(scheme))


@dataclass(frozen=True)
class PowerSchedule:
    """Per-round power scaling factors P_1..P_L (linear, noise-normalized)."""

    powers: tuple

    def __post_init__(self):
        try:
            p = tuple(float(x) for x in self.powers)
        except (TypeError, ValueError):
            raise InvalidArgumentError(f"powers must be real numbers, got {self.powers!r}") from None
        if not p:
            raise InvalidArgumentError("a schedule needs at least one round")
        for x in p:
            if not math.isfinite(x) or x < 0:
                raise InvalidArgumentError(f"powers must be finite and nonnegative, got {p}")
        object.__setattr__(self, "powers", p)

    @classmethod
    def of(cls, powers: Sequence[float]) -> "PowerSchedule":
        return cls(tuple(powers))

    @classmethod
    def equal(cls, power: float, rounds: int) -> "PowerSchedule":
        return cls((float(power),) * rounds)

    def __len__(self):
        return len(self.powers)

    def __getitem__(self, i):
        return self.powers[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.powers)

    def scaled(self, factor: float) -> "PowerSchedule":
        return PowerSchedule(tuple(factor * x for x in self.powers))

    def check_for(self, config: SystemConfig):
        if len(self.powers) != config.max_rounds:
            raise InvalidArgumentError(
                f"schedule has {len(self.powers)} powers but max_rounds is {config.max_rounds}"
            )
        return self


@dataclass(frozen=True)
class OutageProfile:
    """Cumulative outage after each round plus the normalized average energy."""

    per_round_outage: tuple
    avg_energy: float
    method: OutageMethod
    powers: tuple = field(default=(), compare=False)
    symbols_per_round: int = 1

    @property
    def final_outage(self) -> float:
        return self.per_round_outage[-1]

    @property
    def energy_per_packet(self) -> float:
        """E_avg = T * avg_energy."""
        return self.symbols_per_round * self.avg_energy
