"""Budget sweeps driven by a flat key=value config file.

Config format, one ``key = value`` per line, ``#`` starts a comment::

    schemes     = [arq, cc, ir]
    methods     = [exact, gpp, epa]
    n           = 2
    l           = 2
    rate        = 2
    budgets_db  = 10:30:0.5        # start:stop:step, stop included
    output      = sweep.csv

Lists are written ``[a, b, c]``; a bare value is a one-element list where a
list is expected. Unknown or repeated keys are rejected.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InvalidArgumentError, UnsupportedDimensionError
from .model import Scheme, SystemConfig, db_to_linear
from .optimize import Method, SolverReport, solve
from .outage import MAX_NESTED_ROUNDS

__all__ = ["SweepSpec", "ResultRow", "parse_sweep_config", "run_sweep", "write_csv", "csv_header",
           "default_threads", "format_number", "THREADS_ENV"]

THREADS_ENV = "IMIMO_THREADS"

_REQUIRED = ("n", "l", "rate", "budgets_db")
_DEFAULTS = {
    "schemes": "[arq, cc, ir]",
    "methods": "[exact, gpp, epa]",
    "num_tx": None,
    "arq_coefficient": "series",
    "seed": "0",
    "starts": "8",
    "output": None,
}
_KEYS = set(_REQUIRED) | set(_DEFAULTS)


def format_number(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise InvalidArgumentError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


@dataclass(frozen=True)
class SweepSpec:
    template: SystemConfig  # energy_budget is replaced per point
    budget_grid_db: tuple
    methods: tuple
    schemes: tuple
    output: str | None = None
    seed: int = 0
    n_perturbed: int = 8

    def __post_init__(self):
        if not self.methods or not self.schemes:
            raise InvalidArgumentError("methods and schemes must be nonempty")
        if not self.budget_grid_db:
            raise InvalidArgumentError("the budget grid is empty")
        grid = self.budget_grid_db
        if any(not math.isfinite(b) for b in grid):
            raise InvalidArgumentError("budget grid values must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidArgumentError("the budget grid must be strictly increasing")
        if len(set(self.methods)) != len(self.methods) or len(set(self.schemes)) != len(self.schemes):
            raise InvalidArgumentError("methods and schemes must not repeat")
        if (
            Scheme.IR_HARQ in self.schemes
            and Method.EXACT in self.methods
            and self.template.max_rounds > MAX_NESTED_ROUNDS
        ):
            raise UnsupportedDimensionError(
                f"exact IR-HARQ solves are limited to L <= {MAX_NESTED_ROUNDS}; "
                f"got L = {self.template.max_rounds}"
            )

    def points(self):
        """(scheme, method, budget_db) in output order."""
        return [(s, m, b) for s in self.schemes for m in self.methods for b in self.budget_grid_db]


@dataclass(frozen=True)
class ResultRow:
    scheme: Scheme
    method: Method
    budget_db: float
    p_out_L: float
    avg_energy: float
    kkt_residual: float
    converged: bool
    powers: tuple = field(default=())

    def as_csv(self) -> list:
        return [
            self.scheme.value,
            self.method.value,
            format_number(self.budget_db),
            format_number(self.p_out_L),
            format_number(self.avg_energy),
            format_number(self.kkt_residual),
            format_number(self.converged),
            *(format_number(p) for p in self.powers),
        ]


def csv_header(rounds: int) -> list:
    return ["scheme", "method", "budget_db", "p_out_L", "avg_energy", "kkt_residual", "converged",
            *(f"P{i}" for i in range(1, rounds + 1))]


def _split_list(raw: str) -> list:
    raw = raw.strip()
    if raw.startswith("["):
        if not raw.endswith("]"):
            raise InvalidArgumentError(f"unterminated list {raw!r}")
        raw = raw[1:-1]
    items = [item.strip() for item in raw.split(",")]
    if any(not item for item in items):
        raise InvalidArgumentError(f"empty list item in {raw!r}")
    return items


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise InvalidArgumentError(f"{key}: expected a number, got {text!r}") from None


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise InvalidArgumentError(f"{key}: expected an integer, got {text!r}") from None


def _parse_grid(raw: str) -> tuple:
    raw = raw.strip()
    if ":" in raw and not raw.startswith("["):
        parts = raw.split(":")
        if len(parts) != 3:
            raise InvalidArgumentError(f"budgets_db range must be start:stop:step, got {raw!r}")
        start, stop, step = (_parse_float("budgets_db", p) for p in parts)
        if step <= 0 or stop < start:
            raise InvalidArgumentError(f"bad budgets_db range {raw!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round away the drift of repeated addition
        return tuple(round(start + i * step, 12) for i in range(count))
    return tuple(_parse_float("budgets_db", item) for item in _split_list(raw))


def parse_sweep_config(text: str, output: str | None = None) -> SweepSpec:
    """Parse config text; ``output`` overrides the file's ``output`` key."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise InvalidArgumentError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise InvalidArgumentError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise InvalidArgumentError(f"missing required keys: {', '.join(missing)}")
    for key, default in _DEFAULTS.items():
        values.setdefault(key, default)

    num_tx = values["num_tx"]
    template = SystemConfig(
        scheme=Scheme.ARQ,
        num_rx=_parse_int("n", values["n"]),
        max_rounds=_parse_int("l", values["l"]),
        rate=_parse_float("rate", values["rate"]),
        num_tx=None if num_tx is None else _parse_int("num_tx", num_tx),
        arq_coefficient=values["arq_coefficient"].strip(),
    )
    return SweepSpec(
        template=template,
        budget_grid_db=_parse_grid(values["budgets_db"]),
        methods=tuple(Method.parse(m) for m in _split_list(values["methods"])),
        schemes=tuple(Scheme.parse(s) for s in _split_list(values["schemes"])),
        output=output if output is not None else values["output"],
        seed=_parse_int("seed", values["seed"]),
        n_perturbed=_parse_int("starts", values["starts"]),
    )


def _solve_point(spec: SweepSpec, scheme, method, budget_db) -> SolverReport:
    config = spec.template.with_scheme(scheme).with_budget(db_to_linear(budget_db))
    if method is Method.EXACT:
        return solve(config, method, seed=spec.seed, n_perturbed=spec.n_perturbed)
    return solve(config, method)


def run_sweep(
    spec: SweepSpec,
    threads: int = 1,
    solver: Callable[..., SolverReport] = _solve_point,
) -> list:
    """Solve every point; rows come back in (scheme, method, budget) order."""
    points = spec.points()

    def work(point):
        scheme, method, budget_db = point
        report = solver(spec, scheme, method, budget_db)
        return ResultRow(
            scheme=scheme,
            method=method,
            budget_db=budget_db,
            p_out_L=report.objective,
            avg_energy=report.avg_energy,
            kkt_residual=report.kkt_residual,
            converged=report.converged,
            powers=tuple(report.schedule.powers),
        )

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, points))
    return [work(p) for p in points]


def write_csv(rows: Sequence[ResultRow], rounds: int, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(rounds))
    for row in rows:
        writer.writerow(row.as_csv())
