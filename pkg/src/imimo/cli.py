"""``imimo`` command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 optimizer did not
converge, 4 output not writable.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .errors import InvalidArgumentError, UnsupportedDimensionError
from .model import OutageMethod, PowerSchedule, Scheme, SystemConfig, db_to_linear
from .montecarlo import SimSpec, simulate
from .optimize import Method, solve
from .outage import MAX_NESTED_ROUNDS, outage_profile
from .sweep import default_threads, format_number, parse_sweep_config, run_sweep, write_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_UNWRITABLE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _powers(text: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed power list {text!r}") from None
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"powers must be finite and nonnegative: {text!r}")
    return values


def _system_flags(p: argparse.ArgumentParser, with_scheme=True):
    if with_scheme:
        p.add_argument("--scheme", required=True, help="arq, cc or ir")
    p.add_argument("--n", type=int, required=True, help="receive antennas N")
    p.add_argument("--l", type=int, required=True, help="maximum rounds L")
    p.add_argument("--rate", type=float, required=True, help="target rate R in bps/Hz")
    p.add_argument("--num-tx", type=int, default=None, help="transmit antennas (default L)")
    p.add_argument("--arq-coefficient", default="series", choices=("series", "power"))
    p.add_argument("--json", action="store_true", help="emit a JSON record")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imimo", description="IMIMO outage analysis and power allocation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("outage", help="per-round outage and average energy of a schedule")
    _system_flags(p)
    p.add_argument("--powers", type=_powers, required=True, help="comma-separated linear powers")
    p.add_argument("--method", default="exact", choices=("exact", "asymptotic"))

    p = sub.add_parser("optimize", help="power schedule for an energy budget")
    _system_flags(p)
    p.add_argument("--method", default="exact", choices=("exact", "gpp", "epa"))
    budget = p.add_mutually_exclusive_group(required=True)
    budget.add_argument("--energy", type=float, help="budget, linear")
    budget.add_argument("--energy-db", type=float, help="budget in dB")
    p.add_argument("--seed", type=int, default=0, help="multistart perturbation seed")
    p.add_argument("--starts", type=int, default=8, help="number of perturbed starts")

    p = sub.add_parser("sweep", help="budget sweep from a config file, written as CSV")
    p.add_argument("config", help="key=value sweep config")
    p.add_argument("--output", "-o", default=None, help="CSV path ('-' for stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")

    p = sub.add_parser("simulate", help="Monte Carlo outage estimate")
    _system_flags(p)
    p.add_argument("--powers", type=_powers, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    return parser


def _config(args, budget=1.0) -> SystemConfig:
    return SystemConfig(
        scheme=Scheme.parse(args.scheme),
        num_rx=args.n,
        max_rounds=args.l,
        rate=args.rate,
        energy_budget=budget,
        num_tx=args.num_tx,
        arq_coefficient=args.arq_coefficient,
    )


def _schedule(args) -> PowerSchedule:
    if len(args.powers) != args.l:
        raise InvalidArgumentError(
            f"got {len(args.powers)} powers but L = {args.l} rounds; the counts must match"
        )
    return PowerSchedule(args.powers)


def _emit(record: dict, as_json: bool, out) -> None:
    if as_json:
        json.dump(record, out, indent=None, allow_nan=True)
        out.write("\n")
        return
    for key, value in record.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(format_number(v) for v in value)
        elif isinstance(value, (int, float)):
            value = format_number(value)
        out.write(f"{key}={value}\n")


def _base_record(config: SystemConfig) -> dict:
    return {
        "scheme": config.scheme.value,
        "n": config.num_rx,
        "l": config.max_rounds,
        "rate": config.rate,
    }


def cmd_outage(args, out) -> int:
    config = _config(args)
    schedule = _schedule(args)
    prof = outage_profile(config, schedule, OutageMethod.parse(args.method))
    record = _base_record(config)
    record["method"] = prof.method.value
    record["powers"] = list(schedule.powers)
    for i, p in enumerate(prof.per_round_outage, 1):
        record[f"p_out_{i}"] = p
    record["avg_energy"] = prof.avg_energy
    _emit(record, args.json, out)
    return EXIT_OK


def cmd_optimize(args, out) -> int:
    budget = args.energy if args.energy is not None else db_to_linear(args.energy_db)
    if not (math.isfinite(budget) and budget > 0):
        raise InvalidArgumentError(f"energy budget must be positive, got {budget!r}")
    config = _config(args, budget)
    method = Method.parse(args.method)
    if method is Method.EXACT and config.scheme is Scheme.IR_HARQ and config.max_rounds > MAX_NESTED_ROUNDS:
        raise UnsupportedDimensionError(
            f"exact IR-HARQ needs nested quadrature of dimension L, capped at {MAX_NESTED_ROUNDS}; "
            f"got L = {config.max_rounds}. Use --method gpp or epa."
        )
    if method is Method.EXACT:
        report = solve(config, method, seed=args.seed, n_perturbed=args.starts)
    else:
        report = solve(config, method)
    record = _base_record(config)
    record.update(
        method=report.method.value,
        energy_budget=budget,
        powers=list(report.schedule.powers),
        p_out_L=report.objective,
        avg_energy=report.avg_energy,
        kkt_residual=report.kkt_residual,
        converged=report.converged,
        evaluations=report.evaluations,
        starts_tried=report.starts_tried,
    )
    _emit(record, args.json, out)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args, out) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read sweep config: {exc}") from None
    spec = parse_sweep_config(text, output=args.output)
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise InvalidArgumentError(f"--threads must be positive, got {threads}")
    target = spec.output or "-"
    # open before solving so an unwritable path fails fast
    try:
        stream = out if target == "-" else open(target, "w", encoding="utf-8", newline="")
    except OSError as exc:
        print(f"imimo: cannot write {target}: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    try:
        rows = run_sweep(spec, threads=threads)
        try:
            write_csv(rows, spec.template.max_rounds, stream)
            stream.flush()
        except OSError as exc:
            print(f"imimo: cannot write {target}: {exc}", file=sys.stderr)
            return EXIT_UNWRITABLE
    finally:
        if stream is not out:
            stream.close()
    unconverged = sum(1 for r in rows if not r.converged)
    if unconverged:
        print(f"imimo: warning: {unconverged} of {len(rows)} solves did not converge", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    config = _config(args)
    schedule = _schedule(args)
    if args.trials <= 0:
        raise InvalidArgumentError(f"--trials must be positive, got {args.trials}")
    workers = args.workers if args.workers is not None else default_threads()
    result = simulate(SimSpec(config, schedule, args.trials, seed=args.seed, workers=workers))
    record = _base_record(config)
    record["powers"] = list(schedule.powers)
    record["trials"] = result.trials_used
    record["seed"] = args.seed
    for i, (p, se) in enumerate(zip(result.per_round_outage_estimate, result.per_round_std_error), 1):
        record[f"p_out_{i}"] = p
        record[f"std_err_{i}"] = se
    record["avg_energy"] = result.avg_energy_estimate
    _emit(record, args.json, out)
    return EXIT_OK


_COMMANDS = {
    "outage": cmd_outage,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args, out)
    except (InvalidArgumentError, ValueError) as exc:
        print(f"imimo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
