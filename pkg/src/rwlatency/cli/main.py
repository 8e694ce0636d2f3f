"""Command line front end: ``rwlatency {analytic,simulate,sweep,exact}``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
import warnings
from pathlib import Path

from rwlatency import analytic
from rwlatency.analytic import Method
from rwlatency.cli.config import ConfigError, RunConfig, load_config
from rwlatency.cli.output import csv_text, rows_svg, write_csv
from rwlatency.cli.sweep import (
    analytic_row,
    bound_rows,
    check_oracle_n,
    oracle_row,
    simulation_row,
    sweep_rows,
)
from rwlatency.errors import (
    ConvergenceError,
    DomainError,
    InstabilityError,
    LittleLawViolation,
    StabilityWarning,
    StateSpaceTooLarge,
)
from rwlatency.simulator.engine import empirical_optimal_n, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NUMERIC = 4


def _print_table(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"{key:<{width}}  {value}")


def _emit(config: RunConfig, rows, axis="n") -> None:
    if config.out is not None:
        write_csv(config.out, rows)
    if config.svg is not None and rows:
        Path(config.svg).write_text(rows_svg(rows, axis), encoding="utf-8")


def cmd_analytic(config: RunConfig) -> int:
    params = config.params
    row = analytic_row(params, config.priority)
    loads = analytic.derive_loads(params)
    pairs = [("priority", config.priority), ("n", params.n), ("total_servers", params.n + 1)]
    if config.priority == "write":
        lower, upper = analytic.wp_bounds(params)
        pairs += [
            ("f (writes)", row.mean_write),
            ("g (reads)", row.mean_read),
            ("total", row.mean_total),
            ("lower_bound", lower),
            ("upper_bound", upper),
            ("x*", analytic.wp_xstar(loads)),
            ("rho_T", analytic.wp_write_load_threshold(loads.alpha, loads.rho_r)),
        ]
        if params.is_stable_for_all_n():
            for method in (Method.CLOSED_FORM, Method.EXACT_SCAN):
                opt = analytic.wp_optimal_n(params, method)
                pairs += [(f"n* ({method.value})", opt.n_star), (f"total servers ({method.value})", opt.total_servers)]
        else:
            pairs.append(("n*", "n/a (not stable for every n)"))
    else:
        pairs += [
            ("p (writes)", row.mean_write),
            ("q (reads)", row.mean_read),
            ("total", row.mean_total),
            ("delta_n", analytic.rp_delta(loads, params.n)),
        ]
        if params.is_stable_for_all_n():
            opt = analytic.rp_optimal_n(params)
            pairs += [("n* (numeric-scan)", opt.n_star), ("total servers (numeric-scan)", opt.total_servers)]
        else:
            pairs.append(("n*", "n/a (not stable for every n)"))
    _print_table(pairs)
    _emit(config, [row])
    return EXIT_OK


def cmd_exact(config: RunConfig) -> int:
    params = config.params
    check_oracle_n(params.n, config.priority)
    oracle = oracle_row(config, params)
    approx = analytic_row(params, config.priority)
    rows = [oracle, approx]
    pairs = [("priority", config.priority), ("n", params.n)]
    for label, key in (("writes", "mean_write"), ("reads", "mean_read"), ("total", "mean_total")):
        o, a = getattr(oracle, key), getattr(approx, key)
        pairs += [
            (f"oracle {label}", o),
            (f"approx {label}", a),
            (f"gap {label}", a - o),
            (f"relative gap {label}", (a - o) / o if o else 0.0),
        ]
    pairs.append(("truncation_mass", oracle.truncation_mass))
    if config.priority == "write":
        rows += bound_rows(params)
        lower, upper = analytic.wp_write_bounds(params)
        pairs += [("writes lower bound", lower), ("writes upper bound", upper)]
    _print_table(pairs)
    _emit(config, rows)
    return EXIT_OK


def cmd_simulate(config: RunConfig) -> int:
    if config.n_range:
        n_star, curve = empirical_optimal_n(config.sim_config(), config.n_range)
        rows = [simulation_row(config, config.params.with_n(n), res) for n, res in curve]
        for row in rows:
            ci = f" +- {row.ci_halfwidth:.4g}" if row.ci_halfwidth is not None else ""
            print(f"n={row.n:<3d} total_servers={row.total_servers:<3d} mean_total={row.mean_total:.6g}{ci}")
        print(f"n* = {n_star}, total servers {n_star + 1}")
        _emit(config, rows)
        return EXIT_OK
    result = run(config.sim_config())
    row = simulation_row(config, config.params, result)
    pairs = [("priority", config.priority), ("n", config.params.n)]
    for name in ("mean_total", "mean_read", "mean_write", "sojourn_read", "sojourn_write",
                 "effective_lambda_read", "effective_lambda_write"):
        ci = result.ci_halfwidth[name]
        pairs.append((name, f"{getattr(result, name):.6g}" + (f" +- {ci:.3g}" if ci is not None else " (no CI)")))
    pairs.append(("events_processed", result.events_processed))
    _print_table(pairs)
    _emit(config, [row])
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    rows = sweep_rows(config)
    if config.out is None:
        sys.stdout.write(csv_text(rows))
    _emit(config, rows, config.sweep)
    return EXIT_OK


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "exact": cmd_exact,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwlatency",
        description="Latency versus redundancy in a primary-secondary read/write system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analytic": "closed-form means, bounds and optimal redundancy",
        "simulate": "discrete-event simulation",
        "sweep": "grid sweep writing CSV (and optionally SVG)",
        "exact": "truncated Markov chain oracle against the approximations",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="key=value configuration file")
        p.add_argument("--out", type=Path, help="CSV output path")
        p.add_argument("--seed", type=int, help="master seed for the simulator")
        p.add_argument("--svg", type=Path, help="optional SVG chart path")
        p.add_argument("--method", choices=[Method.CLOSED_FORM.value, Method.EXACT_SCAN.value],
                       help="write-priority optimizer")
    return parser


def _apply_flags(config: RunConfig, args) -> RunConfig:
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.svg is not None:
        changes["svg"] = args.svg
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.method is not None:
        changes["method"] = Method(args.method)
    return dataclasses.replace(config, **changes) if changes else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_flags(load_config(args.config), args)
        with warnings.catch_warnings():
            warnings.simplefilter("always", StabilityWarning)
            return COMMANDS[args.command](config)
    except (ConfigError, DomainError, StateSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ConvergenceError, LittleLawViolation, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
