"""Result rows for the analytic, oracle, bound and simulation back ends."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

from rwlatency import analytic, markov
from rwlatency.analytic import SystemParams
from rwlatency.cli.config import ConfigError, RunConfig, parse_int_range
from rwlatency.errors import InstabilityError
from rwlatency.simulator.engine import Priority, empirical_optimal_n, run

WP_ORACLE_MAX_N = 4
RP_ORACLE_NS = (1, 2)
WP_ORACLE_CAP = 60
DEFAULT_SIM_N_RANGE = tuple(range(11))


@dataclass(frozen=True)
class Row:
    source: str
    priority: str
    lambda_r: float
    lambda_w: float
    mu_r: float
    mu_w: float
    n: int
    total_servers: int
    mean_read: float
    mean_write: float
    mean_total: float
    ci_halfwidth: Optional[float] = None
    seed: Optional[int] = None
    truncation_mass: Optional[float] = None


def _row(source, priority, params, mean_read, mean_write, ci=None, seed=None, mass=None) -> Row:
    return Row(
        source, priority, params.lambda_r, params.lambda_w, params.mu_r, params.mu_w,
        params.n, params.n + 1, mean_read, mean_write, mean_read + mean_write, ci, seed, mass,
    )


def analytic_row(params: SystemParams, priority: str) -> Row:
    loads = analytic.derive_loads(params)
    if not loads.stable:
        raise InstabilityError(f"unstable at n={params.n}: per-server load {1 - loads.stability_margin:.4g}")
    if priority == "write":
        reads, writes = analytic.wp_mean_read(params), analytic.wp_mean_write(loads, params.n)
    else:
        reads, writes = analytic.rp_mean_read(loads, params.n), analytic.rp_mean_write(params)
    return _row("analytic", priority, params, reads, writes)


def bound_rows(params: SystemParams) -> list[Row]:
    """Lower and upper bound rows; reads are exact under write priority."""
    reads = analytic.wp_mean_read(params)
    lower, upper = analytic.wp_write_bounds(params)
    return [
        _row("bound_lb", "write", params, reads, lower),
        _row("bound_ub", "write", params, reads, upper),
    ]


def check_oracle_n(n: int, priority: str) -> None:
    if priority == "write" and not 0 <= n <= WP_ORACLE_MAX_N:
        raise ConfigError(f"the write-priority oracle supports n in 0..{WP_ORACLE_MAX_N}, got {n}")
    if priority == "read" and n not in RP_ORACLE_NS:
        raise ConfigError(f"the read-priority oracle supports n in {RP_ORACLE_NS}, got {n}")


def oracle_row(config: RunConfig, params: SystemParams) -> Row:
    """Exact means from a truncated Markov chain.

    Under write priority the chain covers writes only; the read mean reported
    with it is the exact closed form, since reads then see an M/M/1
    low-priority queue.
    """
    priority = config.priority
    check_oracle_n(params.n, priority)
    if not params.is_stable():
        raise InstabilityError(f"unstable at n={params.n}")
    if priority == "write":
        cap = config.write_cap if "write_cap" in config.explicit else WP_ORACLE_CAP
        writes, mass = markov.wp_oracle_mean_writes(params.n, params.lambda_w, params.mu_w, cap)
        reads = analytic.wp_mean_read(params)
    else:
        g = markov.build_rp_generator(params, write_cap=config.write_cap, read_cap=config.read_cap)
        res = markov.stationary(g)
        writes, reads = markov.expected_counts(res, g)
        mass = res.truncation_mass
    return _row("oracle", priority, params, reads, writes, mass=mass)


def simulation_row(config: RunConfig, params: SystemParams, result=None) -> Row:
    if result is None:
        result = run(config.sim_config(params))
    return _row(
        "simulation", config.priority, params, result.mean_read, result.mean_write,
        ci=result.ci_halfwidth["mean_total"], seed=config.seed,
    )


def analytic_optimum_row(config: RunConfig, params: SystemParams) -> Row:
    if config.policy.priority is Priority.WRITE:
        opt = analytic.wp_optimal_n(params, config.method)
    else:
        opt = analytic.rp_optimal_n(params)
    return analytic_row(params.with_n(opt.n_star), config.priority)


def simulated_optimum_row(config: RunConfig, params: SystemParams) -> Row:
    ns = [n for n in (config.n_range or DEFAULT_SIM_N_RANGE) if config.sim_config(params.with_n(n)).stability_margin > 0]
    if not ns:
        raise InstabilityError("no n in n_range is stable")
    n_star, curve = empirical_optimal_n(config.sim_config(params), ns)
    result = dict(curve)[n_star]
    return simulation_row(config, params.with_n(n_star), result)


def _float_grid(text: str) -> list[float]:
    if text.count(":") == 2:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError
        count = int(round((stop - start) / step)) + 1
        return [float(f"{start + k * step:.12g}") for k in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def stability_boundary(config: RunConfig) -> float:
    """Largest rate on the sweep axis keeping every n stable."""
    p = config.params
    if config.sweep == "lambda_r":
        return p.mu_r * (1.0 - p.lambda_w / p.mu_w)
    return p.mu_w * (1.0 - p.lambda_r / p.mu_r)


def grid_values(config: RunConfig) -> list:
    """Grid points on the sweep axis.

    ``grid`` is a comma list, ``start:stop:step`` (inclusive), or for rate
    axes ``stability:K``, which places K points at 0.95*k/K of the
    stability boundary.
    """
    text = (config.grid or "").strip()
    if config.sweep is None:
        raise ConfigError("sweep requires the 'sweep' key (n, lambda_r or lambda_w)")
    if not text:
        raise ConfigError("sweep requires the 'grid' key")
    if config.sweep == "n":
        return list(parse_int_range("grid", text))
    if text.startswith("stability:"):
        try:
            k = int(text.partition(":")[2])
        except ValueError:
            raise ConfigError(f"grid: stability:K needs an integer K, got {text!r}") from None
        if k < 1:
            raise ConfigError("grid: stability:K needs K >= 1")
        boundary = stability_boundary(config)
        if boundary <= 0:
            raise InstabilityError("the fixed rates already saturate the system")
        return [float(f"{0.95 * i / k * boundary:.12g}") for i in range(1, k + 1)]
    try:
        values = _float_grid(text)
    except ValueError:
        raise ConfigError(f"grid: expected numbers, start:stop:step or stability:K, got {text!r}") from None
    if not values or any(not math.isfinite(v) or v < 0 for v in values):
        raise ConfigError(f"grid values must be non-negative numbers, got {text!r}")
    return values


def _warn(message):
    print(f"warning: {message}", file=sys.stderr)


def sweep_rows(config: RunConfig) -> list[Row]:
    """Rows for every grid point and requested source; unstable points are skipped."""
    rows: list[Row] = []
    stable_points = 0
    values = grid_values(config)
    for value in values:
        if config.sweep == "n":
            params = config.params.with_n(value)
        else:
            params = analytic.SystemParams(**{**_fields(config.params), config.sweep: value})
        try:
            rows.extend(_point_rows(config, params))
            stable_points += 1
        except InstabilityError as exc:
            _warn(f"skipping {config.sweep}={value:g}: {exc}")
    if stable_points == 0:
        raise InstabilityError("every grid point is unstable")
    return rows


def _fields(params: SystemParams) -> dict:
    return {
        "lambda_r": params.lambda_r,
        "lambda_w": params.lambda_w,
        "mu_r": params.mu_r,
        "mu_w": params.mu_w,
        "n": params.n,
    }


def _point_rows(config: RunConfig, params: SystemParams) -> list[Row]:
    rows = []
    per_n = config.sweep == "n"
    if per_n:
        if not params.is_stable() and config.sim_config(params).stability_margin <= 0:
            raise InstabilityError(f"unstable at n={params.n}")
    elif not params.is_stable_for_all_n():
        raise InstabilityError("rho_r + rho_w >= 1 or no writes")
    for source in config.sources:
        if source == "analytic":
            rows.append(analytic_row(params, config.priority) if per_n else analytic_optimum_row(config, params))
        elif source == "bounds":
            if config.priority != "write":
                _warn("bounds are only defined under write priority; skipped")
                continue
            target = params if per_n else params.with_n(analytic_optimum_row(config, params).n)
            rows.extend(bound_rows(target))
        elif source == "oracle":
            if not per_n:
                _warn("oracle rows need sweep=n; skipped")
                continue
            try:
                check_oracle_n(params.n, config.priority)
            except ConfigError as exc:
                _warn(f"{exc}; skipped")
                continue
            rows.append(oracle_row(config, params))
        elif source == "simulation":
            rows.append(simulation_row(config, params) if per_n else simulated_optimum_row(config, params))
    return rows
