"""Flat ``key=value`` run configuration.

Example::

    # write priority at the right edge of the read-rate grid
    lambda_r = 3.6
    lambda_w = 0.6
    mu_r = 10
    mu_w = 1
    priority = write

Service distributions are written as ``family:param=value,...``, for
instance ``read_dist = shifted-exponential:rate=136.096,shift=0.015`` or
``write_dist = empirical:path=writes.txt``.  Relative paths are resolved
against the directory of the config file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from rwlatency.analytic import Method, SystemParams
from rwlatency.errors import DomainError
from rwlatency.markov import DEFAULT_READ_CAP, DEFAULT_WRITE_CAP
from rwlatency.simulator.distributions import (
    Empirical,
    Exponential,
    Pareto,
    ServiceDistribution,
    ShiftedExponential,
    Weibull,
)
from rwlatency.simulator.engine import PolicyConfig, Preemption, Priority, Routing, SimConfig


class ConfigError(ValueError):
    """An invalid configuration; the message names the offending key or line."""


SWEEP_AXES = ("n", "lambda_r", "lambda_w")
SOURCES = ("analytic", "simulation", "oracle", "bounds")

_DIST_PARAMS = {
    "exponential": ("rate",),
    "shifted-exponential": ("rate", "shift"),
    "pareto": ("shape", "scale"),
    "weibull": ("shape", "scale", "location"),
    "empirical": ("path",),
}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    policy: PolicyConfig = PolicyConfig()
    read_dist: Optional[ServiceDistribution] = None
    write_dist: Optional[ServiceDistribution] = None
    horizon: float = 2e5
    warmup_fraction: float = 0.2
    replications: int = 20
    seed: int = 0
    method: Method = Method.CLOSED_FORM
    sweep: Optional[str] = None
    grid: Optional[str] = None
    sources: tuple[str, ...] = ("analytic",)
    n_range: Optional[tuple[int, ...]] = None
    write_cap: int = DEFAULT_WRITE_CAP
    read_cap: int = DEFAULT_READ_CAP
    out: Optional[Path] = None
    svg: Optional[Path] = None
    explicit: frozenset = field(default_factory=frozenset, compare=False)

    @property
    def priority(self) -> str:
        return self.policy.priority.value

    def sim_config(self, params: Optional[SystemParams] = None) -> SimConfig:
        return SimConfig(
            params=params or self.params,
            policy=self.policy,
            read_dist=self.read_dist,
            write_dist=self.write_dist,
            horizon=self.horizon,
            warmup_fraction=self.warmup_fraction,
            replications=self.replications,
            seed=self.seed,
        )


def _float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {text!r}")
    return value


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _choice(key, text, enum_type):
    allowed = [e.value for e in enum_type]
    try:
        return enum_type(text)
    except ValueError:
        raise ConfigError(f"{key} must be one of {', '.join(allowed)}; got {text!r}") from None


def parse_int_range(key, text) -> tuple[int, ...]:
    """``a:b`` (inclusive) or a comma list of non-negative integers."""
    if ":" in text:
        lo, _, hi = text.partition(":")
        lo, hi = _int(key, lo.strip()), _int(key, hi.strip())
        values = tuple(range(lo, hi + 1))
    else:
        values = tuple(_int(key, v.strip()) for v in text.split(",") if v.strip())
    if not values or min(values) < 0:
        raise ConfigError(f"{key} must list non-negative integers, got {text!r}")
    return values


def _dist(key, text, base: Path) -> Optional[ServiceDistribution]:
    family, _, rest = text.partition(":")
    family = family.strip()
    if family not in _DIST_PARAMS:
        raise ConfigError(f"{key}: unknown distribution {family!r}; allowed: {', '.join(_DIST_PARAMS)}")
    args = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in _DIST_PARAMS[family]:
            raise ConfigError(
                f"{key}: {family} takes {', '.join(_DIST_PARAMS[family]) or 'no'} parameters, got {item!r}"
            )
        args[name] = value.strip()
    if family == "exponential" and not args:
        return None  # rate taken from mu_r / mu_w
    try:
        if family == "empirical":
            if "path" not in args:
                raise ConfigError(f"{key}: empirical needs path=FILE")
            path = Path(args["path"])
            if not path.is_absolute():
                path = base / path
            if not path.is_file():
                raise ConfigError(f"{key}: sample file {path} does not exist")
            return Empirical.from_file(path)
        missing = [p for p in _DIST_PARAMS[family] if p not in args and p != "location"]
        if missing:
            raise ConfigError(f"{key}: {family} needs {', '.join(missing)}")
        values = {k: _float(f"{key}.{k}", v) for k, v in args.items()}
        cls = {
            "exponential": Exponential,
            "shifted-exponential": ShiftedExponential,
            "pareto": Pareto,
            "weibull": Weibull,
        }[family]
        return cls(**values)
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from None


_KEYS = (
    "lambda_r", "lambda_w", "mu_r", "mu_w", "n",
    "priority", "preemption", "routing", "read_dist", "write_dist",
    "horizon", "warmup_fraction", "replications", "seed", "method",
    "sweep", "grid", "sources", "n_range", "write_cap", "read_cap", "out", "svg",
)


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Validate ``key=value`` lines into a :class:`RunConfig`."""
    base = Path(base_dir)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    read_dist = _dist("read_dist", raw["read_dist"], base) if "read_dist" in raw else None
    write_dist = _dist("write_dist", raw["write_dist"], base) if "write_dist" in raw else None

    rates = {}
    for key in ("lambda_r", "lambda_w"):
        rates[key] = _float(key, raw[key]) if key in raw else 0.0
        if rates[key] < 0:
            raise ConfigError(f"{key} must be non-negative")
    for key, dist in (("mu_r", read_dist), ("mu_w", write_dist)):
        if key in raw:
            rates[key] = _float(key, raw[key])
            if rates[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        elif dist is not None:
            rates[key] = 1.0 / dist.mean
        else:
            raise ConfigError(f"{key} is required")
    n = _int("n", raw["n"]) if "n" in raw else 0
    if n < 0:
        raise ConfigError("n must be a non-negative integer")
    params = SystemParams(rates["lambda_r"], rates["lambda_w"], rates["mu_r"], rates["mu_w"], n)

    policy = PolicyConfig(
        _choice("priority", raw.get("priority", "write"), Priority),
        _choice("preemption", raw.get("preemption", "preemptive"), Preemption),
        _choice("routing", raw.get("routing", "uniform"), Routing),
    )
    kwargs = {}
    if "horizon" in raw:
        kwargs["horizon"] = _float("horizon", raw["horizon"])
        if kwargs["horizon"] <= 0:
            raise ConfigError("horizon must be positive")
    if "warmup_fraction" in raw:
        kwargs["warmup_fraction"] = _float("warmup_fraction", raw["warmup_fraction"])
        if not 0 <= kwargs["warmup_fraction"] < 1:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
    if "replications" in raw:
        kwargs["replications"] = _int("replications", raw["replications"])
        if kwargs["replications"] < 1:
            raise ConfigError("replications must be a positive integer")
    if "seed" in raw:
        kwargs["seed"] = _int("seed", raw["seed"])
        if not 0 <= kwargs["seed"] < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    if "method" in raw:
        kwargs["method"] = _choice("method", raw["method"], Method)
        if kwargs["method"] is Method.NUMERIC_SCAN:
            raise ConfigError("method must be one of closed-form, exact-scan")
    if "sweep" in raw:
        if raw["sweep"] not in SWEEP_AXES:
            raise ConfigError(f"sweep must be one of {', '.join(SWEEP_AXES)}; got {raw['sweep']!r}")
        kwargs["sweep"] = raw["sweep"]
    if "grid" in raw:
        kwargs["grid"] = raw["grid"]
    if "sources" in raw:
        sources = tuple(s.strip() for s in raw["sources"].split(",") if s.strip())
        bad = [s for s in sources if s not in SOURCES]
        if bad or not sources:
            raise ConfigError(f"sources must be drawn from {', '.join(SOURCES)}; got {raw['sources']!r}")
        kwargs["sources"] = sources
    if "n_range" in raw:
        kwargs["n_range"] = parse_int_range("n_range", raw["n_range"])
    for key in ("write_cap", "read_cap"):
        if key in raw:
            kwargs[key] = _int(key, raw[key])
            if kwargs[key] < 1:
                raise ConfigError(f"{key} must be a positive integer")
    for key in ("out", "svg"):
        if key in raw:
            kwargs[key] = Path(raw[key])

    config = RunConfig(
        params=params,
        policy=policy,
        read_dist=read_dist,
        write_dist=write_dist,
        explicit=frozenset(raw),
        **kwargs,
    )
    if config.grid is not None:
        # Fail early on malformed grids.
        from rwlatency.cli.sweep import grid_values

        grid_values(config)
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"config {path} is not UTF-8") from None
    return parse_config(text, path.parent)
