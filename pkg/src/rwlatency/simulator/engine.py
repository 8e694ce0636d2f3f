"""Discrete-event simulation of the primary-secondary read/write system.

Reads are routed to one of the n+1 servers; writes are served at the primary
and then forked to all n secondaries, departing once the last secondary is
done.  Each server runs two priority classes, FCFS within a class.

Routing never looks at queue state, so the system decomposes server by
server: the primary is simulated first and its write departures become the
write arrival stream of every secondary.  The per-server work is done by the
compiled kernels in :mod:`rwlatency.simulator.kernels`; an event-queue
implementation over the same inputs lives in
:mod:`rwlatency.simulator.reference` and is used to cross-check them.

Randomness is drawn from independent streams per role (read arrivals,
routing, read services, write arrivals, primary and secondary services), so
configurations that differ only in n share their read workload.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy import stats

from rwlatency.analytic import SystemParams
from rwlatency.errors import DomainError, InstabilityError, LittleLawViolation, StabilityWarning
from rwlatency.simulator.distributions import Exponential, ServiceDistribution, draw
from rwlatency.simulator.kernels import priority_server

LITTLE_TOL = 0.02
# Little's law is only checked once a class has this many arrivals in the window.
LITTLE_MIN_ARRIVALS = 1000
METRICS = (
    "mean_total",
    "mean_read",
    "mean_write",
    "sojourn_read",
    "sojourn_write",
    "effective_lambda_read",
    "effective_lambda_write",
)


class Priority(enum.Enum):
    READ = "read"
    WRITE = "write"


class Preemption(enum.Enum):
    PREEMPTIVE_RESUME = "preemptive"
    NON_PREEMPTIVE = "non-preemptive"


class Routing(enum.Enum):
    UNIFORM_RANDOM = "uniform"
    ROUND_ROBIN = "round-robin"


@dataclass(frozen=True)
class PolicyConfig:
    priority: Priority = Priority.WRITE
    preemption: Preemption = Preemption.PREEMPTIVE_RESUME
    routing: Routing = Routing.UNIFORM_RANDOM

    def __post_init__(self):
        object.__setattr__(self, "priority", Priority(self.priority))
        object.__setattr__(self, "preemption", Preemption(self.preemption))
        object.__setattr__(self, "routing", Routing(self.routing))


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to run a simulation.

    ``read_dist`` and ``write_dist`` default to exponentials with the rates
    in ``params``.  When other distributions are given, the service rates in
    ``params`` are ignored by the simulator.
    """

    params: SystemParams
    policy: PolicyConfig = PolicyConfig()
    read_dist: Optional[ServiceDistribution] = None
    write_dist: Optional[ServiceDistribution] = None
    horizon: float = 2e5
    warmup_fraction: float = 0.2
    replications: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.read_dist is None:
            object.__setattr__(self, "read_dist", Exponential(self.params.mu_r))
        if self.write_dist is None:
            object.__setattr__(self, "write_dist", Exponential(self.params.mu_w))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.warmup_fraction < 1:
            raise DomainError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if isinstance(self.replications, bool) or int(self.replications) != self.replications or self.replications < 1:
            raise DomainError(f"replications must be a positive integer, got {self.replications}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def warmup(self) -> float:
        return self.warmup_fraction * self.horizon

    @property
    def stability_margin(self) -> float:
        """One minus the per-server load, using the distribution means."""
        p = self.params
        return 1.0 - p.lambda_w * self.write_dist.mean - p.lambda_r * self.read_dist.mean / (p.n + 1)

    def with_n(self, n: int) -> SimConfig:
        return replace(self, params=self.params.with_n(n))


@dataclass(frozen=True)
class Workload:
    """Pre-drawn inputs of one replication, all in arrival order."""

    read_arrivals: np.ndarray
    read_servers: np.ndarray
    read_service: np.ndarray
    write_arrivals: np.ndarray
    primary_service: np.ndarray
    secondary_service: np.ndarray  # shape (writes, n)


@dataclass(frozen=True)
class Trace:
    """Departure times of every request in one replication."""

    read_departures: np.ndarray
    primary_departures: np.ndarray
    secondary_departures: np.ndarray  # shape (writes, n)
    write_departures: np.ndarray


@dataclass(frozen=True)
class ReplicationMetrics:
    mean_total: float
    mean_read: float
    mean_write: float
    sojourn_read: float
    sojourn_write: float
    effective_lambda_read: float
    effective_lambda_write: float
    events_processed: int


@dataclass(frozen=True)
class SimResult:
    mean_total: float
    mean_read: float
    mean_write: float
    sojourn_read: float
    sojourn_write: float
    effective_lambda_read: float
    effective_lambda_write: float
    events_processed: int
    # 95% Student-t halfwidth per metric; None with a single replication.
    ci_halfwidth: Mapping[str, Optional[float]]
    replications: tuple[ReplicationMetrics, ...] = field(repr=False)
    stability_margin: float = math.nan

    def __post_init__(self):
        if abs(self.mean_total - (self.mean_read + self.mean_write)) > 1e-9 * max(1.0, self.mean_total):
            raise ValueError("mean_total must equal mean_read + mean_write")
        if self.stability_margin > 0:
            for cls in ("read", "write"):
                _check_little(
                    cls,
                    getattr(self, f"mean_{cls}"),
                    getattr(self, f"effective_lambda_{cls}"),
                    getattr(self, f"sojourn_{cls}"),
                )


def _check_little(cls, mean, lam, sojourn):
    if mean == 0 and lam == 0:
        return
    if abs(mean - lam * sojourn) > LITTLE_TOL * mean:
        raise LittleLawViolation(
            f"{cls}s: time-average count {mean:.6g} differs from "
            f"lambda*W = {lam:.6g}*{sojourn:.6g} by more than {LITTLE_TOL:.0%}"
        )


def _streams(seed) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(6)]


def _poisson_times(rng, rate, horizon):
    if rate == 0:
        return np.empty(0)
    count = rng.poisson(rate * horizon)
    return np.sort(rng.random(count)) * horizon


def draw_workload(config: SimConfig, seed) -> Workload:
    """Draw the arrival times, routing and service times of one replication."""
    p = config.params
    g_ra, g_route, g_rs, g_wa, g_ws, g_ss = _streams(seed)
    read_arr = _poisson_times(g_ra, p.lambda_r, config.horizon)
    if config.policy.routing is Routing.ROUND_ROBIN:
        servers = np.arange(read_arr.size, dtype=np.int64) % (p.n + 1)
    else:
        servers = g_route.integers(0, p.n + 1, size=read_arr.size)
    read_svc = draw(config.read_dist, g_rs, read_arr.size)
    write_arr = _poisson_times(g_wa, p.lambda_w, config.horizon)
    primary_svc = draw(config.write_dist, g_ws, write_arr.size)
    secondary_svc = draw(config.write_dist, g_ss, (write_arr.size, p.n)).reshape(write_arr.size, p.n)
    return Workload(read_arr, servers, read_svc, write_arr, primary_svc, secondary_svc)


def _server(policy, read_arr, read_svc, write_arr, write_svc):
    """Departures ``(reads, writes)`` at one server."""
    preemptive = policy.preemption is Preemption.PREEMPTIVE_RESUME
    if policy.priority is Priority.WRITE:
        wd, rd = priority_server(write_arr, write_svc, read_arr, read_svc, preemptive)
    else:
        rd, wd = priority_server(read_arr, read_svc, write_arr, write_svc, preemptive)
    return rd, wd


def propagate(workload: Workload, policy: PolicyConfig) -> Trace:
    """Push a workload through the system and return every departure time."""
    w = workload
    n = w.secondary_service.shape[1]
    read_dep = np.empty_like(w.read_arrivals)
    m = w.write_arrivals.size

    mask = w.read_servers == 0
    rd, primary_dep = _server(policy, w.read_arrivals[mask], w.read_service[mask], w.write_arrivals, w.primary_service)
    read_dep[mask] = rd

    # The primary serves writes FCFS, so primary_dep is already sorted.
    secondary_dep = np.empty((m, n))
    for j in range(n):
        mask = w.read_servers == j + 1
        rd, wd = _server(policy, w.read_arrivals[mask], w.read_service[mask], primary_dep, w.secondary_service[:, j])
        read_dep[mask] = rd
        secondary_dep[:, j] = wd
    write_dep = secondary_dep.max(axis=1) if n > 0 else primary_dep.copy()
    return Trace(read_dep, primary_dep, secondary_dep, write_dep)


def _window_stats(arr, dep, lo, hi):
    """Time-average count, mean sojourn and arrival rate over [lo, hi]."""
    span = hi - lo
    overlap = np.clip(dep, lo, hi) - np.clip(arr, lo, hi)
    inside = (arr >= lo) & (arr <= hi)
    count = int(np.count_nonzero(inside))
    mean = float(overlap.sum()) / span
    sojourn = float((dep[inside] - arr[inside]).mean()) if count else 0.0
    return mean, sojourn, count / span, count


def measure(config: SimConfig, workload: Workload, trace: Trace) -> ReplicationMetrics:
    lo, hi = config.warmup, config.horizon
    mr, sr, lr, cr = _window_stats(workload.read_arrivals, trace.read_departures, lo, hi)
    mw, sw, lw, cw = _window_stats(workload.write_arrivals, trace.write_departures, lo, hi)
    if config.stability_margin > 0:
        if cr >= LITTLE_MIN_ARRIVALS:
            _check_little("read", mr, lr, sr)
        if cw >= LITTLE_MIN_ARRIVALS:
            _check_little("write", mw, lw, sw)
    reads = workload.read_arrivals.size
    writes = workload.write_arrivals.size
    # One arrival and one completion per request at every server it visits.
    events = 2 * (reads + writes * (config.n + 1))
    return ReplicationMetrics(mr + mw, mr, mw, sr, sw, lr, lw, events)


def run_replication(config: SimConfig, seed, *, return_trace: bool = False):
    """Simulate one replication.

    ``seed`` is an integer or a :class:`numpy.random.SeedSequence`.  With
    ``return_trace`` the workload and trace are returned alongside the
    metrics.
    """
    workload = draw_workload(config, seed)
    trace = propagate(workload, config.policy)
    metrics = measure(config, workload, trace)
    if return_trace:
        return metrics, workload, trace
    return metrics


def replication_seed(master: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(index,))


def _halfwidth(values) -> Optional[float]:
    r = len(values)
    if r < 2:
        return None
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.975, r - 1)) * sd / math.sqrt(r)


def aggregate(reps: Iterable[ReplicationMetrics], stability_margin: float = math.nan) -> SimResult:
    reps = tuple(reps)
    means = {}
    ci = {}
    for name in METRICS:
        values = [getattr(r, name) for r in reps]
        means[name] = math.fsum(values) / len(values)
        ci[name] = _halfwidth(values)
    events = sum(r.events_processed for r in reps)
    return SimResult(
        **means,
        events_processed=events,
        ci_halfwidth=ci,
        replications=reps,
        stability_margin=stability_margin,
    )


def run(config: SimConfig) -> SimResult:
    """Run all replications and aggregate them with 95% confidence intervals."""
    margin = config.stability_margin
    if margin <= 0:
        warnings.warn(
            f"per-server load is {1 - margin:.4g} >= 1; metrics will grow with the horizon",
            StabilityWarning,
            stacklevel=2,
        )
    reps = [run_replication(config, replication_seed(config.seed, r)) for r in range(config.replications)]
    return aggregate(reps, margin)


def empirical_optimal_n(base: SimConfig, n_range: Iterable[int]) -> tuple[int, list[tuple[int, SimResult]]]:
    """Simulate every n in ``n_range`` and return the argmin of mean_total."""
    ns = list(n_range)
    if not ns:
        raise DomainError("n_range is empty")
    for n in ns:
        if base.with_n(n).stability_margin <= 0:
            raise InstabilityError(f"the system is unstable at n={n}")
    curve = [(n, run(base.with_n(n))) for n in ns]
    n_star = min(curve, key=lambda item: item[1].mean_total)[0]
    return n_star, curve
