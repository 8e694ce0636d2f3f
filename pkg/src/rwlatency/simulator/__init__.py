"""Discrete-event simulator for the replicated read/write system."""

from rwlatency.simulator.distributions import (
    Empirical,
    Exponential,
    Pareto,
    ServiceDistribution,
    ShiftedExponential,
    Weibull,
    draw,
    load_samples,
    sample,
)
from rwlatency.simulator.engine import (
    PolicyConfig,
    Preemption,
    Priority,
    ReplicationMetrics,
    Routing,
    SimConfig,
    SimResult,
    Trace,
    Workload,
    aggregate,
    draw_workload,
    empirical_optimal_n,
    propagate,
    replication_seed,
    run,
    run_replication,
)

__all__ = [
    "Empirical",
    "Exponential",
    "Pareto",
    "PolicyConfig",
    "Preemption",
    "Priority",
    "ReplicationMetrics",
    "Routing",
    "ServiceDistribution",
    "ShiftedExponential",
    "SimConfig",
    "SimResult",
    "Trace",
    "Weibull",
    "Workload",
    "aggregate",
    "draw",
    "draw_workload",
    "empirical_optimal_n",
    "load_samples",
    "propagate",
    "replication_seed",
    "run",
    "run_replication",
    "sample",
]
