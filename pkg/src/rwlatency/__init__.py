"""Read/write latency versus redundancy in primary-secondary replicated stores.

Closed-form approximations live in :mod:`rwlatency.analytic`, exact truncated
Markov chains in :mod:`rwlatency.markov`, the discrete-event simulator in
:mod:`rwlatency.simulator` and the command line front end in
:mod:`rwlatency.cli`.
"""

from rwlatency.analytic import (
    DerivedLoads,
    Method,
    OptimalRedundancy,
    RpBreakdown,
    SystemParams,
    WpBreakdown,
    derive_loads,
    rp_breakdown,
    rp_optimal_n,
    wp_breakdown,
    wp_optimal_n,
)
from rwlatency.errors import (
    ConvergenceError,
    DomainError,
    InstabilityError,
    LittleLawViolation,
    StateSpaceTooLarge,
    TruncationWarning,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DerivedLoads",
    "DomainError",
    "InstabilityError",
    "LittleLawViolation",
    "Method",
    "OptimalRedundancy",
    "RpBreakdown",
    "StateSpaceTooLarge",
    "SystemParams",
    "TruncationWarning",
    "WpBreakdown",
    "derive_loads",
    "rp_breakdown",
    "rp_optimal_n",
    "wp_breakdown",
    "wp_optimal_n",
]
