"""Closed-form mean request counts and optimal redundancy.

Two scheduling disciplines are covered for a single file stored on one
primary and ``n`` secondary servers:

* write priority: writes preempt reads everywhere; the write process is a
  primary M/M/1 queue followed by an (n, n) fork-join stage, approximated by
  an unpooled tandem of M/M/1 queues.
* read priority: reads preempt writes; each server sees its reads as an
  independent M/M/1 queue and the write tandem is slowed down by the
  probability that a server holds no read.

All mean-value functions raise :class:`InstabilityError` instead of returning
infinities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator

from rwlatency.errors import ConvergenceError, DomainError, InstabilityError

EULER_GAMMA = 0.57721566490153286061

SCAN_CAP = 10**6
SCAN_PATIENCE = 3


@dataclass(frozen=True)
class SystemParams:
    """Arrival and service rates plus the number of secondary servers."""

    lambda_r: float
    lambda_w: float
    mu_r: float
    mu_w: float
    n: int = 0

    def __post_init__(self):
        for name in ("lambda_r", "lambda_w", "mu_r", "mu_w"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {value}")
        if self.mu_r <= 0:
            raise DomainError("mu_r must be positive")
        if self.mu_w <= 0:
            raise DomainError("mu_w must be positive")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 0:
            raise DomainError(f"n must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def total_servers(self) -> int:
        return self.n + 1

    def with_n(self, n: int) -> SystemParams:
        return replace(self, n=n)

    def is_stable(self) -> bool:
        return derive_loads(self).stability_margin > 0

    def is_stable_for_all_n(self) -> bool:
        loads = derive_loads(self)
        return loads.rho_w > 0 and loads.rho_r + loads.rho_w < 1


@dataclass(frozen=True)
class DerivedLoads:
    rho_r: float
    rho_w: float
    nu: float
    alpha: float
    delta: float
    stability_margin: float

    @property
    def stable(self) -> bool:
        return self.stability_margin > 0


@dataclass(frozen=True)
class WpBreakdown:
    """Write-priority means at a fixed ``n``."""

    n: int
    mean_write: float
    mean_read: float
    total: float
    lower_bound_total: float
    upper_bound_total: float
    eta: float


@dataclass(frozen=True)
class RpBreakdown:
    """Read-priority means at a fixed ``n``."""

    n: int
    mean_write: float
    mean_read: float
    total: float
    mu0: float
    beta: tuple[float, ...]
    delta_n: float


class Method(enum.Enum):
    CLOSED_FORM = "closed-form"
    EXACT_SCAN = "exact-scan"
    NUMERIC_SCAN = "numeric-scan"


@dataclass(frozen=True)
class OptimalRedundancy:
    n_star: int
    x_star: float | None
    mean_at_n_star: float
    method: Method

    @property
    def total_servers(self) -> int:
        return self.n_star + 1


def derive_loads(params: SystemParams) -> DerivedLoads:
    """Loads and the derived constants used throughout.

    ``stability_margin`` is ``1 - rho_w - rho_r / (n + 1)``; it is reported
    as-is, negative values mean the configuration is unstable.
    """
    rho_r = params.lambda_r / params.mu_r
    rho_w = params.lambda_w / params.mu_w
    nu = rho_w / (1.0 - rho_w) if rho_w < 1 else math.inf
    return DerivedLoads(
        rho_r=rho_r,
        rho_w=rho_w,
        nu=nu,
        alpha=params.mu_r / params.mu_w,
        delta=rho_w,
        stability_margin=1.0 - rho_w - rho_r / (params.n + 1),
    )


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    return int(n)


def harmonic(n: int) -> float:
    """H_n = 1 + 1/2 + ... + 1/n, with H_0 = 0."""
    n = _check_n(n)
    return math.fsum(1.0 / i for i in range(1, n + 1))


# B_2k / 2k for k = 1..8
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for ``x > 0``.

    The argument is pushed above 6 with psi(x) = psi(x + 1) - 1/x and the
    asymptotic expansion is then summed over eight Bernoulli terms.
    """
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"digamma is only defined here for finite x > 0, got {x}")
    shift = 0.0
    while x < 6.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for coeff in reversed(_DIGAMMA_COEFFS):
        series = (series + coeff) * inv2
    return shift + math.log(x) - 0.5 / x - series


# --- write priority -------------------------------------------------------


def _require_write_stable(rho_w: float) -> None:
    if not rho_w < 1:
        raise InstabilityError(f"write load rho_w={rho_w:.6g} must be below 1")


def _require_instance_stable(params: SystemParams) -> DerivedLoads:
    loads = derive_loads(params)
    if not loads.stable:
        raise InstabilityError(
            f"unstable: rho_w + rho_r/(n+1) = {1 - loads.stability_margin:.6g} >= 1 "
            f"at n={params.n}"
        )
    return loads


def _require_all_n_stable(params: SystemParams) -> DerivedLoads:
    loads = derive_loads(params)
    if not (loads.rho_w > 0 and loads.rho_r + loads.rho_w < 1):
        raise InstabilityError(
            "the optimizers need rho_w > 0 and rho_r + rho_w < 1 "
            f"(got rho_r={loads.rho_r:.6g}, rho_w={loads.rho_w:.6g})"
        )
    return loads


def wp_mean_write(loads: DerivedLoads, n: int) -> float:
    """Mean number of unique writes under write priority, nu * (1 + H_n)."""
    _require_write_stable(loads.rho_w)
    return loads.rho_w / (1.0 - loads.rho_w) * (1.0 + harmonic(n))


def wp_mean_read(params: SystemParams) -> float:
    """Mean number of reads in the write-priority system (exact)."""
    loads = _require_instance_stable(params)
    m = params.n + 1
    per_server = loads.rho_r / (m * (1.0 - loads.rho_w) - loads.rho_r)
    per_server *= 1.0 + loads.alpha * loads.rho_w / (1.0 - loads.rho_w)
    return m * per_server


def wp_approx_forms(loads: DerivedLoads, n: int) -> tuple[float, float]:
    """Smooth surrogates (f_tilde, g_tilde) used by the closed-form optimizer."""
    n = _check_n(n)
    _require_write_stable(loads.rho_w)
    one_minus = 1.0 - loads.rho_w
    if (n + 1) * one_minus <= loads.rho_r:
        raise InstabilityError(f"read load too high for n={n}")
    nu = loads.nu
    f_tilde = nu * (1.0 + math.log(n + 1))
    g_tilde = (
        loads.rho_r / one_minus
        * (1.0 + loads.alpha * nu)
        * (1.0 + loads.rho_r / (one_minus * (n + 1)))
    )
    return f_tilde, g_tilde


def wp_xstar(loads: DerivedLoads) -> float:
    """Stationary point of f_tilde + g_tilde; negative means no redundancy."""
    if loads.rho_w <= 0:
        raise DomainError("x* needs a positive write load")
    _require_write_stable(loads.rho_w)
    nu = loads.nu
    return (loads.rho_r * (1.0 + nu)) ** 2 * (1.0 / nu + loads.alpha) - 1.0


def wp_zero_redundancy(loads: DerivedLoads) -> bool:
    """True when the write-priority optimum has no secondary server."""
    rho_r, rho_w = loads.rho_r, loads.rho_w
    return (rho_r / (1.0 - rho_w)) ** 2 * ((1.0 - rho_w) / rho_w + loads.alpha) < 1.0


def wp_write_load_threshold(alpha: float, rho_r: float) -> float:
    """Write load below which the optimal redundancy falls as writes grow."""
    if not alpha > 1:
        raise DomainError(f"the threshold needs alpha > 1, got {alpha}")
    if not 0 <= rho_r < 1:
        raise DomainError(f"rho_r must lie in [0, 1), got {rho_r}")
    a1 = alpha - 1.0
    return min((-3.0 + math.sqrt(9.0 + 8.0 * a1)) / (4.0 * a1), 1.0 - rho_r)


def forkjoin_eta(lam: float, mu: float) -> float:
    """Smallest root in (0, 1) of x = exp(-mu (1 - x) / lam).

    x = 1 is always a root; it is kept out of the bracket.  The function
    x - exp(...) is concave, so the bracket [0, 1 - eps] holds exactly one
    sign change.
    """
    if not (lam > 0 and mu > 0):
        raise DomainError("rates must be positive")
    if lam >= mu:
        raise DomainError(f"no root below 1 when lambda >= mu ({lam} >= {mu})")
    ratio = mu / lam

    def h(x: float) -> float:
        return x - math.exp(-ratio * (1.0 - x))

    lo = 0.0
    eps = 1e-9
    hi = 1.0 - eps
    while h(hi) <= 0:
        eps *= 0.5
        hi = 1.0 - eps
        if eps < 1e-16:
            raise ConvergenceError("could not separate the root from x = 1")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(hi, 1e-300) or hi - lo <= 1e-300:
            break
    return 0.5 * (lo + hi)


def wp_bounds(params: SystemParams) -> tuple[float, float]:
    """Lower and upper bounds on the write-priority total mean count.

    The upper bound is exactly wp_mean_write + wp_mean_read.
    """
    loads = _require_instance_stable(params)
    reads = wp_mean_read(params)
    if params.lambda_w == 0:
        return reads, reads
    h_n = harmonic(params.n)
    eta = forkjoin_eta(params.lambda_w, params.mu_w)
    rho_w = loads.rho_w
    lower = rho_w * (1.0 / (1.0 - rho_w) + h_n / (1.0 - eta)) + reads
    upper = wp_mean_write(loads, params.n) + reads
    return lower, upper


def wp_write_bounds(params: SystemParams) -> tuple[float, float]:
    """Bounds on the write-priority mean write count alone (reads removed)."""
    lower, upper = wp_bounds(params)
    reads = wp_mean_read(params)
    return lower - reads, upper - reads


def wp_breakdown(params: SystemParams) -> WpBreakdown:
    loads = _require_instance_stable(params)
    f = wp_mean_write(loads, params.n)
    g = wp_mean_read(params)
    lower, upper = wp_bounds(params)
    eta = forkjoin_eta(params.lambda_w, params.mu_w) if params.lambda_w > 0 else 0.0
    return WpBreakdown(
        n=params.n,
        mean_write=f,
        mean_read=g,
        total=f + g,
        lower_bound_total=lower,
        upper_bound_total=upper,
        eta=eta,
    )


# --- read priority --------------------------------------------------------


def rp_mean_read(loads: DerivedLoads, n: int) -> float:
    """Mean reads under read priority: n+1 independent M/M/1 queues."""
    m = _check_n(n) + 1
    if not loads.rho_r < m:
        raise InstabilityError(f"read load {loads.rho_r:.6g} saturates {m} servers")
    return m * loads.rho_r / (m - loads.rho_r)


def unpooled_rates(n: int, lam: float, mu: float) -> tuple[float, ...]:
    """Service rates of the unpooled tandem standing in for an (n, n) fork-join."""
    n = _check_n(n)
    return tuple((n - i) * mu - (n - i - 1) * lam for i in range(n))


def rp_effective_rates(params: SystemParams) -> tuple[float, tuple[float, ...]]:
    """Primary and tandem-stage write rates thinned by P(no read at a server)."""
    loads = derive_loads(params)
    m = params.n + 1
    if not loads.rho_r < m:
        raise InstabilityError(f"read load {loads.rho_r:.6g} saturates {m} servers")
    idle = 1.0 - loads.rho_r / m
    mu0 = params.mu_w * idle
    beta = tuple(g * idle for g in unpooled_rates(params.n, params.lambda_w, params.mu_w))
    return mu0, beta


def rp_mean_write(params: SystemParams) -> float:
    """Mean unique writes under read priority, summed over the tandem stages."""
    _require_instance_stable(params)
    mu0, beta = rp_effective_rates(params)
    lam = params.lambda_w
    terms = [lam / (mu0 - lam)]
    terms.extend(lam / (b - lam) for b in reversed(beta))
    return math.fsum(terms)


def rp_delta(loads: DerivedLoads, n: int) -> float:
    return 1.0 - loads.rho_r * loads.nu / (n + 1 - loads.rho_r)


def rp_mean_write_digamma(params: SystemParams) -> float:
    """Same quantity as :func:`rp_mean_write`, written with the digamma function."""
    loads = _require_instance_stable(params)
    n = params.n
    m = n + 1
    nu = loads.nu
    rho_r = loads.rho_r
    primary = m * nu / (m - rho_r * (1.0 + nu))
    if n == 0:
        return primary
    d = rp_delta(loads, n)
    return primary + m * nu * (digamma(d + n) - digamma(d)) / (m - rho_r)


def rp_nonzero_redundancy(loads: DerivedLoads) -> bool:
    """True when one secondary beats none under read priority."""
    rho_r, rho_w = loads.rho_r, loads.rho_w
    if not (rho_w > 0 and rho_r + rho_w < 1):
        raise DomainError("needs rho_w > 0 and rho_r + rho_w < 1")
    lhs = 2.0 - rho_r / (1.0 - rho_r - rho_w)
    rhs = rho_r**2 / (1.0 - rho_r) * (1.0 / rho_w - 2.0 / (2.0 - rho_r))
    return lhs < rhs


def rp_breakdown(params: SystemParams) -> RpBreakdown:
    loads = _require_instance_stable(params)
    mu0, beta = rp_effective_rates(params)
    p = rp_mean_write(params)
    q = rp_mean_read(loads, params.n)
    return RpBreakdown(
        n=params.n,
        mean_write=p,
        mean_read=q,
        total=p + q,
        mu0=mu0,
        beta=beta,
        delta_n=rp_delta(loads, params.n),
    )


# --- optimizers -----------------------------------------------------------


def scan_argmin(
    values: Iterator[float], patience: int = SCAN_PATIENCE, cap: int = SCAN_CAP
) -> tuple[int, float]:
    """Argmin of a sequence indexed from 0, stopping once it keeps rising.

    The scan ends after ``patience`` consecutive strict increases that all
    sit above the running minimum.
    """
    best_n, best = -1, math.inf
    prev = math.inf
    rising = 0
    for n, value in enumerate(values):
        if n > cap:
            raise ConvergenceError(f"objective still decreasing after {cap} servers")
        if value < best:
            best_n, best = n, value
            rising = 0
        elif value > prev:
            rising += 1
            if rising >= patience:
                return best_n, best
        else:
            rising = 0
        prev = value
    if best_n < 0:
        raise ConvergenceError("empty objective sequence")
    return best_n, best


def _wp_exact_objective(params: SystemParams) -> Iterator[float]:
    loads = derive_loads(params)
    nu = loads.nu
    h = 0.0
    n = 0
    while True:
        if n > 0:
            h += 1.0 / n
        yield nu * (1.0 + h) + wp_mean_read(params.with_n(n))
        n += 1


def wp_optimal_n(params: SystemParams, method: Method = Method.CLOSED_FORM) -> OptimalRedundancy:
    """Latency-optimal number of secondaries under write priority.

    ``CLOSED_FORM`` compares the smooth surrogates at the floor and ceiling of
    x*; ``EXACT_SCAN`` walks the exact objective f(n) + g(n) upwards from 0.
    ``mean_at_n_star`` is always the exact f + g at the returned n.
    """
    loads = _require_all_n_stable(params)
    if method is Method.CLOSED_FORM:
        x_star = wp_xstar(loads)
        if x_star < 0:
            n_star = 0
        else:
            lo, hi = math.floor(x_star), math.ceil(x_star)
            n_star = min((lo, hi), key=lambda k: sum(wp_approx_forms(loads, k)))
        p = params.with_n(n_star)
        mean = wp_mean_write(loads, n_star) + wp_mean_read(p)
        return OptimalRedundancy(n_star, x_star, mean, method)
    if method is Method.EXACT_SCAN:
        n_star, mean = scan_argmin(_wp_exact_objective(params))
        return OptimalRedundancy(n_star, None, mean, method)
    raise DomainError(f"unsupported write-priority method {method}")


def _rp_objective(params: SystemParams) -> Iterator[float]:
    loads = derive_loads(params)
    n = 0
    while True:
        yield rp_mean_write(params.with_n(n)) + rp_mean_read(loads, n)
        n += 1


def rp_optimal_n(params: SystemParams) -> OptimalRedundancy:
    """Latency-optimal number of secondaries under read priority (numeric scan)."""
    _require_all_n_stable(params)
    n_star, mean = scan_argmin(_rp_objective(params))
    return OptimalRedundancy(n_star, None, mean, Method.NUMERIC_SCAN)


def objective(params: SystemParams, priority: str) -> Callable[[int], float]:
    """Exact total mean count as a function of n for ``priority`` in {read, write}."""
    loads = derive_loads(params)
    if priority == "write":
        return lambda n: wp_mean_write(loads, n) + wp_mean_read(params.with_n(n))
    if priority == "read":
        return lambda n: rp_mean_write(params.with_n(n)) + rp_mean_read(loads, n)
    raise DomainError(f"priority must be 'read' or 'write', got {priority!r}")
