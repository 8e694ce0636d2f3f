import itertools
import math
import warnings

import numpy as np
import pytest

from rwlatency import analytic as A
from rwlatency.analytic import SystemParams
from rwlatency.errors import DomainError, InstabilityError, LittleLawViolation, StabilityWarning
from rwlatency.simulator import (
    Pareto,
    PolicyConfig,
    Preemption,
    Priority,
    Routing,
    ShiftedExponential,
    SimConfig,
    aggregate,
    draw_workload,
    empirical_optimal_n,
    propagate,
    run,
    run_replication,
)
from rwlatency.simulator import kernels, reference
from rwlatency.simulator.engine import ReplicationMetrics, measure

POLICIES = [PolicyConfig(*c) for c in itertools.product(Priority, Preemption, Routing)]


TRACE_FIELDS = ("read_departures", "primary_departures", "secondary_departures", "write_departures")


# --- kernels ----------------------------------------------------------------


def test_fcfs_kernel_by_hand():
    arr = np.array([0.0, 1.0, 1.5, 10.0])
    svc = np.array([2.0, 1.0, 1.0, 0.5])
    np.testing.assert_allclose(kernels.fcfs_departures(arr, svc), [2.0, 3.0, 4.0, 10.5])


def test_preemptive_kernel_by_hand():
    # High job busy on [1, 3); a low job of work 2 starting at 0 resumes after it.
    hd = kernels.fcfs_departures(np.array([1.0]), np.array([2.0]))
    low = kernels.preemptive_low_departures(np.array([1.0]), hd, np.array([0.0, 0.5]), np.array([2.0, 1.0]))
    np.testing.assert_allclose(low, [4.0, 5.0])


def test_nonpreemptive_kernel_by_hand():
    # The low job in service at time 1 finishes before the high job starts.
    hd, ld = kernels.nonpreemptive_departures(
        np.array([1.0, 1.2]), np.array([1.0, 1.0]), np.array([0.0, 0.5]), np.array([2.0, 1.0])
    )
    np.testing.assert_allclose(ld, [2.0, 5.0])
    np.testing.assert_allclose(hd, [3.0, 4.0])


@pytest.mark.parametrize("policy", POLICIES, ids=lambda p: f"{p.priority.value}-{p.preemption.value}-{p.routing.value}")
@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("read_dist", [None, Pareto(2.5, 0.05)], ids=["exp", "pareto"])
def test_kernels_match_event_queue_reference(policy, n, read_dist):
    cfg = SimConfig(SystemParams(3.0, 0.5, 10, 1, n), policy, read_dist=read_dist, horizon=1500)
    wl = draw_workload(cfg, 11)
    fast = propagate(wl, policy)
    slow, events = reference.simulate(wl, policy)
    for name in TRACE_FIELDS:
        np.testing.assert_allclose(getattr(fast, name), getattr(slow, name), rtol=0, atol=1e-9)
    assert measure(cfg, wl, fast).events_processed == events


# --- workload ---------------------------------------------------------------


def test_round_robin_starts_at_primary():
    cfg = SimConfig(SystemParams(5, 0.1, 10, 1, 2), PolicyConfig(routing=Routing.ROUND_ROBIN), horizon=100)
    wl = draw_workload(cfg, 3)
    np.testing.assert_array_equal(wl.read_servers[:7], [0, 1, 2, 0, 1, 2, 0])


def test_reads_are_common_across_n():
    base = SimConfig(SystemParams(3, 0.5, 10, 1), horizon=500)
    a = draw_workload(base.with_n(1), 5)
    b = draw_workload(base.with_n(4), 5)
    np.testing.assert_array_equal(a.read_arrivals, b.read_arrivals)
    np.testing.assert_array_equal(a.read_service, b.read_service)
    np.testing.assert_array_equal(a.write_arrivals, b.write_arrivals)


def test_arrival_rates():
    wl = draw_workload(SimConfig(SystemParams(3, 0.5, 10, 1), horizon=2e4), 9)
    assert wl.read_arrivals.size / 2e4 == pytest.approx(3, rel=0.02)
    assert wl.write_arrivals.size / 2e4 == pytest.approx(0.5, rel=0.03)
    assert np.all(np.diff(wl.read_arrivals) >= 0)


# --- statistical checks against closed forms ---------------------------------


def test_mm1_sanity():
    res = run(SimConfig(SystemParams(0, 0.5, 1, 1, 0), horizon=1e6))
    assert res.mean_write == pytest.approx(1.0, rel=0.03)
    assert res.mean_read == 0


def test_mm1_ci_halfwidth():
    res = run(SimConfig(SystemParams(0, 0.5, 1, 1, 0)))
    assert res.ci_halfwidth["mean_write"] < 0.03


def test_nonpreemptive_single_server_matches_cobham():
    lr, lw, mr, mw = 3.0, 0.4, 10.0, 1.0
    cfg = SimConfig(SystemParams(lr, lw, mr, mw, 0), PolicyConfig(Priority.WRITE, Preemption.NON_PREEMPTIVE))
    res = run(cfg)
    resid = lw / mw**2 + lr / mr**2
    rh, rl = lw / mw, lr / mr
    write = lw * (resid / (1 - rh) + 1 / mw)
    read = lr * (resid / ((1 - rh) * (1 - rh - rl)) + 1 / mr)
    assert abs(res.mean_write - write) <= 3 * res.ci_halfwidth["mean_write"]
    assert abs(res.mean_read - read) <= 3 * res.ci_halfwidth["mean_read"]


def test_write_priority_isolation():
    base = SimConfig(SystemParams(0, 0.6, 10, 1, 2), replications=5, horizon=5e4)
    alone = run(base)
    loaded = run(SimConfig(SystemParams(3, 0.6, 10, 1, 2), replications=5, horizon=5e4))
    # Writes preempt reads and use their own random streams, so they are unaffected.
    assert alone.mean_write == loaded.mean_write
    joint = alone.ci_halfwidth["mean_write"] + loaded.ci_halfwidth["mean_write"]
    assert abs(alone.mean_write - loaded.mean_write) <= joint


@pytest.mark.parametrize("n", [1, 3])
def test_read_priority_reads_are_exact(n):
    p = SystemParams(3.6, 0.6, 10, 1, n)
    res = run(SimConfig(p, PolicyConfig(Priority.READ), replications=10, horizon=1e5))
    q = A.rp_mean_read(A.derive_loads(p), n)
    assert abs(res.mean_read - q) <= res.ci_halfwidth["mean_read"] * 1.5


@pytest.mark.parametrize("n", [1, 2, 3])
def test_write_priority_bound_sandwich(n):
    p = SystemParams(3.6, 0.6, 10, 1, n)
    res = run(SimConfig(p, replications=10, horizon=1e5))
    lo, hi = A.wp_write_bounds(p)
    ci = res.ci_halfwidth["mean_write"]
    assert lo - ci <= res.mean_write <= hi + ci


# --- traces and bookkeeping --------------------------------------------------


@pytest.mark.parametrize("policy", POLICIES[:4], ids=lambda p: f"{p.preemption.value}-{p.routing.value}")
def test_fcfs_chain_on_traces(policy):
    cfg = SimConfig(SystemParams(3.6, 0.6, 10, 1, 3), policy, horizon=2e4)
    metrics, wl, tr = run_replication(cfg, 4, return_trace=True)
    assert np.all(np.diff(tr.secondary_departures, axis=0) >= 0)
    assert np.all(tr.primary_departures >= wl.write_arrivals + wl.primary_service - 1e-12)
    assert np.all(tr.secondary_departures >= tr.primary_departures[:, None])
    np.testing.assert_array_equal(tr.write_departures, tr.secondary_departures.max(axis=1))
    assert metrics.mean_total == metrics.mean_read + metrics.mean_write


def test_determinism():
    cfg = SimConfig(SystemParams(3, 0.6, 10, 1, 2), replications=3, horizon=2e4, seed=77)
    assert run(cfg) == run(cfg)
    other = run(SimConfig(SystemParams(3, 0.6, 10, 1, 2), replications=3, horizon=2e4, seed=78))
    assert other.mean_total != run(cfg).mean_total
    a = run_replication(cfg, 5, return_trace=True)[2]
    b = run_replication(cfg, 5, return_trace=True)[2]
    np.testing.assert_array_equal(a.read_departures, b.read_departures)


def test_single_replication_has_no_ci():
    res = run(SimConfig(SystemParams(1, 0.3, 10, 1, 1), replications=1, horizon=2e4))
    assert all(v is None for v in res.ci_halfwidth.values())
    assert len(res.replications) == 1


def test_little_law_is_checked():
    good = ReplicationMetrics(2.0, 1.0, 1.0, 0.5, 2.0, 2.0, 0.5, 10)
    assert aggregate([good, good], 0.5).mean_total == 2.0
    bad = ReplicationMetrics(2.0, 1.0, 1.0, 0.6, 2.0, 2.0, 0.5, 10)
    with pytest.raises(LittleLawViolation):
        aggregate([bad, bad], 0.5)
    # Not asserted outside the stability region.
    aggregate([bad], -0.1)


def test_unstable_run_warns_but_completes():
    cfg = SimConfig(SystemParams(0, 1.2, 10, 1, 0), replications=2, horizon=2e3)
    with pytest.warns(StabilityWarning):
        res = run(cfg)
    assert math.isfinite(res.mean_write) and res.mean_write > 50


def test_shifted_exponential_stability_margin():
    rd, wd = ShiftedExponential(136.096, 0.015), ShiftedExponential(12.43, 0.105)
    cfg = SimConfig(SystemParams(15, 0.3, 1, 1, 1), read_dist=rd, write_dist=wd)
    assert cfg.stability_margin == pytest.approx(1 - 0.3 * wd.mean - 15 * rd.mean / 2)


def test_empirical_optimal_n():
    base = SimConfig(SystemParams(3.6, 0.6, 10, 1), PolicyConfig(Priority.READ), replications=4, horizon=2e4)
    n_star, curve = empirical_optimal_n(base, range(1, 5))
    assert [n for n, _ in curve] == [1, 2, 3, 4]
    assert n_star == min(curve, key=lambda item: item[1].mean_total)[0]
    with pytest.raises(InstabilityError):
        empirical_optimal_n(SimConfig(SystemParams(9, 0.6, 10, 1), horizon=100), range(0, 3))
    with pytest.raises(DomainError):
        empirical_optimal_n(base, [])


def test_config_validation():
    p = SystemParams(1, 0.1, 10, 1)
    for kwargs in ({"horizon": 0}, {"warmup_fraction": 1.0}, {"replications": 0}, {"seed": -1}):
        with pytest.raises(DomainError):
            SimConfig(p, **kwargs)
    assert PolicyConfig("read", "non-preemptive", "round-robin").priority is Priority.READ
    with pytest.raises(ValueError):
        PolicyConfig(routing="fastest")


def test_no_warning_when_stable():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run(SimConfig(SystemParams(1, 0.3, 10, 1, 1), replications=2, horizon=5e3))
