"""Plain event-queue simulation of the whole system.

Slow but direct: one global clock, a heap of pending events ordered by
(time, sequence number), and explicit per-server queues with preemption.
It consumes the same :class:`~rwlatency.simulator.engine.Workload` as the
fast path, so the two can be compared departure by departure.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from rwlatency.simulator.engine import PolicyConfig, Preemption, Priority, Trace, Workload

READ, WRITE = 0, 1
_ARRIVE, _DONE = 0, 1


class _Server:
    def __init__(self):
        self.queues = {READ: deque(), WRITE: deque()}
        self.job = None  # (cls, job id, remaining work, start time)
        self.version = 0


def simulate(workload: Workload, policy: PolicyConfig) -> tuple[Trace, int]:
    """Return the trace and the number of events popped from the heap."""
    w = workload
    n = w.secondary_service.shape[1]
    high = WRITE if policy.priority is Priority.WRITE else READ
    low = 1 - high
    preemptive = policy.preemption is Preemption.PREEMPTIVE_RESUME

    servers = [_Server() for _ in range(n + 1)]
    read_dep = np.full(w.read_arrivals.size, np.nan)
    primary_dep = np.full(w.write_arrivals.size, np.nan)
    secondary_dep = np.full((w.write_arrivals.size, n), np.nan)

    heap = []
    seq = 0

    def push(t, kind, payload):
        nonlocal seq
        heapq.heappush(heap, (t, seq, kind, payload))
        seq += 1

    def work(s, cls, k):
        if cls == READ:
            return w.read_service[k]
        return w.primary_service[k] if s == 0 else w.secondary_service[k, s - 1]

    def start_next(s, t):
        srv = servers[s]
        for cls in (high, low):
            if srv.queues[cls]:
                k, remaining = srv.queues[cls].popleft()
                srv.job = (cls, k, remaining, t)
                srv.version += 1
                push(t + remaining, _DONE, (s, srv.version))
                return
        srv.job = None

    def arrive(s, cls, k, t):
        srv = servers[s]
        srv.queues[cls].append((k, work(s, cls, k)))
        if srv.job is None:
            start_next(s, t)
        elif preemptive and cls == high and srv.job[0] == low:
            _, j, remaining, started = srv.job
            srv.queues[low].appendleft((j, remaining - (t - started)))
            start_next(s, t)

    for k, t in enumerate(w.read_arrivals):
        push(t, _ARRIVE, (int(w.read_servers[k]), READ, k))
    for k, t in enumerate(w.write_arrivals):
        push(t, _ARRIVE, (0, WRITE, k))

    events = 0
    while heap:
        t, _, kind, payload = heapq.heappop(heap)
        if kind == _ARRIVE:
            events += 1
            arrive(*payload, t)
            continue
        s, version = payload
        srv = servers[s]
        if version != srv.version:
            continue  # completion cancelled by a preemption
        events += 1
        cls, k, _, _ = srv.job
        if cls == READ:
            read_dep[k] = t
        elif s == 0:
            primary_dep[k] = t
            for j in range(1, n + 1):
                push(t, _ARRIVE, (j, WRITE, k))
        else:
            secondary_dep[k, s - 1] = t
        start_next(s, t)

    write_dep = secondary_dep.max(axis=1) if n > 0 else primary_dep.copy()
    return Trace(read_dep, primary_dep, secondary_dep, write_dep), events
