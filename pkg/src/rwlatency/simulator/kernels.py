"""Single-server, two-class priority queue kernels.

Each server sees a high-priority and a low-priority class, both FCFS within
the class.  Given sorted arrival times and service requirements, the kernels
return the departure time of every job.  Routing in the replicated system
never depends on queue state, so the whole system can be simulated one
server at a time: the primary first, then each secondary fed with the
primary's write departures.

The kernels walk arrivals and completions in time order.  They are compiled
with numba; the plain Python versions stay reachable as ``.py_func``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fcfs_departures(arr, svc):
    """Lindley recursion for a single FCFS queue."""
    dep = np.empty(arr.shape[0])
    free = 0.0
    for k in range(arr.shape[0]):
        start = arr[k] if arr[k] > free else free
        free = start + svc[k]
        dep[k] = free
    return dep


@njit(cache=True)
def preemptive_low_departures(hi_arr, hi_dep, lo_arr, lo_svc):
    """Low-class departures under preemptive-resume priority.

    The low class only progresses while no high-priority job is present, so
    it is enough to know the high class busy periods.
    """
    m = hi_arr.shape[0]
    starts = np.empty(m + 1)
    ends = np.empty(m + 1)
    nb = 0
    for k in range(m):
        if nb == 0 or hi_arr[k] > ends[nb - 1]:
            starts[nb] = hi_arr[k]
            ends[nb] = hi_dep[k]
            nb += 1
        else:
            ends[nb - 1] = hi_dep[k]
    starts[nb] = np.inf
    ends[nb] = np.inf

    dep = np.empty(lo_arr.shape[0])
    free = 0.0
    b = 0
    for k in range(lo_arr.shape[0]):
        t = lo_arr[k] if lo_arr[k] > free else free
        work = lo_svc[k]
        while True:
            while ends[b] <= t:
                b += 1
            if starts[b] <= t:
                t = ends[b]
                b += 1
                continue
            gap = starts[b] - t
            if work <= gap:
                t += work
                break
            work -= gap
            t = ends[b]
            b += 1
        dep[k] = t
        free = t
    return dep


@njit(cache=True)
def nonpreemptive_departures(hi_arr, hi_svc, lo_arr, lo_svc):
    """Departures of both classes under non-preemptive priority.

    Whenever the server frees up it takes the oldest waiting high-priority
    job, else the oldest waiting low-priority job; a job in service always
    runs to completion.
    """
    nh = hi_arr.shape[0]
    nl = lo_arr.shape[0]
    hd = np.empty(nh)
    ld = np.empty(nl)
    i = 0
    j = 0
    t = 0.0
    while i < nh or j < nl:
        if i < nh and hi_arr[i] <= t:
            t += hi_svc[i]
            hd[i] = t
            i += 1
        elif j < nl and lo_arr[j] <= t:
            t += lo_svc[j]
            ld[j] = t
            j += 1
        else:
            nxt = np.inf
            if i < nh:
                nxt = hi_arr[i]
            if j < nl and lo_arr[j] < nxt:
                nxt = lo_arr[j]
            t = nxt
    return hd, ld


def priority_server(hi_arr, hi_svc, lo_arr, lo_svc, preemptive):
    """Departures ``(high, low)`` for one server."""
    hi_arr = np.ascontiguousarray(hi_arr, dtype=np.float64)
    hi_svc = np.ascontiguousarray(hi_svc, dtype=np.float64)
    lo_arr = np.ascontiguousarray(lo_arr, dtype=np.float64)
    lo_svc = np.ascontiguousarray(lo_svc, dtype=np.float64)
    if preemptive:
        hd = fcfs_departures(hi_arr, hi_svc)
        return hd, preemptive_low_departures(hi_arr, hd, lo_arr, lo_svc)
    return nonpreemptive_departures(hi_arr, hi_svc, lo_arr, lo_svc)
