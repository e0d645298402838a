"""Independent reference implementations used only by the tests.

They share no code with the package: the scheduler oracle is an
event-queue simulation, the search oracles walk the lattice step by step or
enumerate it outright.
"""

import heapq
import math

ARRIVAL, COMPLETION = "arrival", "completion"


def event_queue_sched(cores, transfer, exec_time, vehicles, deadline, period):
    """Non-preemptive EDF on the busiest core, driven by an event list.

    Returns (misses, max_response, completed).
    """
    n = -(-vehicles // cores)
    events = []  # (time, seq, kind, vehicle, offload)
    seq = 0

    def post(time, kind, vehicle, offload):
        nonlocal seq
        heapq.heappush(events, (time, seq, kind, vehicle, offload))
        seq += 1

    for v in range(n):
        post(transfer, ARRIVAL, v, 0)

    ready = []  # (absolute deadline, vehicle, offload)
    busy = False
    misses = rmax = done = 0
    while events:
        now = events[0][0]
        # drain everything that happens at `now` before dispatching
        while events and events[0][0] == now:
            _, _, kind, v, offload = heapq.heappop(events)
            if kind == ARRIVAL:
                heapq.heappush(ready, (offload + deadline, v, offload))
            else:
                busy = False
                done += 1
                rmax = max(rmax, now - offload)
                if now > offload + deadline:
                    misses += 1
                post(now + transfer, ARRIVAL, v, now)
        if not busy and ready:
            if now > period - exec_time:
                break
            _, v, offload = heapq.heappop(ready)
            busy = True
            post(now + exec_time, COMPLETION, v, offload)
    return misses, rmax, done


def _ms_up(x):
    return math.ceil(x * 1000 - 1e-9)


def _ms_down(x):
    return math.floor(x * 1000 + 1e-9)


def _case(cores, t_ms, L, S, V, E, W):
    return (cores, t_ms, _ms_up(E), math.ceil(V - 1e-9), _ms_down(L / S), _ms_down(W))


def literal_search(L, S, V, D, E, W, eta, db, dc, eps, sentinel=100, max_steps=100000):
    """Outer loop one capacity step at a time, no shortcuts."""
    b0 = D * V / (L / S - eta * E)
    misses = sentinel
    step = -1
    calls = 0
    while misses > 0:
        step += 1
        if step > max_steps:
            raise RuntimeError("literal search did not converge")
        b = b0 + step * db
        t_ms = _ms_up(D * V / b)
        c, rmax, var = 1, 0, float(sentinel)
        while misses > 0 and var > eps:
            misses, rtemp, _ = event_queue_sched(*_case(c, t_ms, L, S, V, E, W))
            calls += 1
            var = abs((rmax - rtemp) / rtemp) if rtemp else float(sentinel)
            rmax = rtemp
            if misses > 0 and var > eps:
                c += dc
    return b, c, calls


def lattice_minimum(L, S, V, D, E, W, eta, db, dc, max_steps=200):
    """Smallest lattice capacity with any zero-miss core count, and the
    fewest cores at that capacity. Cores beyond V change nothing."""
    b0 = D * V / (L / S - eta * E)
    vmax = math.ceil(V - 1e-9)
    for step in range(max_steps + 1):
        b = b0 + step * db
        t_ms = _ms_up(D * V / b)
        for c in range(1, vmax + dc + 1, dc):
            if event_queue_sched(*_case(c, t_ms, L, S, V, E, W))[0] == 0:
                return b, c
    raise RuntimeError("no feasible lattice point")
