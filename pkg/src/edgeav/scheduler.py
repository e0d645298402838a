"""Discrete-time simulation of job offloading under non-preemptive EDF.

Only the most heavily loaded logical core is simulated: ``ceil(V / c)``
vehicles share it. Every vehicle offloads its first job at time 0; a job
offloaded at ``o`` arrives at ``o + t`` and is due at ``o + d``. The vehicle
offloads its next job the moment the previous one finishes.

All times are integer milliseconds.

Two interchangeable kernels compute the same outcome: ``cython``
(``edgeav._kernel``, C binary heaps, used when built) and ``python``
(heapq fallback).

``EDGEAV_KERNEL=python`` forces the fallback.
"""

from __future__ import annotations

import heapq
import os
from dataclasses import dataclass
from math import ceil
from typing import Callable, Iterator, NamedTuple

try:
    from edgeav._kernel import sched_core as _cython_core
except ImportError:  # extension not built
    _cython_core = None


@dataclass(frozen=True)
class SchedParams:
    cores: int
    transfer_ms: int
    exec_ms: int
    vehicles: int
    deadline_ms: int
    period_ms: int

    def __post_init__(self):
        if self.cores < 1 or self.vehicles < 1:
            raise ValueError("cores and vehicles must be >= 1")
        if self.exec_ms < 1 or self.deadline_ms < 1:
            raise ValueError("exec_ms and deadline_ms must be >= 1")
        if self.transfer_ms < 0:
            raise ValueError("transfer_ms must be >= 0")
        if self.period_ms < self.exec_ms:
            raise ValueError("working period shorter than one job")

    @property
    def vehicles_per_core(self) -> int:
        return ceil(self.vehicles / self.cores)


class SchedOutcome(NamedTuple):
    deadline_misses: int
    max_response: int
    jobs_completed: int


class JobRecord(NamedTuple):
    vehicle: int
    offload_ms: int
    arrive_ms: int
    start_ms: int
    finish_ms: int
    deadline_ms: int
    missed: bool


def _python_core(vehicles, transfer, exec_time, deadline, period, log=None):
    # pending: (arrival, vehicle, offload); ready: (abs deadline, vehicle, offload)
    pending = [(transfer, i, 0) for i in range(vehicles)]
    ready: list[tuple[int, int, int]] = []
    k = misses = rmax = done = 0
    while k < period:
        while pending and pending[0][0] <= k:
            _, i, o = heapq.heappop(pending)
            heapq.heappush(ready, (o + deadline, i, o))
        if not ready:
            # nothing arrived: skip the idle slots in one step
            k = pending[0][0]
            continue
        if k > period - exec_time:
            break
        due, j, o = heapq.heappop(ready)
        finish = k + exec_time
        missed = finish > due
        if log is not None:
            log.append(JobRecord(j, o, o + transfer, k, finish, due, missed))
        k = finish
        misses += missed
        rmax = max(rmax, finish - o)
        done += 1
        heapq.heappush(pending, (finish + transfer, j, finish))
    return misses, rmax, done


KERNELS: dict[str, Callable] = {"python": _python_core}
if _cython_core is not None:
    KERNELS["cython"] = _cython_core


def default_kernel() -> str:
    forced = os.environ.get("EDGEAV_KERNEL")
    if forced:
        if forced not in KERNELS:
            raise RuntimeError(f"kernel {forced!r} unavailable; have {sorted(KERNELS)}")
        return forced
    return "cython" if "cython" in KERNELS else "python"


def sched(params: SchedParams, kernel: str | None = None) -> SchedOutcome:
    """Simulate one working period and return misses and worst response."""
    core = KERNELS[kernel or default_kernel()]
    out = core(
        params.vehicles_per_core,
        params.transfer_ms,
        params.exec_ms,
        params.deadline_ms,
        params.period_ms,
    )
    return SchedOutcome(*out)


def sched_events(params: SchedParams) -> Iterator[JobRecord]:
    """Per-job event log of one simulation, in processing order."""
    log: list[JobRecord] = []
    _python_core(
        params.vehicles_per_core,
        params.transfer_ms,
        params.exec_ms,
        params.deadline_ms,
        params.period_ms,
        log=log,
    )
    return iter(log)
