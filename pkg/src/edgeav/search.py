"""Minimum (channel capacity, core count) search for zero deadline misses.

The search walks a fixed lattice: capacity starts at the value that makes the
transfer time equal its maximum allowance and grows by ``delta_b``; for each
capacity the core count restarts at 1 and grows by ``delta_c`` until the
simulation shows zero misses or the worst response time stops changing by
more than ``epsilon`` (relative).

Units are SI (bits, seconds, m/s) here; conversion to integer milliseconds
happens only at the scheduler boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, floor
from typing import Callable, Optional

from edgeav.scheduler import SchedOutcome, SchedParams, sched

# float guard for ms conversions: 279.99999999 is 280 ms, not 279
_MS_EPS = 1e-9


class InfeasibleError(ValueError):
    """The blind distance cannot be met at this speed by any capacity.

    ``max_speed`` and ``min_blind`` are the strict bounds that restore a
    positive transfer-time allowance.
    """

    def __init__(self, blind, speed, max_speed, min_blind):
        self.blind = blind
        self.speed = speed
        self.max_speed = max_speed
        self.min_blind = min_blind
        super().__init__(
            f"no transfer time left: L={blind} m at S={speed:.4g} m/s; "
            f"need S < {max_speed:.4g} m/s or L > {min_blind:.4g} m"
        )


class SearchBudgetError(RuntimeError):
    """The search exceeded its simulation budget without a zero-miss config."""

    def __init__(self, message, calls):
        self.calls = calls
        super().__init__(message)


@dataclass(frozen=True)
class SearchParams:
    blind_distance: float  # m
    vehicles: float
    speed: float  # m/s
    data_size: float = 1.8e6  # bits
    exec_time: float = 0.016  # s
    working_period: float = 60.0  # s
    eta: float = 2.0
    delta_b: float = 2e6  # bits/s
    delta_c: int = 5
    epsilon: float = 0.005
    miss_sentinel: int = 100
    variation_sentinel: float = 100.0
    max_calls: int = 1_000_000

    def __post_init__(self):
        if self.blind_distance <= 0 or self.data_size <= 0 or self.exec_time <= 0:
            raise ValueError("blind distance, data size and exec time must be > 0")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")
        if self.eta < 1:
            raise ValueError("eta must be >= 1")
        if self.vehicles <= 0:
            raise ValueError("search needs at least one vehicle")
        if self.delta_b <= 0 or self.delta_c < 1 or self.epsilon <= 0:
            raise ValueError("increments and epsilon must be positive")


@dataclass(frozen=True)
class EdgeConfig:
    capacity: float  # bits/s
    cores: int
    search_calls: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.capacity < 0 or self.cores < 0:
            raise ValueError("capacity and cores must be non-negative")


def relative_deadline(blind: float, speed: float) -> float:
    """Seconds an offloaded job may take before the AV covers ``blind`` meters."""
    if speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    return blind / speed


def max_transfer_time(blind, speed, eta, exec_time) -> float:
    return relative_deadline(blind, speed) - eta * exec_time


def initial_capacity(data_size, vehicles, blind, speed, eta, exec_time) -> float:
    """Capacity (bits/s) at which every vehicle's upload takes the full allowance."""
    t_max = max_transfer_time(blind, speed, eta, exec_time)
    if t_max <= 0:
        raise InfeasibleError(
            blind, speed, max_speed=blind / (eta * exec_time), min_blind=eta * exec_time * speed
        )
    return data_size * vehicles / t_max


def to_ms_ceil(seconds: float) -> int:
    return ceil(seconds * 1000 - _MS_EPS)


def to_ms_floor(seconds: float) -> int:
    # a response of n ms misses a deadline of x ms iff n > floor(x)
    return floor(seconds * 1000 + _MS_EPS)


def transfer_ms(data_size, vehicles, capacity) -> int:
    return to_ms_ceil(data_size * vehicles / capacity)


def sched_params(p: SearchParams, cores: int, t_ms: int) -> SchedParams:
    return SchedParams(
        cores=cores,
        transfer_ms=t_ms,
        exec_ms=to_ms_ceil(p.exec_time),
        vehicles=ceil(p.vehicles - _MS_EPS),
        deadline_ms=to_ms_floor(relative_deadline(p.blind_distance, p.speed)),
        period_ms=to_ms_floor(p.working_period),
    )


Probe = Callable[[float, int, SchedOutcome], None]
Simulator = Callable[[SchedParams], SchedOutcome]


def configuration_search(
    p: SearchParams,
    simulate: Simulator = sched,
    on_probe: Optional[Probe] = None,
) -> EdgeConfig:
    """Return the first lattice configuration with zero deadline misses.

    Capacities that round to the same whole-ms transfer time replay an
    identical inner loop, so the outer loop jumps straight to the next
    capacity that shortens the transfer time. The result is the one the
    step-by-step walk would return; only ``search_calls`` differs (it counts
    simulations actually run).
    """
    b0 = initial_capacity(p.data_size, p.vehicles, p.blind_distance, p.speed, p.eta, p.exec_time)
    load = p.data_size * p.vehicles
    step = 0
    calls = 0
    misses = p.miss_sentinel
    while misses > 0:
        b = b0 + step * p.delta_b
        t_ms = transfer_ms(p.data_size, p.vehicles, b)
        cores = 1
        rmax = 0
        variation = p.variation_sentinel
        while misses > 0 and variation > p.epsilon:
            if calls >= p.max_calls:
                raise SearchBudgetError(f"search budget of {p.max_calls} simulations exhausted", calls)
            out = simulate(sched_params(p, cores, t_ms))
            calls += 1
            if on_probe is not None:
                on_probe(b, cores, out)
            misses, rtemp = out.deadline_misses, out.max_response
            variation = abs((rmax - rtemp) / rtemp) if rtemp else p.variation_sentinel
            rmax = rtemp
            if misses > 0 and variation > p.epsilon:
                cores += p.delta_c
        if misses > 0:
            if t_ms <= 1:
                raise SearchBudgetError(
                    "transfer time at its 1 ms floor and misses remain; "
                    "further capacity cannot help",
                    calls,
                )
            # smallest lattice step whose transfer time is below t_ms
            prev = step
            need = load / ((t_ms - 1) / 1000)
            step = max(prev + 1, ceil((need - b0) / p.delta_b - _MS_EPS))
            while transfer_ms(p.data_size, p.vehicles, b0 + step * p.delta_b) >= t_ms:
                step += 1
            while step - 1 > prev and transfer_ms(p.data_size, p.vehicles, b0 + (step - 1) * p.delta_b) < t_ms:
                step -= 1

    final = simulate(sched_params(p, cores, t_ms))
    if final.deadline_misses:
        raise AssertionError(f"re-simulation of ({b}, {cores}) shows {final.deadline_misses} misses")
    return EdgeConfig(capacity=b, cores=cores, search_calls=calls)
