"""Energy, latency and delivery metrics computed from simulator output."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .params import RadioPowerProfile

STATES = ("Tx", "Rx", "Poll", "Sleep")
Z95 = 1.959964

# trace codes follow sim.protocols: TX, RX, POLL, SLEEP = 0, 1, 2, 3
Interval = tuple[int, float, float]


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class SimResult:
    total_energy: float
    per_state_time: dict[str, float]
    state_share: dict[str, float]
    mean_latency: float | None
    delivery_ratio: float
    runtime_seconds: float = 0.0
    sim_end: float = 0.0
    guard_expired: bool = False


@dataclass(frozen=True)
class CiSummary:
    mean: float
    half_width: float
    n_runs: int
    level: float = 0.95

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def overlaps(self, other: CiSummary) -> bool:
        return self.low <= other.high and other.low <= self.high


def check_coverage(trace: Sequence[Sequence[Interval]], sim_end: float | None = None) -> float:
    """Verify every node's intervals tile [0, end] with no gap or overlap; return end."""
    end = sim_end
    for node, intervals in enumerate(trace):
        cursor = 0.0
        for state, a, b in intervals:
            if not 0 <= state < len(STATES):
                raise TraceError(f"node {node}: unknown state code {state!r}")
            if a != cursor:
                kind = "gap" if a > cursor else "overlap"
                raise TraceError(f"node {node}: {kind} at t={cursor!r} (next interval starts at {a!r})")
            if b < a:
                raise TraceError(f"node {node}: interval ends before it starts ({a!r}, {b!r})")
            cursor = b
        if end is None:
            end = cursor
        elif cursor != end:
            raise TraceError(f"node {node}: trace ends at {cursor!r}, expected {end!r}")
    return 0.0 if end is None else end


def energy_of(trace: Sequence[Sequence[Interval]], power: RadioPowerProfile) -> tuple[float, dict[str, float]]:
    """Total energy in joules and the time spent in each state, summed over nodes."""
    check_coverage(trace)
    times = [0.0, 0.0, 0.0, 0.0]
    for intervals in trace:
        for state, a, b in intervals:
            times[state] += b - a
    watts = (power.p_tx, power.p_rx, power.p_poll, power.p_sleep)
    energy = math.fsum(t * w for t, w in zip(times, watts))
    return energy, dict(zip(STATES, times))


def state_shares(per_state_time: dict[str, float]) -> dict[str, float]:
    total = math.fsum(per_state_time.values())
    if total <= 0:
        return {s: 0.0 for s in STATES}
    return {s: per_state_time[s] / total for s in STATES}


def latency_of(reception_times: Sequence[float]) -> float | None:
    """Mean reception time of the delivered packets, measured from t = 0."""
    if not reception_times:
        return None
    return math.fsum(reception_times) / len(reception_times)


def delivery_of(received: int, buffer_size: int) -> float:
    if buffer_size == 0:
        return 1.0
    if not 0 <= received <= buffer_size:
        raise ValueError(f"received={received} outside [0, {buffer_size}]")
    return received / buffer_size


def confidence_interval(samples: Sequence[float]) -> CiSummary:
    """Normal-approximation 95% interval for the mean."""
    n = len(samples)
    if n < 2:
        raise ValueError("a confidence interval needs at least two samples")
    mean = math.fsum(samples) / n
    if all(x == samples[0] for x in samples):
        return CiSummary(samples[0], 0.0, n)
    sd = statistics.stdev(samples)
    return CiSummary(mean, Z95 * sd / math.sqrt(n), n)


def summarize(out, power: RadioPowerProfile, runtime_seconds: float = 0.0) -> SimResult:
    """Reduce one simulator run to its metrics."""
    energy, times = energy_of(out.traces, power)
    return SimResult(
        total_energy=energy,
        per_state_time=times,
        state_share=state_shares(times),
        mean_latency=latency_of(out.latencies),
        delivery_ratio=delivery_of(out.received, out.buffer_size),
        runtime_seconds=runtime_seconds,
        sim_end=out.sim_end,
        guard_expired=out.guard_expired,
    )
