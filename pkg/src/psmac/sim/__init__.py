"""Discrete-event simulation of the three protocols on a single-hop star."""

from .kernel import (
    Event,
    EventQueue,
    GuardExpired,
    SchedulingError,
    SimOptions,
    SimOutput,
    Simulator,
    Transmission,
    dump_trace,
    dump_transmissions,
    run,
)
from .protocols import IllegalTransition, NodeState, bmac_step, lamac_step, xmac_step

__all__ = [
    "Event",
    "EventQueue",
    "GuardExpired",
    "IllegalTransition",
    "NodeState",
    "SchedulingError",
    "SimOptions",
    "SimOutput",
    "Simulator",
    "Transmission",
    "bmac_step",
    "dump_trace",
    "dump_transmissions",
    "lamac_step",
    "run",
    "xmac_step",
]
