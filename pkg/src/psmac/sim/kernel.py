"""Discrete-event kernel: event queue, shared radio channel and radio-state traces.

The star is modelled as a single collision domain: every node hears every
transmission, and any two frames that overlap in time are both corrupted.
A listening node only locks onto frames that *start* after it began
listening; frames already on the air when it woke up are invisible, except
for packetized long preambles, which become audible at their next packet
boundary.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..params import NetworkScenario, Protocol, RadioPowerProfile, TimingProfile, validate
from . import protocols as proto
from .protocols import (
    ACK_TIMEOUT,
    BACKOFF_FIRE,
    BROADCAST,
    DATA,
    LISTEN,
    LONG_PREAMBLE,
    POLL,
    POLL_END,
    RENDEZVOUS_FIRE,
    RX,
    RX_END,
    SINK,
    SLEEP,
    SLEEP_END,
    TIMER,
    TRANSMIT,
    TX,
    TX_END,
    TX_START,
    WAKE_UP,
    NodeState,
)

STATE_NAMES = ("Tx", "Rx", "Poll", "Sleep")

# internal event kind; never reaches a protocol
DETECT = "Detect"

# tie-break rank among events at the same instant on the same node
KIND_RANK = {
    TX_END: 0,
    DETECT: 1,
    POLL_END: 2,
    ACK_TIMEOUT: 3,
    BACKOFF_FIRE: 4,
    RENDEZVOUS_FIRE: 5,
    SLEEP_END: 6,
    TX_START: 7,
    WAKE_UP: 8,
}

_STEP = {
    Protocol.BMAC: proto.bmac_step,
    Protocol.XMAC: proto.xmac_step,
    Protocol.LAMAC: proto.lamac_step,
}


class SchedulingError(ValueError):
    pass


class GuardExpired(RuntimeError):
    """The max-time guard fired before every packet was resolved."""

    def __init__(self, result: SimOutput):
        self.result = result
        super().__init__(
            f"guard expired at t={result.sim_end:.3f}s with "
            f"{result.received}/{result.buffer_size} received, {result.lost} lost"
        )


class Event:
    __slots__ = ("time", "node", "kind", "token", "payload")

    def __init__(self, time: float, node: int, kind: str, token: int = 0, payload=None):
        self.time = time
        self.node = node
        self.kind = kind
        self.token = token
        self.payload = payload

    def __repr__(self):
        return f"Event({self.time!r}, node={self.node}, {self.kind})"


class EventQueue:
    """Time-ordered queue; ties go by (node id, kind rank, insertion order)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def schedule(self, event: Event) -> None:
        if event.time < self.now:
            raise SchedulingError(f"event at {event.time!r} is before now={self.now!r}")
        self._seq += 1
        heapq.heappush(self._heap, (event.time, event.node, KIND_RANK[event.kind], self._seq, event))

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def pop(self) -> Event:
        item = heapq.heappop(self._heap)
        self.now = item[0]
        return item[4]


class Transmission:
    __slots__ = ("tid", "sender", "kind", "dest", "start", "end", "payload",
                 "corrupted", "captured", "outcome")

    def __init__(self, tid, sender, kind, dest, start, duration, payload):
        self.tid = tid
        self.sender = sender
        self.kind = kind
        self.dest = dest
        self.start = start
        self.end = start + duration
        self.payload = payload
        self.corrupted = False
        self.captured: list[int] = []
        self.outcome = ""

    @property
    def duration(self) -> float:
        return self.end - self.start

    def __repr__(self):
        return (f"Transmission({self.kind} {self.sender}->{self.dest} "
                f"[{self.start:.6f}, {self.end:.6f}] {self.outcome or 'on air'})")


@dataclass(frozen=True)
class SimOptions:
    # B-MAC long preambles are trains of short packets of this length
    preamble_packet: float = 0.004
    # LA-MAC gap between scheduled frames
    inter_frame_gap: float = 0.001
    # guard time = guard_multiplier * (B + 10) * t_frame
    guard_multiplier: float = 4.0
    # start the clock at the first wakeup of a node holding a packet
    align_to_first_sender: bool = True


@dataclass
class Delivery:
    packet: int
    sender: int
    time: float


@dataclass
class SimOutput:
    protocol: Protocol
    n_devices: int
    buffer_size: int
    seed: int
    sim_end: float
    traces: list[list[tuple[int, float, float]]]
    transmissions: list[Transmission]
    deliveries: list[Delivery]
    lost: int
    remaining: int
    guard_expired: bool
    phases: list[float] = field(default_factory=list)

    @property
    def received(self) -> int:
        return len(self.deliveries)

    @property
    def latencies(self) -> list[float]:
        return [d.time for d in self.deliveries]


class Env:
    """Read-only view handed to the protocol step functions."""

    __slots__ = ("now", "timing", "options", "rngs", "max_strobes_x", "max_strobes_l")

    def __init__(self, timing: TimingProfile, options: SimOptions, rngs):
        self.now = 0.0
        self.timing = timing
        self.options = options
        self.rngs = rngs
        self.max_strobes_x = math.ceil(timing.t_frame / (timing.xmac_preamble + timing.xmac_ack)) + 1
        self.max_strobes_l = math.ceil(timing.t_frame / (timing.lamac_preamble + timing.lamac_ack)) + 1

    def uniform(self, node: int, lo: float, hi: float) -> float:
        return float(self.rngs[node].uniform(lo, hi))


def node_streams(seed: int, n_nodes: int) -> list[np.random.Generator]:
    """One independent generator per node, keyed by (seed, node id)."""
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1, i))))
            for i in range(n_nodes)]


def traffic_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))


class Simulator:
    def __init__(self, scenario: NetworkScenario, power: RadioPowerProfile, timing: TimingProfile,
                 seed: int, options: SimOptions | None = None, *,
                 phases: list[float] | None = None, owners: list[int] | None = None):
        validate(power, timing, scenario)
        self.scenario = scenario
        self.protocol = Protocol.parse(scenario.protocol)
        self.power = power
        self.timing = timing
        self.seed = int(seed)
        self.options = options or SimOptions()
        self.step = _STEP[self.protocol]

        n_nodes = scenario.n_devices + 1
        self.n_nodes = n_nodes
        rngs = node_streams(self.seed, n_nodes)
        self.env = Env(timing, self.options, rngs)
        self.queue = EventQueue()

        tf = timing.t_frame
        if phases is None:
            phases = [float(r.uniform(0.0, tf)) for r in rngs]
        if len(phases) != n_nodes:
            raise ValueError(f"need {n_nodes} phases, got {len(phases)}")
        if owners is None:
            b = scenario.buffer_size
            owners = [int(x) for x in traffic_stream(self.seed).integers(1, scenario.n_devices + 1, size=b)]
        if len(owners) != scenario.buffer_size or any(not 1 <= o <= scenario.n_devices for o in owners):
            raise ValueError("owners must list one sender id in 1..N per packet")
        if self.options.align_to_first_sender and owners:
            shift = min(phases[o] for o in owners)
            phases = [(ph - shift) % tf for ph in phases]
        self.phases = phases

        self.nodes = [NodeState(i, i == SINK) for i in range(n_nodes)]
        for pkt, owner in enumerate(owners):
            self.nodes[owner].buffer.append(pkt)

        # radio bookkeeping
        self.radio = [SLEEP] * n_nodes
        self.listen_start = [0.0] * n_nodes
        self.listen_seq = [0] * n_nodes
        self.locked: list[Transmission | None] = [None] * n_nodes
        self.timer_token = [0] * n_nodes
        self.traces: list[list[tuple[int, float, float]]] = [[] for _ in range(n_nodes)]
        self._cur_state = [SLEEP] * n_nodes
        self._cur_start = [0.0] * n_nodes

        self.active: list[Transmission] = []
        self.log: list[Transmission] = []
        self.deliveries: list[Delivery] = []
        self.lost = 0
        self.t_done: float | None = None

    # --- traces ---------------------------------------------------------------

    def _set_radio(self, i: int, state: int, t: float) -> None:
        self.radio[i] = state
        if state == self._cur_state[i]:
            return
        start = self._cur_start[i]
        if t > start:
            self.traces[i].append((self._cur_state[i], start, t))
        self._cur_state[i] = state
        self._cur_start[i] = t
        if i == SINK and state == SLEEP and self.t_done is None and self._resolved():
            self.t_done = t

    def _close_traces(self, t_end: float) -> None:
        for i in range(self.n_nodes):
            start = self._cur_start[i]
            if t_end > start:
                self.traces[i].append((self._cur_state[i], start, t_end))
            self._cur_start[i] = t_end

    # --- packet accounting ------------------------------------------------------

    def _resolved(self) -> bool:
        return len(self.deliveries) + self.lost == self.scenario.buffer_size

    def remaining(self) -> int:
        return sum(len(n.buffer) for n in self.nodes)

    # --- channel -----------------------------------------------------------------

    def carrier_sense(self, i: int, now: float) -> bool:
        """Busy iff a frame overlapping ``now`` started at or after node i began listening."""
        ls = self.listen_start[i]
        for tx in self.active:
            if tx.sender != i and tx.start >= ls and tx.start <= now < tx.end:
                return True
        return False

    def _capture(self, i: int, tx: Transmission) -> None:
        self.locked[i] = tx
        tx.captured.append(i)
        self.timer_token[i] += 1
        self._set_radio(i, RX, self.queue.now)

    def _start_tx(self, i: int, kind: str, dest: int, duration: float, payload) -> None:
        now = self.queue.now
        tx = Transmission(len(self.log), i, kind, dest, now, duration, payload)
        for other in self.active:
            if other.end > now:
                other.corrupted = True
                tx.corrupted = True
        self.active.append(tx)
        self.log.append(tx)
        self.locked[i] = None
        self.timer_token[i] += 1
        self.listen_seq[i] += 1
        self._set_radio(i, TX, now)
        radio, locked, ls = self.radio, self.locked, self.listen_start
        for j in range(self.n_nodes):
            if j != i and locked[j] is None and (radio[j] == POLL or radio[j] == RX) and ls[j] <= now:
                self._capture(j, tx)
        self.queue.schedule(Event(tx.end, i, TX_END, 0, tx))

    def _listen(self, i: int, mode: int) -> None:
        now = self.queue.now
        self.locked[i] = None
        self.listen_start[i] = now
        self.listen_seq[i] += 1
        self._set_radio(i, mode, now)
        for tx in self.active:
            if tx.sender != i and tx.start >= now and tx.end > now:
                self._capture(i, tx)
                return
        for tx in self.active:
            if tx.kind == LONG_PREAMBLE and tx.sender != i and tx.start < now < tx.end:
                pkt = self.options.preamble_packet
                k = math.ceil((now - tx.start) / pkt)
                boundary = tx.start + k * pkt
                if boundary < tx.end:
                    self.queue.schedule(Event(boundary, i, DETECT, self.listen_seq[i], tx))
                return

    def deliver(self, tx: Transmission) -> str:
        """Outcome of a finished frame at its destination."""
        if tx.corrupted:
            return "collided"
        if tx.dest == BROADCAST:
            return "received" if tx.captured else "missed"
        if tx.dest in tx.captured and self.locked[tx.dest] is tx:
            return "received"
        return "missed"

    # --- actions -------------------------------------------------------------------

    def _apply(self, i: int, actions) -> None:
        q = self.queue
        for act in actions:
            op = act[0]
            if op == LISTEN:
                self._listen(i, act[1])
            elif op == TIMER:
                self.timer_token[i] += 1
                q.schedule(Event(act[2], i, act[1], self.timer_token[i]))
            elif op == TRANSMIT:
                self._start_tx(i, act[1], act[2], act[3], act[4])
            elif op == SLEEP:
                self.locked[i] = None
                self.timer_token[i] += 1
                self.listen_seq[i] += 1
                self._set_radio(i, SLEEP, q.now)
            else:  # pragma: no cover - protocol bug
                raise ValueError(f"unknown action {act!r}")

    def _dispatch(self, i: int, kind: str, payload=None) -> None:
        self.env.now = self.queue.now
        actions = self.step(self.nodes[i], kind, payload, self.env)
        if actions:
            self._apply(i, actions)

    def _on_tx_end(self, tx: Transmission) -> None:
        now = self.queue.now
        self.active.remove(tx)
        tx.outcome = self.deliver(tx)
        if tx.kind == DATA:
            if tx.outcome == "received":
                self.deliveries.append(Delivery(tx.payload, tx.sender, now))
            else:
                self.lost += 1
            if self._resolved() and self.t_done is None and self.radio[SINK] == SLEEP:
                self.t_done = now
        self._dispatch(tx.sender, TX_END, tx)
        ok = not tx.corrupted
        for j in tx.captured:
            if self.locked[j] is tx:
                self.locked[j] = None
                self._dispatch(j, RX_END, (tx, ok))

    # --- main loop -------------------------------------------------------------------

    def _init_nodes(self) -> None:
        t = self.timing
        for i, ph in enumerate(self.phases):
            st = self.nodes[i]
            self.queue.schedule(Event(ph, i, WAKE_UP))
            prev_poll_end = ph - t.t_frame + t.t_listen
            if prev_poll_end > 0.0:
                # mid-poll at t=0: the previous cycle's wakeup was before the origin
                st.phase = proto.POLLING
                st.poll_deadline = prev_poll_end
                self._cur_state[i] = POLL
                self.radio[i] = POLL
                self.listen_start[i] = ph - t.t_frame
                self.timer_token[i] += 1
                self.queue.schedule(Event(prev_poll_end, i, POLL_END, self.timer_token[i]))

    def run(self, raise_on_guard: bool = True) -> SimOutput:
        t = self.timing
        q = self.queue
        guard = self.options.guard_multiplier * (self.scenario.buffer_size + 10) * t.t_frame
        self._init_nodes()
        if self._resolved() and self.radio[SINK] == SLEEP:
            self.t_done = 0.0

        guard_expired = False
        stop = math.inf
        while q:
            if self.t_done is not None and stop == math.inf:
                stop = max(t.t_frame, self.t_done)
            nxt = q.peek_time()
            if nxt >= stop:
                break
            if nxt > guard:
                guard_expired = True
                break
            ev = q.pop()
            i = ev.node
            kind = ev.kind
            if kind == TX_END:
                self._on_tx_end(ev.payload)
            elif kind == WAKE_UP:
                q.schedule(Event(ev.time + t.t_frame, i, WAKE_UP))
                self._dispatch(i, WAKE_UP)
            elif kind == DETECT:
                tx = ev.payload
                if (self.listen_seq[i] == ev.token and self.locked[i] is None
                        and self.radio[i] in (POLL, RX) and tx in self.active):
                    self._capture(i, tx)
            elif ev.token == self.timer_token[i]:
                self._dispatch(i, kind)
        if self.t_done is not None and stop == math.inf:
            stop = max(t.t_frame, self.t_done)
        if guard_expired or stop == math.inf:
            guard_expired = True
            sim_end = guard
        else:
            sim_end = stop
        self._close_traces(sim_end)

        out = SimOutput(
            protocol=self.protocol,
            n_devices=self.scenario.n_devices,
            buffer_size=self.scenario.buffer_size,
            seed=self.seed,
            sim_end=sim_end,
            traces=self.traces,
            transmissions=self.log,
            deliveries=self.deliveries,
            lost=self.lost,
            remaining=self.remaining(),
            guard_expired=guard_expired,
            phases=list(self.phases),
        )
        if guard_expired and raise_on_guard:
            raise GuardExpired(out)
        return out


def run(scenario: NetworkScenario, power: RadioPowerProfile, timing: TimingProfile, seed: int,
        options: SimOptions | None = None, *, raise_on_guard: bool = True,
        phases: list[float] | None = None, owners: list[int] | None = None) -> SimOutput:
    """Simulate one realization until every packet is resolved and the sink sleeps again.

    The run covers at least one full wakeup period, so with an empty buffer
    every node does exactly one poll-and-sleep cycle.
    """
    sim = Simulator(scenario, power, timing, seed, options, phases=phases, owners=owners)
    return sim.run(raise_on_guard=raise_on_guard)


def dump_trace(out: SimOutput) -> str:
    lines = ["node,state,start,end"]
    for i, tr in enumerate(out.traces):
        for state, a, b in tr:
            lines.append(f"{i},{STATE_NAMES[state]},{a:.9f},{b:.9f}")
    return "\n".join(lines) + "\n"


def dump_transmissions(out: SimOutput) -> str:
    lines = ["sender,kind,dest,start,end,outcome"]
    for tx in out.transmissions:
        dest = "broadcast" if tx.dest == BROADCAST else str(tx.dest)
        lines.append(f"{tx.sender},{tx.kind},{dest},{tx.start:.9f},{tx.end:.9f},{tx.outcome}")
    return "\n".join(lines) + "\n"
