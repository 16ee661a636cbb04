"""Node state machines for B-MAC, X-MAC and LA-MAC.

Each step function takes a node's state, an event kind and its payload and
returns the list of radio actions the kernel must carry out.  The state
object is updated in place; the kernel owns every state object and calls
the step functions from its single-threaded loop, so nothing else can
observe an intermediate value.

Actions are plain tuples:

    (LISTEN, mode)                       mode is POLL or RX
    (SLEEP,)
    (TRANSMIT, kind, dest, duration, payload)
    (TIMER, event_kind, at)              replaces the node's pending timer

A node has at most one pending timer.  Capturing a frame or going to sleep
cancels it, so a timer action must come *before* a listen action when both
are emitted together.
"""

from __future__ import annotations

from collections import deque

SINK = 0
BROADCAST = -1

# radio states, also used as trace codes; idle listening (strobe gaps, the
# receiver's t_b tail) is POLL, a captured frame is RX
TX, RX, POLL, SLEEP = 0, 1, 2, 3

# action opcodes
LISTEN, TRANSMIT, TIMER = "listen", "transmit", "timer"

# event kinds
WAKE_UP = "WakeUp"
POLL_END = "PollEnd"
TX_START = "TxStart"
TX_END = "TxEnd"
RX_END = "RxEnd"
ACK_TIMEOUT = "AckTimeout"
BACKOFF_FIRE = "BackoffFire"
RENDEZVOUS_FIRE = "RendezvousFire"
SLEEP_END = "SleepEnd"

# frame kinds
LONG_PREAMBLE = "LongPreamble"
SHORT_PREAMBLE = "ShortPreamble"
ACK = "Ack"
DATA = "Data"
SCHEDULE = "Schedule"

# phases
IDLE = "idle"
POLLING = "polling"
TX_PREAMBLE = "tx-preamble"
TX_DATA = "tx-data"
AWAIT_DATA = "await-data"
STROBE_GAP = "strobe-gap"
JOIN_WAIT_ACK = "join-wait-ack"
JOIN_JITTER = "join-jitter"
BACKOFF = "backoff"
SINK_ACK = "sink-ack"
RX_WAIT = "rx-wait"
SINK_SCHEDULE = "sink-schedule"
COLLECT = "collect"
WAIT_RENDEZVOUS = "wait-rendezvous"
WAIT_SCHEDULE = "wait-schedule"
WAIT_SLOT = "wait-slot"


class IllegalTransition(RuntimeError):
    def __init__(self, phase: str, kind: str, detail: str = ""):
        self.phase = phase
        self.kind = kind
        msg = f"no transition for event {kind} in phase {phase}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NodeState:
    __slots__ = ("nid", "is_sink", "phase", "buffer", "poll_deadline", "strobes",
                 "extra_allowed", "rendezvous", "slots", "grants", "collect_end",
                 "wait_deadline", "seen")

    def __init__(self, nid: int, is_sink: bool):
        self.nid = nid
        self.is_sink = is_sink
        self.phase = IDLE
        self.buffer: deque[int] = deque()
        self.poll_deadline = 0.0
        self.strobes = 0
        self.extra_allowed = False
        # LA-MAC registers
        self.rendezvous: float | None = None
        self.slots: list[float] = []
        self.grants: list[tuple[int, int]] = []
        self.collect_end = 0.0
        self.wait_deadline = 0.0
        # (phase, event kind) pairs visited, for transition-coverage tests
        self.seen: set | None = None

    @property
    def role(self) -> str:
        return "sink" if self.is_sink else "sender"

    def __repr__(self):
        return f"NodeState({self.nid}, {self.phase}, buffer={list(self.buffer)})"


_SLEEP = [(SLEEP,)]


def _go_idle(st: NodeState):
    st.phase = IDLE
    return _SLEEP


def _poll(st: NodeState, until: float):
    st.phase = POLLING
    st.poll_deadline = until
    return [(TIMER, POLL_END, until), (LISTEN, POLL)]


def _resume_poll(st: NodeState, now: float, on_expiry):
    """Go back to polling after a corrupted frame, or act as if the poll just ended."""
    if st.poll_deadline > now:
        return _poll(st, st.poll_deadline)
    return on_expiry()


# --- B-MAC ---------------------------------------------------------------------


def bmac_step(st: NodeState, kind: str, payload, env):
    if st.seen is not None:
        st.seen.add((st.phase, kind))
    t = env.timing
    now = env.now
    phase = st.phase

    if kind == WAKE_UP:
        if phase == IDLE:
            return _poll(st, now + t.t_listen)
        return []

    if kind == POLL_END:
        if phase == POLLING:
            if st.buffer and not st.is_sink:
                st.phase = TX_PREAMBLE
                return [(TRANSMIT, LONG_PREAMBLE, SINK, t.bmac_preamble, None)]
            return _go_idle(st)
        if phase == AWAIT_DATA:
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == TX_END:
        if phase == TX_PREAMBLE:
            st.phase = TX_DATA
            return [(TRANSMIT, DATA, SINK, t.t_data, st.buffer[0])]
        if phase == TX_DATA:
            st.buffer.popleft()
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == RX_END:
        tx, ok = payload
        if phase not in (POLLING, AWAIT_DATA):
            raise IllegalTransition(phase, kind)
        if tx.kind == LONG_PREAMBLE and ok:
            # the header follows the preamble; everyone listens to it
            st.phase = AWAIT_DATA
            return [(TIMER, POLL_END, now + t.t_data), (LISTEN, RX)]
        if tx.kind == DATA or ok:
            return _go_idle(st)
        return _resume_poll(st, now, lambda: bmac_step(st, POLL_END, None, env))

    raise IllegalTransition(phase, kind)


# --- X-MAC ---------------------------------------------------------------------


def _xmac_strobe(st: NodeState, env):
    t = env.timing
    if st.strobes >= env.max_strobes_x:
        return _go_idle(st)
    st.strobes += 1
    st.phase = TX_PREAMBLE
    return [(TRANSMIT, SHORT_PREAMBLE, SINK, t.xmac_preamble, None)]


def _xmac_backoff(st: NodeState, env):
    """Overheard an ACK for someone else: send without preamble inside the receiver's t_b window."""
    t = env.timing
    st.phase = BACKOFF
    fire = env.now + t.t_data + env.uniform(st.nid, 0.0, t.xmac_backoff)
    return [(SLEEP,), (TIMER, BACKOFF_FIRE, fire)]


def _xmac_join_wait(st: NodeState, env):
    t = env.timing
    st.phase = JOIN_WAIT_ACK
    return [(TIMER, ACK_TIMEOUT, env.now + t.xmac_ack + 0.5 * t.xmac_preamble), (LISTEN, RX)]


def _xmac_sink(st: NodeState, kind: str, payload, env):
    t = env.timing
    now = env.now
    phase = st.phase

    if kind == WAKE_UP:
        if phase == IDLE:
            return _poll(st, now + t.t_listen)
        return []
    if kind == POLL_END:
        if phase in (POLLING, RX_WAIT):
            return _go_idle(st)
        raise IllegalTransition(phase, kind)
    if kind == TX_END:
        if phase == SINK_ACK:
            st.phase = RX_WAIT
            st.extra_allowed = True
            return [(TIMER, POLL_END, now + t.xmac_backoff), (LISTEN, POLL)]
        raise IllegalTransition(phase, kind)
    if kind == RX_END:
        tx, ok = payload
        if phase not in (POLLING, RX_WAIT):
            raise IllegalTransition(phase, kind)
        if ok and tx.kind == SHORT_PREAMBLE and tx.dest == SINK:
            st.phase = SINK_ACK
            return [(TRANSMIT, ACK, tx.sender, t.xmac_ack, None)]
        if phase == RX_WAIT or (ok and tx.kind == DATA):
            # after the acknowledged frame the receiver waits t_b for one more, then sleeps
            if phase == RX_WAIT and not st.extra_allowed:
                return _go_idle(st)
            st.phase = RX_WAIT
            st.extra_allowed = False
            return [(TIMER, POLL_END, now + t.xmac_backoff), (LISTEN, POLL)]
        return _resume_poll(st, now, lambda: _go_idle(st))
    raise IllegalTransition(phase, kind)


def xmac_step(st: NodeState, kind: str, payload, env):
    if st.seen is not None:
        st.seen.add((st.phase, kind))
    if st.is_sink:
        return _xmac_sink(st, kind, payload, env)
    t = env.timing
    now = env.now
    phase = st.phase

    if kind == WAKE_UP:
        if phase == IDLE:
            return _poll(st, now + t.t_listen)
        return []

    if kind == POLL_END:
        if phase == POLLING:
            if st.buffer:
                st.strobes = 0
                st.extra_allowed = True
                return _xmac_strobe(st, env)
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == ACK_TIMEOUT:
        if phase == STROBE_GAP:
            return _xmac_strobe(st, env)
        if phase == JOIN_WAIT_ACK:
            return _poll(st, now + t.t_listen)
        raise IllegalTransition(phase, kind)

    if kind == BACKOFF_FIRE:
        if phase == BACKOFF:
            st.phase = TX_DATA
            st.extra_allowed = False
            return [(TRANSMIT, DATA, SINK, t.t_data, st.buffer[0])]
        raise IllegalTransition(phase, kind)

    if kind == TX_END:
        if phase == TX_PREAMBLE:
            st.phase = STROBE_GAP
            return [(TIMER, ACK_TIMEOUT, now + t.xmac_ack), (LISTEN, POLL)]
        if phase == TX_DATA:
            st.buffer.popleft()
            if st.extra_allowed and st.buffer:
                st.extra_allowed = False
                return [(TRANSMIT, DATA, SINK, t.t_data, st.buffer[0])]
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == RX_END:
        tx, ok = payload
        if phase not in (POLLING, STROBE_GAP, JOIN_WAIT_ACK):
            raise IllegalTransition(phase, kind)
        if not st.buffer:
            # pure overhearer: any frame sends it back to sleep
            if ok:
                return _go_idle(st)
            return _resume_poll(st, now, lambda: _go_idle(st))
        if not ok:
            if phase == STROBE_GAP:
                return _xmac_strobe(st, env)
            if phase == JOIN_WAIT_ACK:
                return _xmac_join_wait(st, env)
            return _resume_poll(st, now, lambda: xmac_step(st, POLL_END, None, env))
        if tx.kind == ACK:
            if tx.dest == st.nid and phase == STROBE_GAP:
                st.phase = TX_DATA
                return [(TRANSMIT, DATA, SINK, t.t_data, st.buffer[0])]
            return _xmac_backoff(st, env)
        if tx.kind == SHORT_PREAMBLE and tx.dest == SINK:
            return _xmac_join_wait(st, env)
        return _go_idle(st)

    raise IllegalTransition(phase, kind)


# --- LA-MAC --------------------------------------------------------------------


def _lamac_strobe(st: NodeState, env):
    t = env.timing
    if st.strobes >= env.max_strobes_l:
        return _go_idle(st)
    if st.rendezvous is not None and env.now >= st.rendezvous:
        # would run into the SCHEDULE; wait for the next cycle
        return _go_idle(st)
    st.strobes += 1
    st.phase = TX_PREAMBLE
    return [(TRANSMIT, SHORT_PREAMBLE, SINK, t.lamac_preamble, len(st.buffer))]


def _lamac_join_wait(st: NodeState, env):
    t = env.timing
    st.phase = JOIN_WAIT_ACK
    return [(TIMER, ACK_TIMEOUT, env.now + t.lamac_ack + 0.5 * t.lamac_preamble), (LISTEN, RX)]


def _lamac_schedule(st: NodeState, env):
    t = env.timing
    gap = env.options.inter_frame_gap
    start = env.now + t.lamac_schedule + gap
    slots = []
    for sender, count in st.grants:
        for _ in range(count):
            slots.append((sender, start))
            start += t.t_data + gap
    st.collect_end = start - gap
    st.grants = []
    st.phase = SINK_SCHEDULE
    return [(TRANSMIT, SCHEDULE, BROADCAST, t.lamac_schedule, tuple(slots))]


def _lamac_sink_poll_over(st: NodeState, env):
    if st.grants:
        return _lamac_schedule(st, env)
    return _go_idle(st)


def _lamac_sink(st: NodeState, kind: str, payload, env):
    t = env.timing
    now = env.now
    phase = st.phase

    if kind == WAKE_UP:
        if phase == IDLE:
            st.grants = []
            return _poll(st, now + t.t_listen)
        return []
    if kind == POLL_END:
        if phase == POLLING:
            return _lamac_sink_poll_over(st, env)
        if phase == COLLECT:
            return _go_idle(st)
        raise IllegalTransition(phase, kind)
    if kind == TX_END:
        if phase == SINK_ACK:
            if now < st.poll_deadline:
                return _poll(st, st.poll_deadline)
            return _lamac_sink_poll_over(st, env)
        if phase == SINK_SCHEDULE:
            st.phase = COLLECT
            return [(TIMER, POLL_END, st.collect_end), (LISTEN, RX)]
        raise IllegalTransition(phase, kind)
    if kind == RX_END:
        tx, ok = payload
        if phase == POLLING:
            if ok and tx.kind == SHORT_PREAMBLE and tx.dest == SINK:
                if all(s != tx.sender for s, _ in st.grants):
                    st.grants.append((tx.sender, int(tx.payload)))
                st.phase = SINK_ACK
                rendezvous = max(st.poll_deadline, now + t.lamac_ack)
                return [(TRANSMIT, ACK, tx.sender, t.lamac_ack, rendezvous)]
            return _resume_poll(st, now, lambda: _lamac_sink_poll_over(st, env))
        if phase == COLLECT:
            if now < st.collect_end:
                return [(TIMER, POLL_END, st.collect_end), (LISTEN, RX)]
            return _go_idle(st)
        raise IllegalTransition(phase, kind)
    raise IllegalTransition(phase, kind)


def _lamac_overheard_ack(st: NodeState, tx, env):
    """Another sender got an ACK: try to slip a preamble in before the rendezvous."""
    t = env.timing
    st.rendezvous = tx.payload
    if env.now >= st.rendezvous:
        return _go_idle(st)
    st.phase = JOIN_JITTER
    fire = env.now + env.uniform(st.nid, 0.0, t.lamac_ack)
    return [(TIMER, BACKOFF_FIRE, fire), (LISTEN, POLL)]


def lamac_step(st: NodeState, kind: str, payload, env):
    if st.seen is not None:
        st.seen.add((st.phase, kind))
    if st.is_sink:
        return _lamac_sink(st, kind, payload, env)
    t = env.timing
    now = env.now
    phase = st.phase

    if kind == WAKE_UP:
        if phase == IDLE:
            st.rendezvous = None
            return _poll(st, now + t.t_listen)
        return []

    if kind == POLL_END:
        if phase == POLLING:
            if st.buffer:
                st.strobes = 0
                return _lamac_strobe(st, env)
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == ACK_TIMEOUT:
        if phase == STROBE_GAP:
            return _lamac_strobe(st, env)
        if phase == JOIN_WAIT_ACK:
            return _poll(st, now + t.t_listen)
        if phase == WAIT_SCHEDULE:
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == BACKOFF_FIRE:
        if phase == JOIN_JITTER:
            st.strobes = 0
            return _lamac_strobe(st, env)
        raise IllegalTransition(phase, kind)

    if kind == RENDEZVOUS_FIRE:
        if phase == WAIT_RENDEZVOUS:
            st.phase = WAIT_SCHEDULE
            st.wait_deadline = now + t.t_listen
            return [(TIMER, ACK_TIMEOUT, st.wait_deadline), (LISTEN, RX)]
        raise IllegalTransition(phase, kind)

    if kind == TX_START:
        if phase == WAIT_SLOT:
            st.phase = TX_DATA
            st.slots.pop(0)
            return [(TRANSMIT, DATA, SINK, t.t_data, st.buffer[0])]
        raise IllegalTransition(phase, kind)

    if kind == TX_END:
        if phase == TX_PREAMBLE:
            st.phase = STROBE_GAP
            return [(TIMER, ACK_TIMEOUT, now + t.lamac_ack), (LISTEN, POLL)]
        if phase == TX_DATA:
            st.buffer.popleft()
            if st.slots and st.buffer:
                st.phase = WAIT_SLOT
                return [(SLEEP,), (TIMER, TX_START, st.slots[0])]
            st.slots = []
            return _go_idle(st)
        raise IllegalTransition(phase, kind)

    if kind == RX_END:
        tx, ok = payload
        if phase == WAIT_SCHEDULE:
            if ok and tx.kind == SCHEDULE:
                st.slots = [at for sender, at in tx.payload if sender == st.nid]
                if not st.slots:
                    return _go_idle(st)
                st.phase = WAIT_SLOT
                return [(SLEEP,), (TIMER, TX_START, st.slots[0])]
            if tx.kind == SCHEDULE:
                # corrupted schedule: no grant, keep the packets for the next cycle
                return _go_idle(st)
            if now < st.wait_deadline:
                return [(TIMER, ACK_TIMEOUT, st.wait_deadline), (LISTEN, RX)]
            return _go_idle(st)
        if phase not in (POLLING, STROBE_GAP, JOIN_WAIT_ACK, JOIN_JITTER):
            raise IllegalTransition(phase, kind)
        if not st.buffer:
            if ok:
                return _go_idle(st)
            return _resume_poll(st, now, lambda: _go_idle(st))
        if not ok:
            if phase == STROBE_GAP:
                return _lamac_strobe(st, env)
            if phase in (JOIN_WAIT_ACK, JOIN_JITTER):
                return _lamac_join_wait(st, env)
            return _resume_poll(st, now, lambda: lamac_step(st, POLL_END, None, env))
        if tx.kind == ACK:
            if tx.dest == st.nid and phase == STROBE_GAP:
                st.rendezvous = tx.payload
                if st.rendezvous <= now:
                    st.phase = WAIT_SCHEDULE
                    st.wait_deadline = now + t.t_listen
                    return [(TIMER, ACK_TIMEOUT, st.wait_deadline), (LISTEN, RX)]
                st.phase = WAIT_RENDEZVOUS
                return [(SLEEP,), (TIMER, RENDEZVOUS_FIRE, st.rendezvous)]
            return _lamac_overheard_ack(st, tx, env)
        if tx.kind == SHORT_PREAMBLE and tx.dest == SINK:
            return _lamac_join_wait(st, env)
        return _go_idle(st)

    raise IllegalTransition(phase, kind)
