import math

import numpy as np
import pytest

from psmac.params import DEFAULT_POWER, DEFAULT_TIMING
from psmac.sim import IllegalTransition, NodeState, SimOptions, Simulator, bmac_step, lamac_step, run, xmac_step
from psmac.sim.kernel import Env, Transmission, node_streams
from psmac.sim.protocols import (
    ACK,
    ACK_TIMEOUT,
    DATA,
    IDLE,
    LISTEN,
    LONG_PREAMBLE,
    POLL,
    POLL_END,
    POLLING,
    RX,
    RX_END,
    SCHEDULE,
    SHORT_PREAMBLE,
    SINK,
    SLEEP,
    STROBE_GAP,
    TIMER,
    TRANSMIT,
    TX_END,
    WAKE_UP,
)

from conftest import scenario

P = DEFAULT_POWER
T = DEFAULT_TIMING


def env_at(now):
    env = Env(T, SimOptions(), node_streams(0, 4))
    env.now = now
    return env


def node(nid, packets=0, phase=IDLE):
    st = NodeState(nid, nid == SINK)
    st.buffer.extend(range(packets))
    st.phase = phase
    return st


# --- step functions -------------------------------------------------------------


def test_bmac_sender_starts_long_preamble():
    st = node(1, packets=1)
    acts = bmac_step(st, WAKE_UP, None, env_at(0.0))
    assert acts == [(TIMER, POLL_END, T.t_listen), (LISTEN, POLL)]
    acts = bmac_step(st, POLL_END, None, env_at(T.t_listen))
    assert acts == [(TRANSMIT, LONG_PREAMBLE, SINK, T.bmac_preamble, None)]


def test_bmac_sink_detects_preamble_and_stays_in_rx():
    st = node(SINK, phase=POLLING)
    tx = Transmission(0, 1, LONG_PREAMBLE, SINK, 0.0, T.bmac_preamble, None)
    acts = bmac_step(st, RX_END, (tx, True), env_at(T.bmac_preamble))
    assert acts[-1] == (LISTEN, RX)


def test_bmac_empty_sender_sleeps_at_poll_end():
    st = node(2, phase=POLLING)
    assert bmac_step(st, POLL_END, None, env_at(0.025)) == [(SLEEP,)]
    assert st.phase == IDLE


def test_xmac_overhearer_sleeps_on_foreign_unicast():
    st = node(3, phase=POLLING)
    tx = Transmission(0, 1, SHORT_PREAMBLE, SINK, 0.0, T.xmac_preamble, None)
    assert xmac_step(st, RX_END, (tx, True), env_at(0.004)) == [(SLEEP,)]


def test_illegal_transition_raises():
    with pytest.raises(IllegalTransition):
        xmac_step(node(1, packets=1), TX_END, None, env_at(0.0))
    with pytest.raises(IllegalTransition):
        lamac_step(node(SINK), POLL_END, None, env_at(0.0))


def test_lamac_sender_gives_up_and_retries_next_wakeup():
    env = env_at(0.3)
    st = node(1, packets=1, phase=STROBE_GAP)
    st.strobes = env.max_strobes_l
    assert lamac_step(st, ACK_TIMEOUT, None, env) == [(SLEEP,)]
    assert list(st.buffer) == [0]
    env.now = 0.5
    lamac_step(st, WAKE_UP, None, env)
    env.now = 0.525
    acts = lamac_step(st, POLL_END, None, env)
    assert acts[0][:2] == (TRANSMIT, SHORT_PREAMBLE)


# --- scenarios on the full kernel ---------------------------------------------------


def test_xmac_b1_strobe_ack_data():
    out = run(scenario("xmac", 1, n=2), P, T, 0, phases=[0.1, 0.0, 0.2], owners=[1])
    kinds = [tx.kind for tx in out.transmissions]
    assert kinds[-3:] == [SHORT_PREAMBLE, ACK, DATA]
    assert out.received == 1


def test_xmac_backoff_joiners_collide():
    hit = None
    for seed in range(60):
        out = run(scenario("xmac", 3, n=3), P, T, seed, phases=[0.2, 0.0, 0.05, 0.06], owners=[1, 2, 3])
        data = {tx.sender: tx.outcome for tx in out.transmissions if tx.kind == DATA}
        if data.get(2) == data.get(3) == "collided":
            hit = out
            break
    assert hit is not None
    assert hit.lost == 2 and hit.received == 1


def test_lamac_two_senders_one_schedule():
    out = run(scenario("lamac", 2, n=3), P, T, 0, phases=[0.2, 0.0, 0.01, 0.1], owners=[1, 2])
    log = out.transmissions
    assert sum(tx.kind == SCHEDULE for tx in log) == 1
    data = [tx for tx in log if tx.kind == DATA]
    assert sorted(tx.sender for tx in data) == [1, 2]
    assert all(tx.outcome == "received" for tx in data)
    assert data[0].end <= data[1].start


def test_lamac_burst_of_two():
    out = run(scenario("lamac", 2, n=3), P, T, 0, phases=[0.2, 0.0, 0.01, 0.1], owners=[1, 1])
    sched = next(tx for tx in out.transmissions if tx.kind == SCHEDULE)
    data = [tx for tx in out.transmissions if tx.kind == DATA]
    assert len(data) == 2 and all(tx.sender == 1 and tx.start >= sched.end for tx in data)
    assert out.received == 2


def _trains(log, sender, gap):
    """Lengths of runs of back-to-back short preambles from one sender."""
    trains, last_end, count = [], None, 0
    for tx in log:
        if tx.sender != sender or tx.kind != SHORT_PREAMBLE:
            continue
        if last_end is not None and tx.start - last_end <= gap + 1e-9:
            count += 1
        else:
            if count:
                trains.append(count)
            count = 1
        last_end = tx.end
    if count:
        trains.append(count)
    return trains


def test_xmac_strobe_bound():
    bound = math.ceil(T.t_frame / (T.xmac_preamble + T.xmac_ack)) + 1
    longest = 0
    for seed in range(150):
        out = run(scenario("xmac", 8), P, T, seed, raise_on_guard=False)
        for s in range(1, 10):
            longest = max([longest, *_trains(out.transmissions, s, T.xmac_ack)])
    assert 1 < longest <= bound


def test_lamac_schedule_safety():
    for seed in range(150):
        out = run(scenario("lamac", 12), P, T, seed, raise_on_guard=False)
        data = sorted((tx for tx in out.transmissions if tx.kind == DATA), key=lambda tx: tx.start)
        for a, b in zip(data, data[1:]):
            assert a.end <= b.start
        assert all(tx.outcome == "received" for tx in data)


def test_lamac_sender_retries_after_missing_window():
    # a second sender waking while the sink collects cannot join and goes again a frame later
    out = run(scenario("lamac", 2, n=3), P, T, 0, phases=[0.2, 0.0, 0.215, 0.1], owners=[1, 2])
    assert out.received == 2
    d = {x.sender: x.time for x in out.deliveries}
    assert d[2] - d[1] > T.t_sleep


STEPS = {"bmac": bmac_step, "xmac": xmac_step, "lamac": lamac_step}


@pytest.mark.parametrize("proto", ["bmac", "xmac", "lamac"])
def test_transition_totality(proto):
    rng = np.random.default_rng({"bmac": 1, "xmac": 2, "lamac": 3}[proto])
    seen = set()
    runs = 3334
    for k in range(runs):
        n = int(rng.integers(1, 10))
        b = int(rng.integers(0, 7))
        sim = Simulator(scenario(proto, b, n=n), P, T, 10_000 + k)
        for st in sim.nodes:
            st.seen = set()
        out = sim.run(raise_on_guard=False)
        assert out.received + out.lost + out.remaining == b
        for st in sim.nodes:
            seen |= {(st.role, *pair) for pair in st.seen}
    assert len(seen) >= {"bmac": 8, "xmac": 15, "lamac": 20}[proto]
