"""Monte Carlo evaluation of the single-packet wakeup-case model.

Built from the event narrative (who polls, who receives, for how long), not
from the closed forms. Each sample draws a receiver phase and one overhearer
phase uniformly over the frame; durations that depend on where inside a window
a node wakes are drawn uniformly over that window.
"""

from __future__ import annotations

import numpy as np

from psmac.params import RadioPowerProfile, TimingProfile


def geometric_trials(hit: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Number of Bernoulli(hit) trials up to and including the first success."""
    counts = np.ones(n, dtype=np.int64)
    live = np.arange(n)
    while live.size:
        miss = rng.random(live.size) >= hit
        live = live[miss]
        counts[live] += 1
    return counts


def _energy(pw: RadioPowerProfile, tx, rx, poll, sleep) -> np.ndarray:
    return tx * pw.p_tx + rx * pw.p_rx + poll * pw.p_poll + sleep * pw.p_sleep


def _overhearer(rng, n, tf, tl, sender_sync, receiver_phase, exchange, strobe):
    """Poll and Rx time of one bystander.

    `exchange` lists (window, rx) for the frames of the exchange in order; a
    bystander waking inside a window polls until the next frame starts and then
    hears it. `strobe` is (window, rx) for waking during a strobe train.
    """
    phase = rng.uniform(0.0, tf, n)
    poll = np.full(n, tl)
    rx = np.zeros(n)

    synced = phase < tl
    poll[synced] = rng.uniform(0.0, tl, synced.sum())
    rx[synced] = exchange[0][1]

    # a bystander waking before the receiver while the sender strobes
    early = ~synced & ~sender_sync & (phase < receiver_phase)
    w, r = strobe
    poll[early] = rng.uniform(0.0, w, early.sum())
    rx[early] = r

    rest = ~synced & ~early
    pos = rng.uniform(0.0, tf, n)
    lo = 0.0
    for w, r in exchange[1:]:
        inside = rest & (pos >= lo) & (pos < lo + w)
        poll[inside] = rng.uniform(0.0, w, inside.sum())
        rx[inside] = r
        lo += w
    return poll, rx


def bmac_b1(pw: RadioPowerProfile, tm: TimingProfile, n_devices: int,
            samples: int = 1_000_000, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    tf, tl, td, tp = tm.t_frame, tm.t_listen, tm.t_data, tm.bmac_preamble

    def listener(phase):
        synced = phase < tl
        # in sync the node polls from its wakeup until the preamble starts;
        # otherwise it catches the preamble tail at once
        poll = np.where(synced, rng.uniform(0.0, tl, samples), 0.0)
        rx = np.where(synced, tp, rng.uniform(0.0, tp, samples)) + td
        return poll, rx

    r_poll, r_rx = listener(rng.uniform(0.0, tf, samples))
    s_tx = tp + td
    s_poll = tl
    active = s_tx + s_poll + r_poll + r_rx
    e = _energy(pw, s_tx, r_rx, s_poll + r_poll, 2 * tf - active)

    o_poll, o_rx = listener(rng.uniform(0.0, tf, samples))
    e_o = _energy(pw, 0.0, o_rx, o_poll, tf - o_poll - o_rx)
    return float(e.mean() + (n_devices - 1) * e_o.mean())


def _strobed_b1(pw, tm, n_devices, samples, seed, tp, ta, extra):
    """Shared body for the strobed-preamble protocols.

    `extra` selects the variant: X-MAC has a back-off tail at the receiver,
    LA-MAC has a SCHEDULE frame and a receiver that polls its whole window.
    """
    rng = np.random.default_rng(seed)
    tf, tl, td = tm.t_frame, tm.t_listen, tm.t_data
    hit = (tl - ta - tp) / tf

    r_phase = rng.uniform(0.0, tf, samples)
    sync = r_phase < tl
    strobes = np.where(sync, 1, geometric_trials(hit, samples, rng))

    if extra == "xmac":
        tb = tm.xmac_backoff
        tg = 0.0
        r_poll = np.where(sync, rng.uniform(0.0, tl, samples), rng.uniform(0.0, tp + ta, samples)) + tb
    else:
        tg = tm.lamac_schedule
        # the receiver keeps clearing preambles until its window closes
        r_poll = np.full(samples, tl - tp - ta)

    s_tx = strobes * tp + td
    s_rx = ta + tg
    s_poll = tl + (strobes - 1) * ta
    r_tx = ta + tg
    r_rx = tp + td

    tx = s_tx + r_tx
    rx = s_rx + r_rx
    poll = s_poll + r_poll
    e = _energy(pw, tx, rx, poll, 2 * tf - tx - rx - poll)

    if extra == "xmac":
        exchange = [(tl, tp), (tp, ta), (ta, td)]
    else:
        exchange = [(tl, tp), (tp, ta), (ta, tg), (tg, td)]
    o_poll, o_rx = _overhearer(rng, samples, tf, tl, sync, r_phase, exchange, (tp + ta, tp))
    e_o = _energy(pw, 0.0, o_rx, o_poll, tf - o_poll - o_rx)
    return float(e.mean() + (n_devices - 1) * e_o.mean())


def xmac_b1(pw: RadioPowerProfile, tm: TimingProfile, n_devices: int,
            samples: int = 1_000_000, seed: int = 2) -> float:
    return _strobed_b1(pw, tm, n_devices, samples, seed, tm.xmac_preamble, tm.xmac_ack, "xmac")


def lamac_b1(pw: RadioPowerProfile, tm: TimingProfile, n_devices: int,
             samples: int = 1_000_000, seed: int = 3) -> float:
    return _strobed_b1(pw, tm, n_devices, samples, seed, tm.lamac_preamble, tm.lamac_ack, "lamac")
