import numpy as np
from hypothesis import strategies as st

from psmac.params import DEFAULT_POWER, DEFAULT_TIMING, NetworkScenario, Protocol, RadioPowerProfile, TimingProfile

POWER = DEFAULT_POWER
TIMING = DEFAULT_TIMING
N = 9


def make_config(tf, tl_frac, tp_x, ta_x, tp_l, ta_l, tg, td, tb, powers):
    tl = (tp_x + ta_x + tp_l + ta_l) + tl_frac * tf
    tl = min(tl, 0.9 * tf)
    timing = TimingProfile(
        t_frame=tf, t_listen=tl, t_sleep=tf - tl, t_data=td, bmac_preamble=tf,
        xmac_preamble=tp_x, xmac_ack=ta_x, xmac_backoff=tb,
        lamac_preamble=tp_l, lamac_ack=ta_l, lamac_schedule=tg,
    )
    p_tx, p_rx, p_poll, p_sleep = powers
    return RadioPowerProfile(p_tx, p_rx, p_poll, min(p_sleep, p_poll)), timing


def random_config(rng: np.random.Generator):
    """A random valid (power, timing) pair."""
    tf = rng.uniform(0.1, 1.0)
    return make_config(
        tf, rng.uniform(0.0, 0.4), *rng.uniform(0.0005, 0.005, 4),
        rng.uniform(0.001, 0.02), rng.uniform(0.005, 0.05), rng.uniform(0.01, 0.1),
        tuple(rng.uniform(0.0, 0.1, 4)),
    )


@st.composite
def configs(draw):
    dur = st.floats(0.0005, 0.005)
    power = st.floats(0.0, 0.1)
    tf = draw(st.floats(0.1, 1.0))
    return make_config(
        tf, draw(st.floats(0.0, 0.4)), draw(dur), draw(dur), draw(dur), draw(dur),
        draw(st.floats(0.001, 0.02)), draw(st.floats(0.005, 0.05)), draw(st.floats(0.01, 0.1)),
        tuple(draw(power) for _ in range(4)),
    )


def scenario(protocol, b, n=N):
    return NetworkScenario(n, b, Protocol.parse(protocol))


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
