"""Closed-form expected energy of B-MAC, X-MAC and LA-MAC for a star of N senders.

Every evaluator returns an :class:`AnalyticResult`.  Wherever the model is a
probability tree over wakeup orderings, the leaves are kept as
:class:`CaseOutcome` records so that each one can be inspected on its own.

For the single-packet trees (``B = 1``) the tree only describes the overhearers.
Each leaf there carries the full breakdown *as if every overhearer fell in that
case*: the active-couple components are shared by all leaves and
``e_overhear`` is ``N_o`` times the per-overhearer cost of the leaf.  With that
convention the expected breakdown is always the probability-weighted sum of the
leaves, for both ``B = 1`` and ``B = 2`` trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .params import (
    DerivedProbabilities,
    EnergyBreakdown,
    NetworkScenario,
    Protocol,
    RadioPowerProfile,
    TimingProfile,
    derive,
)


class UnsupportedBufferSize(ValueError):
    def __init__(self, buffer_size: int, protocol: Protocol):
        self.buffer_size = buffer_size
        self.protocol = protocol
        super().__init__(
            f"no closed form for {protocol.value} with B={buffer_size} (exact only for B <= 2); "
            "pass extrapolate=True (CLI: --extrapolate) for the linear B>2 extrapolation"
        )


@dataclass(frozen=True)
class CaseOutcome:
    case_id: str
    probability: float
    energy: EnergyBreakdown


@dataclass(frozen=True)
class AnalyticResult:
    expected: EnergyBreakdown
    cases: tuple[CaseOutcome, ...] = ()
    extrapolated: bool = False
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def total(self) -> float:
        return self.expected.e_total


def _weighted(cases: list[CaseOutcome]) -> EnergyBreakdown:
    acc = [0.0] * 5
    for c in cases:
        for i, v in enumerate(c.energy.components()):
            acc[i] += c.probability * v
    return EnergyBreakdown(*acc)


def _result(cases: list[CaseOutcome], diagnostics: list[str]) -> AnalyticResult:
    expected = _weighted(cases)
    for c in cases:
        if not c.energy.is_nonnegative():
            diagnostics.append(f"{c.case_id}: negative component (formula outside its regime)")
    return AnalyticResult(expected, tuple(cases), False, tuple(diagnostics))


def _clamp1(name: str, v: float, diagnostics: list[str]) -> float:
    if v > 1.0:
        diagnostics.append(f"{name} clamped from {v:.6g} to 1")
        return 1.0
    return v


def _require_buffer(scenario: NetworkScenario, b: int) -> None:
    if scenario.buffer_size != b:
        raise ValueError(f"expected buffer_size={b}, got {scenario.buffer_size}")


# --- B = 0 -------------------------------------------------------------------

def idle_energy(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    """Every node, sink included, polls once and sleeps for the rest of the frame."""
    _require_buffer(scenario, 0)
    n = scenario.n_devices + 1
    e = EnergyBreakdown(
        e_poll=n * timing.t_listen * power.p_poll,
        e_sleep=n * timing.t_sleep * power.p_sleep,
    )
    return AnalyticResult(e)


# --- B-MAC -------------------------------------------------------------------

def bmac_b1(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    _require_buffer(scenario, 1)
    d = derive(power, timing)
    return _bmac_b1(power, timing, scenario.n_devices, d)


def _bmac_b1(power: RadioPowerProfile, timing: TimingProfile, n: int, d: DerivedProbabilities) -> AnalyticResult:
    Pt, Pr, Pl, Ps = power.p_tx, power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td, tp = timing.t_frame, timing.t_listen, timing.t_data, timing.bmac_preamble
    p = d.p_sync
    n_o = n - 1

    e_t = (tp + td) * Pt
    e_r = (p * tp + (1 - p) * tp / 2 + td) * Pr
    e_l = (1 + p / 2) * tl * Pl
    e_s = (2 * tf - (tp / 2 * (p + 3) + 2 * td + tl * (1 + p / 2))) * Ps
    e_o = n_o * (e_r + p * tl / 2 * Pl + (tf - (p * (tl / 2 + tp) + (1 - p) * tp / 2 + td)) * Ps)
    e = EnergyBreakdown(e_t, e_r, e_l, e_s, e_o)
    diagnostics = [] if e.is_nonnegative() else ["BMAC/B1: negative component (formula outside its regime)"]
    return AnalyticResult(e, (), False, tuple(diagnostics))


def bmac_energy(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    """B-MAC cost grows linearly with the number of buffered packets."""
    b = scenario.buffer_size
    if b < 0:
        raise ValueError(f"buffer_size must be >= 0, got {b}")
    if b == 0:
        return idle_energy(power, timing, scenario)
    one = bmac_b1(power, timing, scenario.with_buffer(1))
    if b == 1:
        return one
    return AnalyticResult(one.expected.scale(b), (), False, one.diagnostics)


# --- X-MAC -------------------------------------------------------------------

def _xmac_active(power: RadioPowerProfile, timing: TimingProfile, d: DerivedProbabilities) -> EnergyBreakdown:
    """Sender + receiver components of X-MAC with one packet (no overhearers)."""
    Pt, Pr, Pl, Ps = power.p_tx, power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta, tb = timing.xmac_preamble, timing.xmac_ack, timing.xmac_backoff
    p, g = d.p_sync, d.gamma_x

    e_t = ((1 - p) * g + p) * tp * Pt + ta * Pr + td * Pt
    e_r = (td + tp) * Pr + ta * Pt
    e_l = ((1 - p) * ((tp + ta) / 2 + (g - 1) * ta) + (p / 2 + 1) * tl + tb) * Pl
    e_s = (2 * tf - 2 * td - p * tl / 2 - tp - ta - (1 - p) * (tp + ta) / 2 - tl
           - ((1 - p) * g + p) * (tp + ta) - tb) * Ps
    return EnergyBreakdown(e_t, e_r, e_l, e_s)


def _xmac_overhear_leaves(power: RadioPowerProfile, timing: TimingProfile,
                          d: DerivedProbabilities) -> list[tuple[str, float, float]]:
    """(case, probability, per-overhearer energy) for the nine X-MAC overhearer cases."""
    Pr, Pl, Ps = power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta = timing.xmac_preamble, timing.xmac_ack
    p, pa, pb = d.p_sync, d.p_a, d.p_b

    c1 = tl / 2 * Pl + tp * Pr + (tf - tl / 2 - tp) * Ps
    c2 = tp / 2 * Pl + ta * Pr + (tf - tp / 2 - ta) * Ps
    c3 = ta / 2 * Pl + td * Pr + (tf - ta / 2 - td) * Ps
    c4 = tl * Pl + (tf - tl) * Ps
    c9 = tp * Pr + (tp + ta) / 2 * Pl + (tf - (tp + ta) / 2 - tp) * Ps
    half = (1 - p) ** 2 * 0.5
    return [
        ("Case1", p * p, c1),
        ("Case2", p * (1 - p) * pa, c2),
        ("Case3", p * (1 - p) * pb, c3),
        ("Case4", p * (1 - p) * (1 - pa - pb), c4),
        ("Case5", (1 - p) * p, c1),
        ("Case6", half * pa, c2),
        ("Case7", half * pb, c3),
        ("Case8", half * (1 - pa - pb), c4),
        ("Case9", half, c9),
    ]


def _b1_tree(prefix: str, active: EnergyBreakdown, n_o: int,
             leaves: list[tuple[str, float, float]]) -> AnalyticResult:
    cases = [
        CaseOutcome(f"{prefix}/{name}", prob,
                    EnergyBreakdown(active.e_tx, active.e_rx, active.e_poll, active.e_sleep, n_o * e))
        for name, prob, e in leaves
    ]
    # E_o = N_o * sum(p_i * E_i) is kept as its own sum so it matches the model term for term.
    e_o = n_o * sum(prob * e for _, prob, e in leaves)
    expected = EnergyBreakdown(active.e_tx, active.e_rx, active.e_poll, active.e_sleep, e_o)
    diagnostics = []
    if not expected.is_nonnegative():
        diagnostics.append(f"{prefix}: negative component (formula outside its regime)")
    return AnalyticResult(expected, tuple(cases), False, tuple(diagnostics))


def xmac_b1(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    _require_buffer(scenario, 1)
    d = derive(power, timing)
    return _xmac_b1(power, timing, scenario.n_devices, d)


def _xmac_b1(power, timing, n: int, d: DerivedProbabilities) -> AnalyticResult:
    active = _xmac_active(power, timing, d)
    return _b1_tree("XMAC/B1", active, n - 1, _xmac_overhear_leaves(power, timing, d))


def xmac_b2(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    _require_buffer(scenario, 2)
    Pt, Pr, Pl, Ps = power.p_tx, power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta = timing.xmac_preamble, timing.xmac_ack
    n = scenario.n_devices
    d = derive(power, timing)
    p, g, q, u = d.p_sync, d.gamma_x, d.q_x, d.u_x
    g2 = math.floor(g / 2)
    diagnostics: list[str] = []

    one = _xmac_b1(power, timing, n, d).expected
    Et1, Er1, El1, Es1, Eo1 = one.components()
    two = (n - 1) / n
    n_o = max(n - 2, 0)
    half = (1 - p) ** 2 * 0.5

    def o_busy(p_busy: float, poll: float, rx: float) -> float:
        busy = poll * Pl + rx * Pr + (tf - poll - rx) * Ps
        free = tl * Pl + (tf - tl) * Ps
        return n_o * (p_busy * busy + (1 - p_busy) * free)

    p_c1 = _clamp1("XMAC/B2 p_case1", (tp + ta + 2 * td) / tf, diagnostics)
    p_c4 = _clamp1("XMAC/B2 p_case4", (g * (tp + ta) + 2 * td) / tf, diagnostics)
    o1 = o_busy(p_c1, tl / 2, td)
    o4 = o_busy(p_c4, (tp + ta) / 2, tp)
    o3 = (n_o + (n_o + 1)) * Eo1 / (n_o + 1)

    c1 = EnergyBreakdown(
        tp * Pt + ta * Pr + (tp + ta) * Pr + 2 * td * Pt,
        (tp + 2 * td) * Pr + ta * Pt,
        (tl + tl / 2 + tl / 2) * Pl,
        (3 * tf - (tl + tp + ta + td) - (tl / 2 + tp + ta + td) - (tl / 2 + tp + ta + 2 * td)) * Ps,
        o1,
    )
    c2 = EnergyBreakdown(
        c1.e_tx - tp * Pr,
        c1.e_rx,
        c1.e_poll - (tl - tp) / 2 * Pl,
        c1.e_sleep + (tl + tp) / 2 * Ps,
        o1,
    )
    c3 = EnergyBreakdown(
        tp * Pt + ta * Pr + td * Pt + Et1,
        tp * Pr + ta * Pt + td * Pr + Er1,
        (tl + tl + tl / 2) * Pl + El1,
        (3 * tf - (tl + tp + ta + td) - tl - (tl / 2 + tp + ta + td)) * Ps + Es1,
        o3,
    )
    c4 = EnergyBreakdown(
        g * tp * (Pt + Pr) + 2 * ta * Pr + 2 * td * Pt,
        (tp + 2 * td) * Pr + ta * Pt,
        (tl + tl / 2 + 2 * (g - 1) * ta + (tp + ta) / 2) * Pl,
        (3 * tf - (tl + g * (tp + ta) + td) - (tl / 2 + g * (tp + ta) + td)
         - ((tp + ta) / 2 + tp + ta + 2 * td)) * Ps,
        o4,
    )
    c5 = EnergyBreakdown(
        (g * tp + td) * Pt + ta * Pr + (u * tp + ta) * Pr + td * Pt,
        (tp + 2 * td) * Pr + ta * Pt,
        (tl + (g - 1) * ta + (tp + ta) / 2 + u * (tp + ta) / 2 + (1 - u) * tp / 2) * Pl,
        (3 * tf - (tl + g * (tp + ta) + td)
         - (u * (tp + ta) / 2 + (1 - u) * tp / 2 + u * tp + ta + td)
         - ((tp + ta) / 2 + tp + ta + 2 * td)) * Ps,
        o4,
    )
    c6 = EnergyBreakdown(
        g * tp * Pt + ta * Pr + td * Pt + Et1,
        (tp + td) * Pr + ta * Pt + Er1,
        (tl + (g - 1) * ta) * Pl + tl * Pl + (tp + ta) / 2 * Pl + El1,
        (3 * tf - (tl + g * (tp + ta) + td) + tl + ((tp + ta) / 2 + tp + ta + td)) * Ps + Es1,
        o3,
    )
    c7 = EnergyBreakdown(
        (g * tp + td) * Pt + ta * Pr + (g2 * tp + ta) * Pr + td * Pt,
        (tp + td) * Pr + ta * Pt + td * Pr,
        (tl + (g - 1) * ta) * Pl + ((g2 - 1) * ta + (tp + ta) / 2) * Pl + (tp + ta) / 2 * Pl,
        (3 * tf - (tl + g * (tp + ta) + td) - ((tp + ta) / 2 + g2 * (tp + ta) + td)
         - ((tp + ta) / 2 + tp + ta + 2 * td)) * Ps,
        o4,
    )
    c8 = EnergyBreakdown(Et1 + td * Pt, Er1 + td * Pr, El1 - td * Pl, Es1 - td * Ps, Eo1)

    cases = [
        CaseOutcome("XMAC/B2/Case1", two * p * p, c1),
        CaseOutcome("XMAC/B2/Case2", two * p * (1 - p) * q, c2),
        CaseOutcome("XMAC/B2/Case3", two * p * (1 - p) * (1 - q), c3),
        CaseOutcome("XMAC/B2/Case4", two * (1 - p) * p, c4),
        CaseOutcome("XMAC/B2/Case5", two * half * q, c5),
        CaseOutcome("XMAC/B2/Case6", two * half * (1 - q), c6),
        CaseOutcome("XMAC/B2/Case7", two * half, c7),
        CaseOutcome("XMAC/B2/Case8", 1 / n, c8),
    ]
    return _result(cases, diagnostics)


# --- LA-MAC ------------------------------------------------------------------

def _lamac_active(power: RadioPowerProfile, timing: TimingProfile, d: DerivedProbabilities) -> EnergyBreakdown:
    Pt, Pr, Pl, Ps = power.p_tx, power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta, tg = timing.lamac_preamble, timing.lamac_ack, timing.lamac_schedule
    p, g = d.p_sync, d.gamma_l

    # same grouping as X-MAC so that t_g = 0 reproduces it bit for bit
    e_t = ((1 - p) * g + p) * tp * Pt + ta * Pr + td * Pt + tg * Pr
    e_r = (tp + td) * Pr + (ta + tg) * Pt
    e_l = ((tl + (1 - p) * (g - 1) * ta) + (tl - tp - ta)) * Pl
    e_s = (2 * tf - (tl + (1 - p) * g * tp + p * tp + ta + (1 - p) * (g - 1) * ta + td + tg)
           - (tl + td + tg)) * Ps
    return EnergyBreakdown(e_t, e_r, e_l, e_s)


def _lamac_overhear_leaves(power: RadioPowerProfile, timing: TimingProfile,
                           d: DerivedProbabilities) -> list[tuple[str, float, float]]:
    Pr, Pl, Ps = power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta, tg = timing.lamac_preamble, timing.lamac_ack, timing.lamac_schedule
    p, pc, pd, pe = d.p_sync, d.p_c, d.p_d, d.p_e

    c1 = tl / 2 * Pl + tp * Pr + (tf - tl / 2 - tp) * Ps
    c2 = tp / 2 * Pl + ta * Pr + (tf - tp / 2 - ta) * Ps
    c3 = ta / 2 * Pl + tg * Pr + (tf - ta / 2 - tg) * Ps
    c4 = tg / 2 * Pl + td * Pr + (tf - tg / 2 - td) * Ps
    c5 = tl * Pl + (tf - tl) * Ps
    c11 = (tp + ta) / 2 * Pl + tp * Pr + (tf - (tp + ta) / 2 - tp) * Ps
    rest = 1 - pc - pd - pe
    half = (1 - p) ** 2 * 0.5
    return [
        ("Case1", p * p, c1),
        ("Case2", p * (1 - p) * pc, c2),
        ("Case3", p * (1 - p) * pd, c3),
        ("Case4", p * (1 - p) * pe, c4),
        ("Case5", p * (1 - p) * rest, c5),
        ("Case6", (1 - p) * p, c1),
        ("Case7", half * pc, c2),
        ("Case8", half * pd, c3),
        ("Case9", half * pe, c4),
        ("Case10", half * rest, c5),
        ("Case11", half, c11),
    ]


def lamac_b1(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    _require_buffer(scenario, 1)
    d = derive(power, timing)
    return _lamac_b1(power, timing, scenario.n_devices, d)


def _lamac_b1(power, timing, n: int, d: DerivedProbabilities) -> AnalyticResult:
    active = _lamac_active(power, timing, d)
    return _b1_tree("LAMAC/B1", active, n - 1, _lamac_overhear_leaves(power, timing, d))


def lamac_b2(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> AnalyticResult:
    _require_buffer(scenario, 2)
    Pt, Pr, Pl, Ps = power.p_tx, power.p_rx, power.p_poll, power.p_sleep
    tf, tl, td = timing.t_frame, timing.t_listen, timing.t_data
    tp, ta, tg = timing.lamac_preamble, timing.lamac_ack, timing.lamac_schedule
    n = scenario.n_devices
    d = derive(power, timing)
    p, g = d.p_sync, d.gamma_l
    q2, q5 = d.q_l_case2, d.q_l_case5
    g2 = math.floor(g / 2)
    diagnostics: list[str] = [f"{name} clamped to 1" for name in d.clamped]

    one = _lamac_b1(power, timing, n, d).expected
    Et1, Er1, El1, Es1, Eo1 = one.components()
    two = (n - 1) / n
    n_o = max(n - 2, 0)
    half = (1 - p) ** 2 * 0.5

    def o_busy(p_busy: float, poll: float, rx: float) -> float:
        busy = poll * Pl + rx * Pr + (tf - poll - rx) * Ps
        free = tl * Pl + (tf - tl) * Ps
        return n_o * (p_busy * busy + (1 - p_busy) * free)

    p_c1 = _clamp1("LAMAC/B2 p_case1", (2 * (tp + ta + td) + tg) / tf, diagnostics)
    p_c4 = _clamp1("LAMAC/B2 p_case4", (g * (tp + ta) + (tp + ta) + tg + 2 * td) / tf, diagnostics)
    o1 = o_busy(p_c1, tl / 2, td)
    o4 = o_busy(p_c4, (tp + ta) / 2, tp)

    rx_extra = (tp + td) * Pr + ta * Pt
    c1 = EnergyBreakdown(
        tp * Pt + ta * Pr + (tp + ta) * (Pr + Pt) + tg * Pt + td * Pt,
        Er1 + rx_extra,
        (El1 - (tp + ta) * Pl) + tl / 2 * Pl,
        (Es1 - td * Ps) - (tf - tl / 2 - tp - ta - tg - td) * Ps,
        o1,
    )
    c2 = EnergyBreakdown(
        Et1 + (tg + 2 * ta) * Pr + (tp + td) * Pt,
        Er1 + rx_extra,
        (El1 - (tp + ta) * Pl) + tp / 2 * Pl,
        Es1 - (tf - tp / 2 - tp - ta - tg - td) * Ps,
        o1,
    )
    c3 = one.scale(2)
    c4 = EnergyBreakdown(
        Et1 + g * tp * Pr + 2 * ta * Pr + tg * Pr + (tp + td) * Pt,
        Er1 + rx_extra,
        (El1 - (tp + ta) * Pl) + ((g - 1) * ta + tl / 2) * Pl,
        Es1 - (tf - (g + 1) * (tp + ta) - tg - td - tl / 2) * Ps,
        o4,
    )
    c5 = EnergyBreakdown(c2.e_tx, c2.e_rx, c2.e_poll, c2.e_sleep, o4)
    c7 = EnergyBreakdown(
        Et1 + g2 * tp * Pr + 2 * ta * Pr + (tp + td) * Pt + tg * Pr,
        Er1 + rx_extra,
        (El1 - (tp + ta) * Pl) + ((g2 - 1) * ta + (tp + ta) / 2) * Pl,
        Es1 - (tf - (g2 + 1) * (tp + ta) - (tp + ta) / 2 - tg - td) * Ps,
        o4,
    )
    c8 = EnergyBreakdown(Et1 + td * Pt, Er1 + td * Pr, El1 - td * Pl, Es1 - td * Ps, Eo1)

    cases = [
        CaseOutcome("LAMAC/B2/Case1", two * p * p, c1),
        CaseOutcome("LAMAC/B2/Case2", two * p * (1 - p) * q2, c2),
        CaseOutcome("LAMAC/B2/Case3", two * p * (1 - p) * (1 - q2), c3),
        CaseOutcome("LAMAC/B2/Case4", two * (1 - p) * p, c4),
        CaseOutcome("LAMAC/B2/Case5", two * half * q5, c5),
        CaseOutcome("LAMAC/B2/Case6", two * half * (1 - q5), c3),
        CaseOutcome("LAMAC/B2/Case7", two * half, c7),
        CaseOutcome("LAMAC/B2/Case8", 1 / n, c8),
    ]
    return _result(cases, diagnostics)


# --- dispatch ------------------------------------------------------------------

_EXACT = {
    (Protocol.XMAC, 1): xmac_b1,
    (Protocol.XMAC, 2): xmac_b2,
    (Protocol.LAMAC, 1): lamac_b1,
    (Protocol.LAMAC, 2): lamac_b2,
}


def expected_energy(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario,
                    extrapolate: bool = False) -> AnalyticResult:
    """Expected energy for any (protocol, B).

    X-MAC and LA-MAC have exact trees only for ``B <= 2``.  Beyond that the
    call fails unless ``extrapolate`` is set, in which case the B=1 -> B=2
    increment is continued linearly and the result is flagged.
    """
    protocol = Protocol.parse(scenario.protocol)
    b = scenario.buffer_size
    if b == 0:
        return idle_energy(power, timing, scenario)
    if protocol is Protocol.BMAC:
        return bmac_energy(power, timing, scenario)
    if b <= 2:
        return _EXACT[protocol, b](power, timing, scenario)
    if not extrapolate:
        raise UnsupportedBufferSize(b, protocol)
    e1 = _EXACT[protocol, 1](power, timing, scenario.with_buffer(1))
    e2 = _EXACT[protocol, 2](power, timing, scenario.with_buffer(2))
    step = e2.expected - e1.expected
    expected = e2.expected + step.scale(b - 2)
    return AnalyticResult(expected, (), True, e2.diagnostics + (f"linear extrapolation from B=2 to B={b}",))
