"""Acceptance criteria, each checked at its stated tolerance and time budget."""

import math
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, random_config, scenario
from psmac.analytic import bmac_b1, bmac_energy, expected_energy, idle_energy, lamac_b1, lamac_b2, xmac_b1, xmac_b2
from psmac.harness import main
from psmac.metrics import check_coverage, confidence_interval, summarize
from psmac.params import ConfigFile, Protocol, RadioPowerProfile, TimingProfile, dump_config
from psmac.sim import run

# explicit profile: CC1100-class powers, 250 ms frame, 10% idle duty cycle
POWER = RadioPowerProfile(p_tx=50.7e-3, p_rx=46.8e-3, p_poll=46.8e-3, p_sleep=1.2e-6)
TIMING = TimingProfile(
    t_frame=0.250, t_listen=0.025, t_sleep=0.225, t_data=0.020, bmac_preamble=0.250,
    xmac_preamble=0.004, xmac_ack=0.004, xmac_backoff=0.050,
    lamac_preamble=0.004, lamac_ack=0.004, lamac_schedule=0.012,
)
N = 9
RUNS = 100
SEED = 0
PROTOCOLS = (Protocol.BMAC, Protocol.XMAC, Protocol.LAMAC)
BUFFERS = range(1, 51)


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def simulate(protocol, b, seed):
    return run(scenario(protocol, b, n=N), POWER, TIMING, seed, raise_on_guard=False)


@pytest.fixture(scope="session")
def sweep():
    """Every (protocol, B, run) of the full comparison, with per-run conservation checks."""
    t0 = time.perf_counter()
    results, violations = {}, []
    for p in PROTOCOLS:
        for b in BUFFERS:
            res = []
            for r in range(RUNS):
                out = simulate(p, b, SEED + r)
                try:
                    check_coverage(out.traces, out.sim_end)
                except ValueError as exc:
                    violations.append(f"{p.value} B={b} run={r}: {exc}")
                if out.received + out.lost + out.remaining != b:
                    violations.append(f"{p.value} B={b} run={r}: buffer not conserved")
                res.append(summarize(out, POWER))
            results[p, b] = res
    return results, violations, time.perf_counter() - t0


def test_criterion_1_tree_normalization():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        power, timing = random_config(rng)
        n = int(rng.integers(1, 51))
        for fn, proto, b in ((xmac_b1, "xmac", 1), (lamac_b1, "lamac", 1), (xmac_b2, "xmac", 2), (lamac_b2, "lamac", 2)):
            res = fn(power, timing, scenario(proto, b, n=n))
            worst = max(worst, abs(math.fsum(c.probability for c in res.cases) - 1.0))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-12 and elapsed < 5.0, f"max |sum p - 1| = {worst:.2e} over 1000 configs, {elapsed:.2f} s")


def test_criterion_2_bmac_linearity():
    one = bmac_b1(POWER, TIMING, scenario("bmac", 1, n=N)).expected
    bad = [b for b in range(1, 51)
           if bmac_energy(POWER, TIMING, scenario("bmac", b, n=N)).expected.components()
           != tuple(b * c for c in one.components())]
    record(2, not bad, "bit-exact for B = 1..50" if not bad else f"mismatch at B = {bad}")


def test_criterion_3_idle_equivalence():
    idle = [expected_energy(POWER, TIMING, scenario(p, 0, n=N)) for p in PROTOCOLS]
    same = idle[0] == idle[1] == idle[2] == idle_energy(POWER, TIMING, scenario("bmac", 0, n=N))
    ref = idle[0].total
    worst = 0.0
    for p in PROTOCOLS:
        for seed in range(20):
            e = summarize(simulate(p, 0, seed), POWER).total_energy
            worst = max(worst, abs(e - ref) / ref)
    record(3, same and worst <= 1e-9, f"analytic identical={same}, max sim rel err {worst:.1e} (ref {ref:.7g} J)")


def test_criterion_4_oracle():
    t0 = time.perf_counter()
    gaps = {}
    for p, fn in ((Protocol.BMAC, oracles.bmac_b1), (Protocol.XMAC, oracles.xmac_b1), (Protocol.LAMAC, oracles.lamac_b1)):
        mc = fn(POWER, TIMING, N, samples=1_000_000)
        closed = expected_energy(POWER, TIMING, scenario(p, 1, n=N)).total
        gaps[p.value] = (closed - mc) / mc
    elapsed = time.perf_counter() - t0
    ok = all(abs(g) <= 0.02 for g in gaps.values()) and elapsed < 30.0
    detail = ", ".join(f"{k} {v:+.3%}" for k, v in gaps.items())
    record(4, ok, f"{detail}; {elapsed:.1f} s")


def test_criterion_5_analytic_vs_simulation():
    t0 = time.perf_counter()
    parts, ok = [], True
    for b in (1, 2):
        for p in PROTOCOLS:
            ci = confidence_interval([summarize(simulate(p, b, SEED + r), POWER).total_energy for r in range(RUNS)])
            analytic = expected_energy(POWER, TIMING, scenario(p, b, n=N)).total
            gap = abs(ci.mean - analytic)
            tol = max(0.10 * analytic, ci.half_width)
            ok &= gap <= tol
            parts.append(f"{p.value} B={b} {(ci.mean - analytic) / analytic:+.2%}")
    elapsed = time.perf_counter() - t0
    record(5, ok and elapsed < 60.0, ", ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_6_energy_ordering(sweep):
    results, _, elapsed = sweep
    ci = {p: confidence_interval([r.total_energy for r in results[p, 50]]) for p in PROTOCOLS}
    b, x, la = ci[Protocol.BMAC], ci[Protocol.XMAC], ci[Protocol.LAMAC]
    ok = b.mean > x.mean > la.mean and not b.overlaps(x) and not x.overlaps(la) and elapsed < 300.0
    detail = (f"B=50: BMAC {b.mean:.4g}+-{b.half_width:.2g} > XMAC {x.mean:.4g}+-{x.half_width:.2g} "
              f"> LAMAC {la.mean:.4g}+-{la.half_width:.2g} J; sweep {elapsed:.0f} s")
    record(6, ok, detail)


def _aggregate_delivery(results, p, buffers):
    received = sum(round(r.delivery_ratio * b) for b in buffers for r in results[p, b])
    return received / sum(b * len(results[p, b]) for b in buffers)


def test_criterion_7_delivery(sweep):
    results, _, _ = sweep
    hi = range(10, 51)
    x = _aggregate_delivery(results, Protocol.XMAC, hi)
    la = _aggregate_delivery(results, Protocol.LAMAC, hi)
    bm = _aggregate_delivery(results, Protocol.BMAC, BUFFERS)
    record(7, x < 1.0 and la >= 0.999 and bm == 1.0,
           f"B=10..50 aggregate: XMAC {x:.4f}, LAMAC {la:.4f}; BMAC over B=1..50 {bm:.4f}")


def _mean_latency(res):
    lats = [r.mean_latency for r in res if r.mean_latency is not None]
    return math.fsum(lats) / len(lats)


def test_criterion_8_latency_crossover(sweep):
    results, _, _ = sweep
    lat = {(p, b): _mean_latency(results[p, b]) for p in (Protocol.XMAC, Protocol.LAMAC) for b in BUFFERS}
    found = None
    for bstar in range(2, 21):
        above = all(lat[Protocol.LAMAC, b] > lat[Protocol.XMAC, b] for b in range(1, bstar))
        below = all(lat[Protocol.LAMAC, b] < lat[Protocol.XMAC, b] for b in range(max(bstar, 10), 51))
        if above and below:
            found = bstar
            break
    detail = (f"B* = {found}" if found else "no crossover in [2, 20]") + (
        f"; B=1 L/X {lat[Protocol.LAMAC, 1]:.3f}/{lat[Protocol.XMAC, 1]:.3f} s,"
        f" B=50 L/X {lat[Protocol.LAMAC, 50]:.3f}/{lat[Protocol.XMAC, 50]:.3f} s")
    record(8, found is not None, detail)


def test_criterion_9_conservation(sweep):
    results, violations, _ = sweep
    n_runs = sum(len(v) for v in results.values())
    detail = f"{n_runs} runs checked" + (f"; first violation: {violations[0]}" if violations else "")
    record(9, not violations, detail)


def test_criterion_10_determinism(tmp_path, capsys):
    cfg_path = tmp_path / "explicit.cfg"
    cfg_path.write_text(dump_config(ConfigFile(POWER, TIMING, N)))
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["compare", "--config", str(cfg_path), "--protocol", "all", "--buffer-range", "1..6",
              "--runs", "10", "--seed", "7", "--out", str(out)])
        main(["simulate", "--config", str(cfg_path), "--protocol", "lamac", "--buffer", "8",
              "--runs", "5", "--seed", "7", "--out", str(out), "--trace"])
        main(["analytic", "--config", str(cfg_path), "--protocol", "all", "--buffer", "2", "--cases",
              "--out", str(out)])
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    capsys.readouterr()
    same = outputs[0] == outputs[1] and len(outputs[0]) == 9
    record(10, same, f"{len(outputs[0])} CSV files byte-identical across two invocations")
