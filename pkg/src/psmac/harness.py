"""Command-line front end: analytic tables, simulation sweeps and CSV reports.

    psmac analytic --protocol xmac --buffer 1 --cases
    psmac simulate --protocol lamac --buffer 10 --runs 100 --seed 7 --out results/
    psmac compare --buffer-range 1..50 --runs 100 --out results/
    psmac states --protocol bmac --buffer-range 0..50 --out results/

Durations on the command line and in config files are in milliseconds and
powers in milliwatts.  Every CSV starts with one ``#`` comment line naming
the tool version, the configuration digest and the seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .analytic import UnsupportedBufferSize, expected_energy
from .metrics import STATES, CiSummary, SimResult, confidence_interval, summarize
from .params import CONFIG_KEYS, ConfigError, ConfigFile, Protocol, load_config, validate
from .sim.kernel import SimOptions, dump_trace, dump_transmissions
from .sim.kernel import run as simulate_once

COMPONENTS = ("e_tx", "e_rx", "e_poll", "e_sleep", "e_overhear", "e_total")


def fmt(x: float | int | bool | None) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, str)):
        return str(x)
    return format(x, ".10g")


def parse_buffer_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if a < 0 or b < a:
        raise argparse.ArgumentTypeError(f"empty or negative buffer range {text!r}")
    return list(range(a, b + 1))


def parse_protocols(values: Sequence[str] | None) -> list[Protocol]:
    if not values or "all" in [v.lower() for v in values]:
        return list(Protocol)
    out: list[Protocol] = []
    for v in values:
        for part in v.split(","):
            p = Protocol.parse(part.strip())
            if p not in out:
                out.append(p)
    return out


class Table:
    """CSV writer with the provenance comment line."""

    def __init__(self, columns: Sequence[str], comment: str):
        self.columns = list(columns)
        self.comment = comment
        self.rows: list[list[str]] = []

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append([fmt(v) for v in values])

    def render(self) -> str:
        lines = [f"# {self.comment}", ",".join(self.columns)]
        lines += [",".join(r) for r in self.rows]
        return "\n".join(lines) + "\n"


def write_table(table: Table, out_dir: Path | None, name: str) -> None:
    text = table.render()
    if out_dir is None:
        sys.stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


# --- sweeps -----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    protocols: tuple[Protocol, ...]
    buffers: tuple[int, ...]
    runs: int = 100
    seed: int = 0
    guard_multiplier: float = 4.0
    extrapolate: bool = False

    def __post_init__(self):
        if not self.buffers:
            raise ValueError("buffer range is empty")
        if self.runs < 2:
            raise ValueError("at least two runs are needed for a confidence interval")


def _one_run(job) -> tuple[tuple, SimResult]:
    key, cfg, protocol, b, seed, options = job
    t0 = time.perf_counter()
    out = simulate_once(cfg.scenario(protocol, b), cfg.power, cfg.timing, seed, options, raise_on_guard=False)
    return key, summarize(out, cfg.power, time.perf_counter() - t0)


def run_sweep(cfg: ConfigFile, spec: SweepSpec, jobs: int = 1) -> dict[tuple[Protocol, int], list[SimResult]]:
    """All (protocol, B, run) simulations; seeds are ``spec.seed + run`` for every point."""
    for p in spec.protocols:
        validate(cfg.power, cfg.timing, cfg.scenario(p, max(spec.buffers)))
    options = SimOptions(guard_multiplier=spec.guard_multiplier)
    order = {p: i for i, p in enumerate(Protocol)}
    work = [((order[p], b, r), cfg, p, b, spec.seed + r, options)
            for p in spec.protocols for b in spec.buffers for r in range(spec.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_one_run, work, chunksize=max(1, len(work) // (jobs * 8))))
    else:
        done = [_one_run(w) for w in work]
    done.sort(key=lambda kv: kv[0])
    protocols = list(Protocol)
    results: dict[tuple[Protocol, int], list[SimResult]] = {}
    for (pi, b, _), res in done:
        results.setdefault((protocols[pi], b), []).append(res)
    return results


def _latency_ci(results: Sequence[SimResult]) -> tuple[CiSummary | None, int]:
    lats = [r.mean_latency for r in results if r.mean_latency is not None]
    if len(lats) >= 2:
        return confidence_interval(lats), len(lats)
    if len(lats) == 1:
        return CiSummary(lats[0], 0.0, 1), 1
    return None, 0


def compare_tables(cfg: ConfigFile, spec: SweepSpec,
                   results: dict[tuple[Protocol, int], list[SimResult]], comment: str) -> dict[str, Table]:
    energy = Table(["protocol", "B", "analytic_J", "sim_mean_J", "sim_ci_J", "rel_gap", "extrapolated"], comment)
    latency = Table(["protocol", "B", "latency_mean_s", "latency_ci_s", "runs_with_delivery"], comment)
    delivery = Table(["protocol", "B", "delivery_mean", "delivery_ci", "aggregate_delivery"], comment)
    states = states_table(results, comment)
    for (p, b), res in results.items():
        ci = confidence_interval([r.total_energy for r in res])
        analytic, extrapolated = None, False
        try:
            a = expected_energy(cfg.power, cfg.timing, cfg.scenario(p, b), extrapolate=spec.extrapolate)
            analytic, extrapolated = a.total, a.extrapolated
        except UnsupportedBufferSize:
            pass
        gap = None if analytic in (None, 0.0) else (ci.mean - analytic) / analytic
        energy.add(p.value, b, analytic, ci.mean, ci.half_width, gap, extrapolated)

        lat, n_lat = _latency_ci(res)
        latency.add(p.value, b, lat.mean if lat else None, lat.half_width if lat else None, n_lat)

        dci = confidence_interval([r.delivery_ratio for r in res])
        received = sum(round(r.delivery_ratio * b) for r in res)
        agg = 1.0 if b == 0 else received / (b * len(res))
        delivery.add(p.value, b, dci.mean, dci.half_width, agg)
    return {"energy_compare.csv": energy, "latency.csv": latency, "delivery.csv": delivery,
            "states.csv": states}


def states_table(results: dict[tuple[Protocol, int], list[SimResult]], comment: str) -> Table:
    table = Table(["protocol", "B"] + [f"{s.lower()}_share" for s in STATES], comment)
    for (p, b), res in results.items():
        shares = [sum(r.state_share[s] for r in res) / len(res) for s in STATES]
        table.add(p.value, b, *shares)
    return table


# --- commands ------------------------------------------------------------------------


def _comment(cfg: ConfigFile, command: str, seed: int | None = None, runs: int | None = None) -> str:
    parts = [f"psmac {__version__}", f"command={command}", f"config={cfg.digest()}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    if runs is not None:
        parts.append(f"runs={runs}")
    return " ".join(parts)


def cmd_analytic(cfg: ConfigFile, args) -> int:
    protocols = parse_protocols(args.protocol)
    buffers = _buffers(args, default=[1])
    comment = _comment(cfg, "analytic")
    if args.cases:
        table = Table(["protocol", "B", "case", "probability", *COMPONENTS], comment)
    else:
        table = Table(["protocol", "B", *COMPONENTS, "extrapolated"], comment)
    for p in protocols:
        for b in buffers:
            scenario = cfg.scenario(p, b)
            validate(cfg.power, cfg.timing, scenario)
            res = expected_energy(cfg.power, cfg.timing, scenario, extrapolate=args.extrapolate)
            if args.cases:
                for c in res.cases:
                    table.add(p.value, b, c.case_id, c.probability, *(getattr(c.energy, k) for k in COMPONENTS))
            else:
                table.add(p.value, b, *(getattr(res.expected, k) for k in COMPONENTS), res.extrapolated)
    write_table(table, _out(args), "analytic.csv")
    return 0


def cmd_simulate(cfg: ConfigFile, args) -> int:
    protocols = parse_protocols(args.protocol)
    if len(protocols) != 1:
        raise ConfigError("simulate takes exactly one protocol", ",".join(p.value for p in protocols))
    p = protocols[0]
    buffers = _buffers(args, default=[1])
    if len(buffers) != 1:
        raise ConfigError("simulate takes a single buffer size", "use compare for ranges")
    b = buffers[0]
    spec = SweepSpec((p,), (b,), args.runs, args.seed, args.guard_multiplier)
    results = run_sweep(cfg, spec, args.jobs)[p, b]
    comment = _comment(cfg, "simulate", args.seed, args.runs)

    runs = Table(["protocol", "B", "run", "seed", "energy_J", "latency_s", "delivery", "sim_end_s",
                  *[f"{s.lower()}_s" for s in STATES], "diagnostics"], comment)
    for i, r in enumerate(results):
        runs.add(p.value, b, i, args.seed + i, r.total_energy, r.mean_latency, r.delivery_ratio, r.sim_end,
                 *(r.per_state_time[s] for s in STATES), "guard_expired" if r.guard_expired else "")

    summary = Table(["protocol", "B", "metric", "mean", "ci_half_width", "n_runs"], comment)
    e = confidence_interval([r.total_energy for r in results])
    summary.add(p.value, b, "energy_J", e.mean, e.half_width, e.n_runs)
    lat, n_lat = _latency_ci(results)
    summary.add(p.value, b, "latency_s", lat.mean if lat else None, lat.half_width if lat else None, n_lat)
    d = confidence_interval([r.delivery_ratio for r in results])
    summary.add(p.value, b, "delivery", d.mean, d.half_width, d.n_runs)

    out = _out(args)
    if out is None:
        write_table(summary, None, "")
    else:
        write_table(runs, out, "simulate_runs.csv")
        write_table(summary, out, "simulate_summary.csv")
        if args.trace:
            first = simulate_once(cfg.scenario(p, b), cfg.power, cfg.timing, args.seed,
                                  SimOptions(guard_multiplier=args.guard_multiplier), raise_on_guard=False)
            (out / "trace.csv").write_text(f"# {comment}\n" + dump_trace(first))
            (out / "transmissions.csv").write_text(f"# {comment}\n" + dump_transmissions(first))
    return 0


def cmd_compare(cfg: ConfigFile, args) -> int:
    spec = SweepSpec(tuple(parse_protocols(args.protocol)), tuple(_buffers(args, default=list(range(1, 51)))),
                     args.runs, args.seed, args.guard_multiplier, args.extrapolate)
    results = run_sweep(cfg, spec, args.jobs)
    tables = compare_tables(cfg, spec, results, _comment(cfg, "compare", args.seed, args.runs))
    out = _out(args)
    if out is None:
        write_table(tables["energy_compare.csv"], None, "")
    else:
        for name, table in tables.items():
            write_table(table, out, name)
    return 0


def cmd_states(cfg: ConfigFile, args) -> int:
    spec = SweepSpec(tuple(parse_protocols(args.protocol)), tuple(_buffers(args, default=list(range(1, 51)))),
                     args.runs, args.seed, args.guard_multiplier)
    results = run_sweep(cfg, spec, args.jobs)
    write_table(states_table(results, _comment(cfg, "states", args.seed, args.runs)), _out(args), "states.csv")
    return 0


def _buffers(args, default: list[int]) -> list[int]:
    if args.buffer is not None and args.buffer_range is not None:
        raise ConfigError("conflicting options", "give either --buffer or --buffer-range")
    if args.buffer is not None:
        if args.buffer < 0:
            raise ConfigError("buffer size must be nonnegative", str(args.buffer))
        return [args.buffer]
    return args.buffer_range or default


def _out(args) -> Path | None:
    return Path(args.out) if args.out else None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value file (ms, mW)")
    common.add_argument("--protocol", action="append", metavar="NAME",
                        help="bmac, xmac, lamac or all; repeatable or comma-separated")
    common.add_argument("--buffer", type=int, metavar="B")
    common.add_argument("--buffer-range", type=parse_buffer_range, metavar="A..B")
    common.add_argument("--out", metavar="DIR", help="write CSV files here instead of stdout")
    common.add_argument("--extrapolate", action="store_true",
                        help="allow linear extrapolation of X-MAC/LA-MAC beyond B = 2")
    overrides = common.add_argument_group("configuration overrides (ms / mW)")
    for key in CONFIG_KEYS:
        overrides.add_argument("--" + key.replace("_", "-"), dest="set_" + key, metavar="V")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--runs", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--jobs", type=int, default=1, help="worker processes; output is identical for any value")
    sim.add_argument("--guard-multiplier", type=float, default=4.0)

    parser = argparse.ArgumentParser(prog="psmac", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"psmac {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analytic", parents=[common], help="closed-form expected energy")
    a.add_argument("--cases", action="store_true", help="list every leaf of the case tree")
    a.set_defaults(func=cmd_analytic)
    s = sub.add_parser("simulate", parents=[common, sim], help="repeated runs of one scenario")
    s.add_argument("--trace", action="store_true", help="also dump the first run's trace and frame log")
    s.set_defaults(func=cmd_simulate)
    c = sub.add_parser("compare", parents=[common, sim], help="analytic vs simulated sweep")
    c.set_defaults(func=cmd_compare)
    st = sub.add_parser("states", parents=[common, sim], help="radio-state shares over a sweep")
    st.set_defaults(func=cmd_states)
    return parser


def load(args) -> ConfigFile:
    cfg = load_config(args.config)
    for key in CONFIG_KEYS:
        value = getattr(args, "set_" + key, None)
        if value is not None:
            cfg.apply(key, value)
    return cfg


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        cfg = load(args)
        return args.func(cfg, args)
    except UnsupportedBufferSize as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
