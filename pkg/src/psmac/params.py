"""Radio, timing and scenario parameters shared by the analytic model and the simulator.

All durations are in seconds and all powers in watts.  The flat configuration
file (see :func:`load_config`) uses milliseconds and milliwatts instead, because
that is how radio datasheets and protocol settings are usually written down.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """A configuration violates one of the parameter invariants."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        msg = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(msg)


class Protocol(str, enum.Enum):
    BMAC = "BMAC"
    XMAC = "XMAC"
    LAMAC = "LAMAC"

    @classmethod
    def parse(cls, name: str | Protocol) -> Protocol:
        if isinstance(name, Protocol):
            return name
        key = name.strip().upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError("unknown protocol", repr(name)) from None


@dataclass(frozen=True)
class RadioPowerProfile:
    p_tx: float
    p_rx: float
    p_poll: float
    p_sleep: float

    def scaled(self, k: float) -> RadioPowerProfile:
        return RadioPowerProfile(self.p_tx * k, self.p_rx * k, self.p_poll * k, self.p_sleep * k)


@dataclass(frozen=True)
class TimingProfile:
    t_frame: float
    t_listen: float
    t_sleep: float
    t_data: float
    bmac_preamble: float
    xmac_preamble: float
    xmac_ack: float
    xmac_backoff: float
    lamac_preamble: float
    lamac_ack: float
    lamac_schedule: float


@dataclass(frozen=True)
class NetworkScenario:
    n_devices: int
    buffer_size: int
    protocol: Protocol = Protocol.BMAC

    def with_buffer(self, b: int) -> NetworkScenario:
        return replace(self, buffer_size=b)

    def with_protocol(self, protocol: Protocol | str) -> NetworkScenario:
        return replace(self, protocol=Protocol.parse(protocol))


@dataclass(frozen=True)
class DerivedProbabilities:
    p_sync: float
    gamma_x: float
    gamma_l: float
    q_x: float
    u_x: float
    q_l_case2: float
    q_l_case5: float
    p_a: float
    p_b: float
    p_c: float
    p_d: float
    p_e: float
    # names of probabilities that had to be clamped into [0, 1]
    clamped: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnergyBreakdown:
    """Expected energy split by radio activity, in joules.

    ``e_total`` is always recomputed from the components, so the additivity
    invariant holds by construction.
    """

    e_tx: float = 0.0
    e_rx: float = 0.0
    e_poll: float = 0.0
    e_sleep: float = 0.0
    e_overhear: float = 0.0
    e_total: float = field(init=False)

    def __post_init__(self):
        total = self.e_tx + self.e_rx + self.e_poll + self.e_sleep + self.e_overhear
        object.__setattr__(self, "e_total", total)

    def components(self) -> tuple[float, float, float, float, float]:
        return (self.e_tx, self.e_rx, self.e_poll, self.e_sleep, self.e_overhear)

    def __add__(self, other: EnergyBreakdown) -> EnergyBreakdown:
        return EnergyBreakdown(*(a + b for a, b in zip(self.components(), other.components())))

    def __sub__(self, other: EnergyBreakdown) -> EnergyBreakdown:
        return EnergyBreakdown(*(a - b for a, b in zip(self.components(), other.components())))

    def scale(self, k: float) -> EnergyBreakdown:
        return EnergyBreakdown(*(k * c for c in self.components()))

    def is_nonnegative(self) -> bool:
        return all(c >= 0.0 for c in self.components())


# Datasheet-style placeholders for a CC1100-class transceiver at 3 V.
DEFAULT_POWER = RadioPowerProfile(p_tx=50.7e-3, p_rx=46.8e-3, p_poll=46.8e-3, p_sleep=1.2e-6)

DEFAULT_TIMING = TimingProfile(
    t_frame=0.250,
    t_listen=0.025,
    t_sleep=0.225,
    t_data=0.020,  # 50 bytes at 20 kbps
    bmac_preamble=0.250,
    xmac_preamble=0.004,
    xmac_ack=0.004,
    xmac_backoff=0.050,
    lamac_preamble=0.004,
    lamac_ack=0.004,
    lamac_schedule=0.012,
)

DEFAULT_N_DEVICES = 9

_FRAME_RTOL = 1e-9


@dataclass(frozen=True)
class Config:
    """A validated (power, timing, scenario) triple."""

    power: RadioPowerProfile
    timing: TimingProfile
    scenario: NetworkScenario


def _check(cond: bool, invariant: str, detail: str = "") -> None:
    if not cond:
        raise ConfigError(invariant, detail)


def validate(power: RadioPowerProfile, timing: TimingProfile, scenario: NetworkScenario) -> Config:
    """Check every parameter invariant; raise :class:`ConfigError` naming the first violation."""
    for f in fields(power):
        v = getattr(power, f.name)
        _check(math.isfinite(v) and v >= 0.0, "powers must be >= 0", f"{f.name}={v!r}")
    _check(power.p_sleep <= power.p_poll, "sleep must be the lowest-power state",
           f"p_sleep={power.p_sleep!r} > p_poll={power.p_poll!r}")

    for f in fields(timing):
        v = getattr(timing, f.name)
        _check(math.isfinite(v) and v > 0.0, "durations must be > 0", f"{f.name}={v!r}")
    lhs, rhs = timing.t_frame, timing.t_listen + timing.t_sleep
    _check(abs(lhs - rhs) <= _FRAME_RTOL * max(lhs, rhs), "frame identity t_frame = t_listen + t_sleep",
           f"{lhs!r} != {timing.t_listen!r} + {timing.t_sleep!r}")
    _check(abs(timing.bmac_preamble - timing.t_frame) <= _FRAME_RTOL * timing.t_frame,
           "B-MAC preamble must span a full frame", f"bmac_preamble={timing.bmac_preamble!r}")
    _check(timing.t_listen > timing.xmac_preamble + timing.xmac_ack,
           "gamma precondition t_listen > xmac_preamble + xmac_ack",
           f"{timing.t_listen!r} <= {timing.xmac_preamble!r} + {timing.xmac_ack!r}")
    _check(timing.t_listen > timing.lamac_preamble + timing.lamac_ack,
           "gamma precondition t_listen > lamac_preamble + lamac_ack",
           f"{timing.t_listen!r} <= {timing.lamac_preamble!r} + {timing.lamac_ack!r}")

    _check(isinstance(scenario.n_devices, int) and scenario.n_devices >= 1,
           "n_devices must be >= 1", repr(scenario.n_devices))
    _check(isinstance(scenario.buffer_size, int) and scenario.buffer_size >= 0,
           "buffer_size must be >= 0", repr(scenario.buffer_size))
    Protocol.parse(scenario.protocol)
    return Config(power, timing, scenario)


def _clamp01(name: str, v: float, clamped: list[str]) -> float:
    if v > 1.0:
        clamped.append(name)
        return 1.0
    if v < 0.0:
        clamped.append(name)
        return 0.0
    return v


def derive(power: RadioPowerProfile, timing: TimingProfile) -> DerivedProbabilities:
    """Probabilities and expected preamble counts used by the closed-form model.

    ``power`` is accepted for signature symmetry with the other model entry
    points; none of the derived quantities depend on it.
    """
    tf, tl = timing.t_frame, timing.t_listen
    tpx, tax = timing.xmac_preamble, timing.xmac_ack
    tpl, tal = timing.lamac_preamble, timing.lamac_ack

    clamped: list[str] = []
    p = tl / tf
    gamma_x = 1.0 / ((tl - tax - tpx) / tf)
    gamma_l = 1.0 / ((tl - tal - tpl) / tf)
    q_x = (tl - tax) / tf
    u_x = (tpx + tax) / (2.0 * tpx + tax)
    q_l_case2 = _clamp01("q_l_case2", 1.0 / gamma_l + (tl - tal) / tf, clamped)
    q_l_case5 = 1.0 / gamma_l
    return DerivedProbabilities(
        p_sync=p,
        gamma_x=gamma_x,
        gamma_l=gamma_l,
        q_x=q_x,
        u_x=u_x,
        q_l_case2=q_l_case2,
        q_l_case5=q_l_case5,
        p_a=tpx / tf,
        p_b=tax / tf,
        p_c=tpl / tf,
        p_d=tal / tf,
        p_e=timing.lamac_schedule / tf,
        clamped=tuple(clamped),
    )


# --- flat key = value configuration -----------------------------------------

# key -> (section, field, unit scale from file units to SI)
_MS = 1e-3
_MW = 1e-3
CONFIG_KEYS: dict[str, tuple[str, str, float]] = {
    "p_tx": ("power", "p_tx", _MW),
    "p_rx": ("power", "p_rx", _MW),
    "p_poll": ("power", "p_poll", _MW),
    "p_sleep": ("power", "p_sleep", _MW),
    "t_frame": ("timing", "t_frame", _MS),
    "t_listen": ("timing", "t_listen", _MS),
    "t_sleep": ("timing", "t_sleep", _MS),
    "t_data": ("timing", "t_data", _MS),
    "bmac_preamble": ("timing", "bmac_preamble", _MS),
    "xmac_preamble": ("timing", "xmac_preamble", _MS),
    "xmac_ack": ("timing", "xmac_ack", _MS),
    "xmac_backoff": ("timing", "xmac_backoff", _MS),
    "lamac_preamble": ("timing", "lamac_preamble", _MS),
    "lamac_ack": ("timing", "lamac_ack", _MS),
    "lamac_schedule": ("timing", "lamac_schedule", _MS),
    "n_devices": ("scenario", "n_devices", 1),
}


@dataclass
class ConfigFile:
    """Parsed configuration values, still unvalidated."""

    power: RadioPowerProfile = DEFAULT_POWER
    timing: TimingProfile = DEFAULT_TIMING
    n_devices: int = DEFAULT_N_DEVICES

    def apply(self, key: str, raw: str | float | int) -> None:
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown configuration key", repr(key))
        section, name, scale = CONFIG_KEYS[key]
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ConfigError("configuration value is not a number", f"{key} = {raw!r}") from None
        if section == "scenario":
            if value != int(value):
                raise ConfigError("n_devices must be an integer", repr(raw))
            self.n_devices = int(value)
        elif section == "power":
            self.power = replace(self.power, **{name: value * scale})
        else:
            self.timing = replace(self.timing, **{name: value * scale})

    def as_file_units(self) -> dict[str, float | int]:
        out: dict[str, float | int] = {}
        for key, (section, name, scale) in CONFIG_KEYS.items():
            if section == "scenario":
                out[key] = self.n_devices
            else:
                src = self.power if section == "power" else self.timing
                out[key] = getattr(src, name) / scale
        return out

    def digest(self) -> str:
        text = "\n".join(f"{k}={v!r}" for k, v in sorted(self.as_file_units().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def scenario(self, protocol: Protocol | str, buffer_size: int) -> NetworkScenario:
        return NetworkScenario(self.n_devices, buffer_size, Protocol.parse(protocol))


def parse_config(text: str) -> ConfigFile:
    cfg = ConfigFile()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("malformed configuration line", f"line {lineno}: {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg.apply(key, value)
    return cfg


def load_config(path: str | Path | None) -> ConfigFile:
    if path is None:
        return ConfigFile()
    return parse_config(Path(path).read_text())


def dump_config(cfg: ConfigFile) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in cfg.as_file_units().items())


__all__ = [
    "CONFIG_KEYS",
    "Config",
    "ConfigError",
    "ConfigFile",
    "DEFAULT_N_DEVICES",
    "DEFAULT_POWER",
    "DEFAULT_TIMING",
    "DerivedProbabilities",
    "EnergyBreakdown",
    "NetworkScenario",
    "Protocol",
    "RadioPowerProfile",
    "TimingProfile",
    "derive",
    "dump_config",
    "load_config",
    "parse_config",
    "validate",
]
