"""Expected-energy model and event-driven simulator for preamble-sampling MAC protocols."""

from .analytic import AnalyticResult, CaseOutcome, UnsupportedBufferSize, expected_energy
from .params import (
    DEFAULT_N_DEVICES,
    DEFAULT_POWER,
    DEFAULT_TIMING,
    ConfigError,
    EnergyBreakdown,
    NetworkScenario,
    Protocol,
    RadioPowerProfile,
    TimingProfile,
    derive,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticResult",
    "CaseOutcome",
    "ConfigError",
    "DEFAULT_N_DEVICES",
    "DEFAULT_POWER",
    "DEFAULT_TIMING",
    "EnergyBreakdown",
    "NetworkScenario",
    "Protocol",
    "RadioPowerProfile",
    "TimingProfile",
    "UnsupportedBufferSize",
    "__version__",
    "derive",
    "expected_energy",
    "validate",
]
