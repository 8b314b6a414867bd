"""Deadline-aware, link-reliability-aware two-hop routing for WSNs, with
SPEED-like and THVR-like baselines and a small discrete-event simulator."""

__version__ = "0.1.0"

from .config import ScenarioConfig, apply_overrides, desk_scale, load_config  # noqa: E402
from .forwarding import (  # noqa: E402
    Decision,
    ForwardingContext,
    ForwardingWeights,
    decide_lrthr,
    decide_speed,
    decide_thvr,
)
from .simulator import Simulation, run  # noqa: E402

__all__ = [
    "Decision",
    "ForwardingContext",
    "ForwardingWeights",
    "ScenarioConfig",
    "Simulation",
    "apply_overrides",
    "decide_lrthr",
    "decide_speed",
    "decide_thvr",
    "desk_scale",
    "load_config",
    "run",
]
