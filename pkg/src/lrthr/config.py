"""Scenario configuration: YAML loading, validation, overrides.

Every field defaults to the full-size (200 node) scenario; a config file
only needs to list what it changes.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .topology import ConfigurationError

POLICIES = ("lrthr", "thvr", "speed")
FEEDBACK_MODES = ("piggyback", "explicit", "hello_only")


@dataclass
class TopologyConfig:
    count: int = 200
    field: tuple[float, float] = (200.0, 200.0)
    radio_range: float = 40.0
    source_region: tuple[float, float, float, float] = (0.0, 0.0, 40.0, 40.0)
    sink: tuple[float, float] = (200.0, 200.0)
    # resample placement until no node other than the sink is a greedy void
    void_free: bool = True
    max_placement_tries: int = 200


@dataclass
class TrafficConfig:
    sources: int = 10
    rate: float = 1.0
    payload: int = 150
    packets: int = 500


@dataclass
class ProtocolConfig:
    policy: str = "lrthr"
    weights: tuple[float, float, float] = (0.1, 0.8, 0.1)
    lrthr_strict: bool = False
    thvr_c: float = 0.9
    thvr_drop_control: bool = True
    thvr_drop_hops: int = 1
    speed_k: float = 10.0


@dataclass
class EstimatorConfig:
    alpha: float = 0.6
    beta: float = 0.5
    window: int = 30
    initial_prr: float = 1.0
    initial_delay: float | None = None


@dataclass
class ChannelConfig:
    prr_low: float = 0.7
    prr_high: float = 1.0
    bandwidth: float = 4800.0
    base_service: float = 0.002
    queue_increment: float = 0.004
    backoff: float = 0.008
    max_retries: int = 7
    evict_after: int = 1
    ack_size: int = 14
    ack_guard: float = 0.002
    hello_size: int = 36
    feedback: str = "piggyback"
    piggyback_bytes: int = 6


@dataclass
class EnergyConfig:
    initial: float = 2.0
    tx: float = 0.0255
    rx: float = 0.021
    idle: float = 0.0096
    sleep: float = 0.000005
    sink_powered: bool = True


@dataclass
class ScenarioConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    estimators: EstimatorConfig = field(default_factory=EstimatorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    hello_period: float = 5.0
    neighbor_timeout: float = 12.5
    deadline: float = 0.35
    deadlines: list[float] = field(default_factory=lambda: [round(0.1 + 0.05 * i, 2) for i in range(13)])
    drain: float = 10.0
    master_seed: int = 20240901
    seeds: int = 20

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **dotted: Any) -> "ScenarioConfig":
        out = copy.deepcopy(self)
        for key, value in dotted.items():
            _assign(out, key.replace("__", "."), value, source="<override>")
        validate(out)
        return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _line_index(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based line numbers in a YAML document."""
    index: dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}{k.value}"
                index[path] = k.start_mark.line + 1
                walk(v, path + ".")

    root = yaml.compose(text)
    if root is not None:
        walk(root, "")
    return index


def _coerce(current, value, where: str):
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigurationError(f"{where}: expected a boolean, got {value!r}")
    if isinstance(current, tuple):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        if not isinstance(value, (list, tuple)) or len(value) != len(current):
            raise ConfigurationError(f"{where}: expected {len(current)} numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if isinstance(current, list):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where}: expected a list, got {value!r}")
        return [float(v) for v in value]
    try:
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(current, float) or current is None:
            if value is None or (isinstance(value, str) and value.lower() in ("null", "none")):
                return None
            return float(value)
        if isinstance(current, str):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}: cannot use {value!r} here") from None
    return value


def _assign(cfg, dotted: str, value, source: str, line: int | None = None):
    where = f"{source}:{line}: {dotted}" if line else f"{source}: {dotted}"
    target = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(target) or not hasattr(target, part):
            raise ConfigurationError(f"{where}: unknown key")
        target = getattr(target, part)
    leaf = parts[-1]
    names = {f.name for f in dataclasses.fields(target)} if dataclasses.is_dataclass(target) else set()
    if leaf not in names:
        raise ConfigurationError(f"{where}: unknown key")
    current = getattr(target, leaf)
    if dataclasses.is_dataclass(current):
        raise ConfigurationError(f"{where}: is a section, not a value")
    setattr(target, leaf, _coerce(current, value, where))


def _flatten(d: dict, prefix="") -> list[tuple[str, Any]]:
    out = []
    for k, v in d.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _flatten(v, path + ".")
        else:
            out.append((path, v))
    return out


def validate(cfg: ScenarioConfig, lines: dict[str, int] | None = None, source: str = "<config>") -> None:
    lines = lines or {}

    def fail(key, msg):
        line = lines.get(key)
        loc = f"{source}:{line}" if line else source
        raise ConfigurationError(f"{loc}: {key}: {msg}")

    t, tr, p, e, ch, en = cfg.topology, cfg.traffic, cfg.protocol, cfg.estimators, cfg.channel, cfg.energy
    if t.count < 2:
        fail("topology.count", "need at least two nodes")
    if min(t.field) <= 0:
        fail("topology.field", "field must have positive area")
    if t.radio_range <= 0:
        fail("topology.radio_range", "must be positive")
    if t.count < tr.sources + 2:
        fail("traffic.sources", "too many sources for the node count")
    if tr.sources < 0 or tr.packets < 0:
        fail("traffic.packets", "must be non-negative")
    if tr.rate <= 0:
        fail("traffic.rate", "must be positive")
    if tr.payload <= 0:
        fail("traffic.payload", "must be positive")
    if p.policy not in POLICIES:
        fail("protocol.policy", f"must be one of {', '.join(POLICIES)}")
    if min(p.weights) < 0 or abs(sum(p.weights) - 1.0) > 1e-9:
        fail("protocol.weights", f"A+B+C must equal 1 with no negative entry, got {sum(p.weights):g}")
    if not 0 <= p.thvr_c <= 1:
        fail("protocol.thvr_c", "must be in [0, 1]")
    if p.speed_k <= 0:
        fail("protocol.speed_k", "must be positive")
    for name in ("alpha", "beta", "initial_prr"):
        if not 0 <= getattr(e, name) <= 1:
            fail(f"estimators.{name}", "must be in [0, 1]")
    if e.window < 1:
        fail("estimators.window", "must be positive")
    if not 0 <= ch.prr_low <= ch.prr_high <= 1:
        fail("channel.prr_low", "need 0 <= prr_low <= prr_high <= 1")
    if ch.bandwidth <= 0:
        fail("channel.bandwidth", "must be positive")
    if ch.max_retries < 0:
        fail("channel.max_retries", "must be non-negative")
    if ch.evict_after < 1:
        fail("channel.evict_after", "must be at least 1")
    if ch.feedback not in FEEDBACK_MODES:
        fail("channel.feedback", f"must be one of {', '.join(FEEDBACK_MODES)}")
    for name in ("initial", "tx", "rx", "idle", "sleep"):
        if getattr(en, name) < 0:
            fail(f"energy.{name}", "must be non-negative")
    if cfg.hello_period <= 0:
        fail("hello_period", "must be positive")
    if cfg.deadline <= 0 or any(d <= 0 for d in cfg.deadlines):
        fail("deadlines", "deadlines must be positive")
    if cfg.seeds < 1:
        fail("seeds", "need at least one seed")


def from_dict(data: dict | None, source: str = "<config>", lines: dict[str, int] | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig()
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    for key, value in _flatten(data):
        _assign(cfg, key, value, source, lines.get(key))
    validate(cfg, lines, source)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigurationError(f"{where}: not valid YAML ({getattr(exc, 'problem', exc)})") from None
    return from_dict(data, str(path), lines)


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))


def apply_overrides(cfg: ScenarioConfig, overrides: list[str]) -> ScenarioConfig:
    """Apply ``key=value`` strings (dotted keys, YAML-parsed values)."""
    out = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw) if raw.strip() else raw
        _assign(out, key.strip(), value, source="--override")
    validate(out, source="--override")
    return out


def desk_scale(cfg: ScenarioConfig | None = None) -> ScenarioConfig:
    """50 nodes on 100 m x 100 m (same 0.005 node/m^2 density), sink in the
    far corner, sources in the opposite 25 m square."""
    cfg = copy.deepcopy(cfg or ScenarioConfig())
    cfg.topology.count = 50
    cfg.topology.field = (100.0, 100.0)
    cfg.topology.source_region = (0.0, 0.0, 25.0, 25.0)
    cfg.topology.sink = (100.0, 100.0)
    cfg.traffic.packets = 30
    cfg.seeds = 40
    return cfg
