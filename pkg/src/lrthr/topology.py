"""Node placement, geometry and favorable-forwarder sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid scenario or topology parameters."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def dist(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Topology:
    """Static node layout.

    ``links`` is normally ``None`` and adjacency follows from ``radio_range``.
    Hand-built fixtures may list links explicitly, and may also pin the
    favorable one-hop set of some nodes through ``declared_forwarders``.
    """

    positions: Mapping[int, Position]
    field_width: float
    field_height: float
    radio_range: float
    destination: int
    links: frozenset[tuple[int, int]] | None = None
    declared_forwarders: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.radio_range <= 0:
            raise ConfigurationError("radio_range must be positive")
        if self.field_width <= 0 or self.field_height <= 0:
            raise ConfigurationError("field dimensions must be positive")
        if self.destination not in self.positions:
            raise ConfigurationError(f"destination {self.destination} is not a node")
        for nid, p in self.positions.items():
            if not (0 <= p.x <= self.field_width and 0 <= p.y <= self.field_height):
                raise ConfigurationError(f"node {nid} at ({p.x}, {p.y}) is outside the field")

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.positions)

    def pos(self, node: int) -> Position:
        return self.positions[node]

    def dist_to_dest(self, node: int) -> float:
        return dist(self.positions[node], self.positions[self.destination])


@dataclass(frozen=True)
class NeighborTables:
    n1: Mapping[int, frozenset[int]]
    n2: Mapping[int, frozenset[int]]


def place_nodes(seed, count: int, field: tuple[float, float]) -> Topology:
    """Uniform placement of ``count`` nodes; node ``count - 1`` is the destination.

    Radio range defaults to 40 m; use :func:`place_scenario` for the full
    source/sink layout used by the simulator.
    """
    width, height = field
    if count < 2:
        raise ConfigurationError("need at least two nodes")
    if width <= 0 or height <= 0:
        raise ConfigurationError("field must have positive area")
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, 1.0, size=(count, 2)) * (width, height)
    positions = {i: Position(float(x), float(y)) for i, (x, y) in enumerate(xy)}
    return Topology(positions, width, height, 40.0, count - 1)


def place_scenario(
    seed,
    count: int,
    field: tuple[float, float],
    radio_range: float,
    sources: int,
    source_region: tuple[float, float, float, float],
    sink: tuple[float, float],
) -> tuple[Topology, list[int]]:
    """Scenario layout: ``sources`` nodes inside ``source_region``, a sink at
    ``sink`` and the remaining relays uniform over the field.

    Returns the topology and the sorted source ids. Sources are ids
    ``0..sources-1``; the sink is the last id.
    """
    width, height = field
    if width <= 0 or height <= 0:
        raise ConfigurationError("field must have positive area")
    if count < sources + 2:
        raise ConfigurationError("count must cover sources, a sink and at least one relay")
    x0, y0, x1, y1 = source_region
    if not (0 <= x0 <= x1 <= width and 0 <= y0 <= y1 <= height):
        raise ConfigurationError("source_region must lie inside the field")
    # separate streams, so adding a source only drops the last relay and the
    # rest of the layout is shared across a source-count sweep
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    src_ss, relay_ss = (np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,)) for k in (0, 1))
    src_xy = np.random.default_rng(src_ss).uniform((x0, y0), (x1, y1), size=(sources, 2))
    relay_xy = np.random.default_rng(relay_ss).uniform((0.0, 0.0), (width, height), size=(count - sources - 1, 2))
    positions = {}
    for i, (x, y) in enumerate(np.vstack([src_xy, relay_xy])):
        positions[i] = Position(float(x), float(y))
    sink_id = count - 1
    positions[sink_id] = Position(float(sink[0]), float(sink[1]))
    topo = Topology(positions, width, height, radio_range, sink_id)
    return topo, list(range(sources))


def build_neighbor_tables(t: Topology) -> NeighborTables:
    ids = t.node_ids
    adj: dict[int, set[int]] = {i: set() for i in ids}
    if t.links is not None:
        for a, b in t.links:
            adj[a].add(b)
            adj[b].add(a)
    else:
        xy = np.array([(t.positions[i].x, t.positions[i].y) for i in ids])
        d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        within = d <= t.radio_range
        for a_idx, a in enumerate(ids):
            for b_idx in np.flatnonzero(within[a_idx]):
                if b_idx != a_idx:
                    adj[a].add(ids[b_idx])
    n2 = {}
    for x in ids:
        two = set()
        for y in adj[x]:
            two |= adj[y]
        two.discard(x)
        n2[x] = frozenset(two)
    return NeighborTables({k: frozenset(v) for k, v in adj.items()}, n2)


def favorable_one_hop(x: int, tables: NeighborTables, t: Topology) -> set[int]:
    if x in t.declared_forwarders:
        return set(t.declared_forwarders[x]) & tables.n1[x]
    dx = t.dist_to_dest(x)
    return {y for y in tables.n1[x] if dx - t.dist_to_dest(y) > 0}


def favorable_two_hop(x: int, tables: NeighborTables, t: Topology) -> set[tuple[int, int]]:
    pairs = set()
    for y in favorable_one_hop(x, tables, t):
        for z in favorable_one_hop(y, tables, t):
            pairs.add((y, z))
    return pairs


# -- fixture format ---------------------------------------------------------
#
#   field <width> <height>
#   range <meters>
#   destination <id>
#   node <id> <x> <y>
#   link <a> <b>                  (optional; switches to explicit adjacency)
#   forwarder <y> <z>             (optional; pins z into F1(y))
#   delay <from> <to> <seconds>   (optional link metrics, ignored by Topology)
#   prr <from> <to> <ratio>
#
# Lines starting with '#' are comments.

@dataclass
class Fixture:
    topology: Topology
    delays: dict[tuple[int, int], float]
    prrs: dict[tuple[int, int], float]


def load_fixture(path: str | Path) -> Fixture:
    header: dict[str, list[str]] = {}
    positions: dict[int, Position] = {}
    links: set[tuple[int, int]] = set()
    declared: dict[int, set[int]] = {}
    delays: dict[tuple[int, int], float] = {}
    prrs: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        try:
            if key in ("field", "range", "destination"):
                header[key] = args
            elif key == "node":
                positions[int(args[0])] = Position(float(args[1]), float(args[2]))
            elif key == "link":
                links.add((int(args[0]), int(args[1])))
            elif key == "forwarder":
                declared.setdefault(int(args[0]), set()).add(int(args[1]))
            elif key == "delay":
                delays[int(args[0]), int(args[1])] = float(args[2])
            elif key == "prr":
                prrs[int(args[0]), int(args[1])] = float(args[2])
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown directive {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"{path}:{lineno}: malformed line {raw!r}") from exc
    for key in ("field", "range", "destination"):
        if key not in header:
            raise ConfigurationError(f"{path}: missing '{key}' header")
    topo = Topology(
        positions,
        float(header["field"][0]),
        float(header["field"][1]),
        float(header["range"][0]),
        int(header["destination"][0]),
        frozenset(links) if links else None,
        {k: frozenset(v) for k, v in declared.items()},
    )
    return Fixture(topo, delays, prrs)


def save_fixture(path: str | Path, t: Topology, delays: Mapping | None = None,
                 prrs: Mapping | None = None) -> None:
    lines = [
        f"field {t.field_width!r} {t.field_height!r}",
        f"range {t.radio_range!r}",
        f"destination {t.destination}",
    ]
    lines += [f"node {i} {t.positions[i].x!r} {t.positions[i].y!r}" for i in t.node_ids]
    if t.links is not None:
        lines += [f"link {a} {b}" for a, b in sorted(t.links)]
    for y in sorted(t.declared_forwarders):
        lines += [f"forwarder {y} {z}" for z in sorted(t.declared_forwarders[y])]
    for (a, b), v in sorted((delays or {}).items()):
        lines.append(f"delay {a} {b} {v!r}")
    for (a, b), v in sorted((prrs or {}).items()):
        lines.append(f"prr {a} {b} {v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def worked_example_fixture() -> Fixture:
    """The worked-example topology shipped with the package."""
    return load_fixture(Path(__file__).with_name("data") / "worked_example.topo")


def greedy_void_free(t: Topology, tables: NeighborTables, nodes: Iterable[int] | None = None) -> bool:
    """True when every listed node (default: all but the sink) has a favorable neighbor."""
    check = t.node_ids if nodes is None else nodes
    return all(favorable_one_hop(x, tables, t) for x in check if x != t.destination)
