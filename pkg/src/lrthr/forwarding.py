"""Next-hop selection: LRTHR plus THVR-like and SPEED-like baselines.

All decision functions are pure over a :class:`ForwardingContext`; the
only randomness (SPEED's probabilistic choice) comes from a caller-owned
generator.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

log = logging.getLogger(__name__)

Pair = tuple[int, int]


class PacketExpired(Exception):
    """The packet's lag time is exhausted."""


class Reason(str, enum.Enum):
    SELECTED = "selected"
    NO_CANDIDATE = "no_candidate"
    VELOCITY_UNREACHABLE = "velocity_unreachable"


@dataclass(frozen=True)
class Decision:
    next_hop: int | None
    reason: Reason
    chosen_metric: float = float("nan")

    def __post_init__(self):
        if (self.reason is Reason.SELECTED) != (self.next_hop is not None):
            raise ValueError("next_hop must be set exactly when reason is SELECTED")

    @classmethod
    def drop(cls, reason: Reason) -> "Decision":
        return cls(None, reason)


@dataclass(frozen=True)
class ForwardingWeights:
    a: float = 0.1
    b: float = 0.8
    c: float = 0.1

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0 or abs(self.a + self.b + self.c - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1, got {self.a}, {self.b}, {self.c}")


@dataclass(frozen=True)
class ForwardingContext:
    """Everything node ``self_node`` knows when routing one packet.

    ``dist_to_dest`` covers the node itself and every node named in the
    favorable sets. ``link_view[y]`` is ``(prr_xy, delay_xy)``;
    ``second_hop_delay[(y, z)]`` is the ``delay_yz`` last reported by ``y``.
    """

    self_node: int
    destination: int
    lag_time: float
    one_hop: frozenset[int]
    two_hop_pairs: frozenset[Pair]
    dist_to_dest: Mapping[int, float]
    link_view: Mapping[int, tuple[float, float]]
    second_hop_delay: Mapping[Pair, float] = field(default_factory=dict)
    energy_view: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def own_distance(self) -> float:
        return self.dist_to_dest[self.self_node]

    def energy_ratio(self, y: int) -> float:
        residual, initial = self.energy_view.get(y, (1.0, 1.0))
        return residual / initial if initial > 0 else 0.0


class MissingEstimate(LookupError):
    pass


def required_velocity(ctx: ForwardingContext, dist_to_dest: float | None = None) -> float:
    if ctx.lag_time <= 0:
        raise PacketExpired(f"lag time {ctx.lag_time} at node {ctx.self_node}")
    d = ctx.own_distance if dist_to_dest is None else dist_to_dest
    return d / ctx.lag_time


def one_hop_velocity(ctx: ForwardingContext, y: int) -> float:
    delay = ctx.link_view[y][1]
    if delay is None or delay <= 0:
        raise MissingEstimate(f"no usable delay estimate for {ctx.self_node}->{y}")
    return (ctx.own_distance - ctx.dist_to_dest[y]) / delay


def two_hop_velocity(ctx: ForwardingContext, pair: Pair) -> float:
    y, z = pair
    d_xy = ctx.link_view[y][1]
    d_yz = ctx.second_hop_delay.get(pair)
    if d_xy is None or d_yz is None or d_xy <= 0 or d_yz <= 0:
        raise MissingEstimate(f"no usable delay for pair {ctx.self_node}->{y}->{z}")
    return (ctx.own_distance - ctx.dist_to_dest[z]) / (d_xy + d_yz)


def update_lag_time(lt_prev: float, t_rx: float, t_tx: float, packet_size: float, bandwidth: float) -> float:
    """Lag time rewritten into the header when the packet leaves a node.

    Raises :class:`PacketExpired` when nothing is left of the budget.
    """
    if t_tx < t_rx:
        raise ValueError("transmit time precedes reception time")
    lt = lt_prev - (t_tx - t_rx + packet_size / bandwidth)
    if lt <= 0:
        raise PacketExpired(f"lag time {lt}")
    return lt


def pair_velocities(ctx: ForwardingContext) -> dict[Pair, float]:
    out = {}
    for pair in sorted(ctx.two_hop_pairs):
        try:
            out[pair] = two_hop_velocity(ctx, pair)
        except MissingEstimate as exc:
            log.debug("skipping pair: %s", exc)
    return out


def _normalized(values: Mapping[Pair, float]) -> dict[Pair, float]:
    total = sum(values.values())
    if total <= 0:
        return {k: 0.0 for k in values}
    return {k: v / total for k, v in values.items()}


def rve_metric(ctx: ForwardingContext, candidates: Mapping[Pair, float],
               weights: ForwardingWeights) -> dict[Pair, float]:
    """Shared reliability/velocity/energy score for each candidate pair.

    ``candidates`` maps each pair in S_req to its two-hop velocity. A term
    whose normalizing sum is zero contributes nothing.
    """
    prr = _normalized({p: ctx.link_view[p[0]][0] for p in candidates})
    vel = _normalized(dict(candidates))
    eng = _normalized({p: ctx.energy_ratio(p[0]) for p in candidates})
    return {p: weights.a * prr[p] + weights.b * vel[p] + weights.c * eng[p] for p in candidates}


def _argmax(scores: Mapping[Pair, float]) -> Pair:
    # ties go to the smaller next hop, then the smaller second hop
    return min(scores, key=lambda p: (-scores[p], p))


def _terminal(ctx: ForwardingContext) -> Decision | None:
    if ctx.destination in ctx.one_hop:
        return Decision(ctx.destination, Reason.SELECTED, math.inf)
    return None


def _best_one_hop(ctx: ForwardingContext) -> Decision:
    vels = {}
    for y in sorted(ctx.one_hop):
        try:
            vels[y] = one_hop_velocity(ctx, y)
        except MissingEstimate:
            continue
    if not vels:
        return Decision.drop(Reason.NO_CANDIDATE)
    y = min(vels, key=lambda n: (-vels[n], n))
    return Decision(y, Reason.SELECTED, vels[y])


def decide_lrthr(ctx: ForwardingContext, weights: ForwardingWeights, strict: bool = False) -> Decision:
    """Two-hop, reliability-aware, deadline-driven next-hop choice.

    With ``strict`` set, a packet whose required velocity no pair can
    offer is dropped instead of being sent along the fastest pair.
    """
    if not ctx.one_hop:
        return Decision.drop(Reason.NO_CANDIDATE)
    terminal = _terminal(ctx)
    if terminal:
        return terminal
    v_req = required_velocity(ctx)
    vels = pair_velocities(ctx)
    if not vels:
        return _best_one_hop(ctx)
    s_req = {p: v for p, v in vels.items() if v >= v_req}
    if len(s_req) == 1:
        (pair, v), = s_req.items()
        return Decision(pair[0], Reason.SELECTED, v)
    if not s_req:
        if strict:
            return Decision.drop(Reason.VELOCITY_UNREACHABLE)
        best = _argmax(vels)
        return Decision(best[0], Reason.SELECTED, vels[best])
    scores = rve_metric(ctx, s_req, weights)
    best = _argmax(scores)
    return Decision(best[0], Reason.SELECTED, scores[best])


def decide_thvr(ctx: ForwardingContext, energy_weight_c: float, drop_control: bool,
                setpoint: float, near_source: bool = False) -> Decision:
    """Two-hop velocity/energy baseline with a fixed velocity setpoint.

    ``energy_weight_c`` weights the velocity term; ``1 - c`` weights the
    residual energy of the first hop.
    """
    if not 0.0 <= energy_weight_c <= 1.0:
        raise ValueError("THVR weight must be in [0, 1]")
    if not ctx.one_hop:
        return Decision.drop(Reason.NO_CANDIDATE)
    terminal = _terminal(ctx)
    if terminal:
        return terminal
    vels = pair_velocities(ctx)
    if not vels:
        return _best_one_hop(ctx)
    ok = {p: v for p, v in vels.items() if v >= setpoint}
    if not ok:
        if drop_control and near_source:
            return Decision.drop(Reason.VELOCITY_UNREACHABLE)
        best = _argmax(vels)
        return Decision(best[0], Reason.SELECTED, vels[best])
    vel = _normalized(ok)
    eng = _normalized({p: ctx.energy_ratio(p[0]) for p in ok})
    scores = {p: energy_weight_c * vel[p] + (1.0 - energy_weight_c) * eng[p] for p in ok}
    best = _argmax(scores)
    return Decision(best[0], Reason.SELECTED, scores[best])


def decide_speed(ctx: ForwardingContext, setpoint: float, rng, k: float = 1.0) -> Decision:
    """One-hop SNGF-style choice among neighbors whose relay speed meets
    ``setpoint``, with probability proportional to ``speed ** k``."""
    if not ctx.one_hop:
        return Decision.drop(Reason.NO_CANDIDATE)
    terminal = _terminal(ctx)
    if terminal:
        return terminal
    vels = {}
    for y in sorted(ctx.one_hop):
        try:
            v = one_hop_velocity(ctx, y)
        except MissingEstimate:
            continue
        if v >= setpoint:
            vels[y] = v
    if not vels:
        return Decision.drop(Reason.VELOCITY_UNREACHABLE)
    nodes = list(vels)
    if len(nodes) == 1:
        return Decision(nodes[0], Reason.SELECTED, vels[nodes[0]])
    top = max(vels.values())
    # scale before exponentiating so large k cannot overflow
    w = [(vels[n] / top) ** k for n in nodes]
    total = sum(w)
    u = rng.random() * total
    acc = 0.0
    for n, wi in zip(nodes, w):
        acc += wi
        if u < acc:
            return Decision(n, Reason.SELECTED, vels[n])
    return Decision(nodes[-1], Reason.SELECTED, vels[nodes[-1]])


def context_from_fixture(fx, node: int, lag_time: float,
                         energy_view: Mapping[int, tuple[float, float]] | None = None) -> ForwardingContext:
    """Build the view of ``node`` from a fixture's declared delays and PRRs.

    Links without a declared PRR are taken as perfect; pairs whose second
    hop has no declared delay are left out of ``second_hop_delay``.
    """
    from .topology import build_neighbor_tables, favorable_one_hop, favorable_two_hop

    t = fx.topology
    tables = build_neighbor_tables(t)
    one = favorable_one_hop(node, tables, t)
    pairs = favorable_two_hop(node, tables, t)
    dists = {n: t.dist_to_dest(n) for n in {node} | one | {z for _, z in pairs}}
    link_view = {y: (fx.prrs.get((node, y), 1.0), fx.delays.get((node, y))) for y in one}
    second = {(y, z): fx.delays[y, z] for y, z in pairs if (y, z) in fx.delays}
    return ForwardingContext(node, t.destination, lag_time, frozenset(one), frozenset(pairs),
                             dists, link_view, second, dict(energy_view or {}))
