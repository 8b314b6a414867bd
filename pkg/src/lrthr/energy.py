"""Per-node battery ledger."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

CAUSES = ("tx", "rx", "idle", "sleep")


class DeadNodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergyCosts:
    """Radio costs. tx/rx are joules per reference-size packet; idle/sleep
    are joules per second."""

    tx: float = 0.0255
    rx: float = 0.021
    idle: float = 0.0096
    sleep: float = 0.000005
    initial: float = 2.0


@dataclass
class EnergyLedger:
    """Residual energy and per-cause consumption for every node.

    Nodes in ``exempt`` (the mains-powered sink) are never charged.
    """

    costs: EnergyCosts
    nodes: list[int]
    exempt: frozenset[int] = frozenset()
    initial: dict[int, float] = field(init=False)
    residual: dict[int, float] = field(init=False)
    totals: dict[int, dict[str, float]] = field(init=False)
    last_settled: dict[int, float] = field(init=False)
    dead: set[int] = field(init=False)

    def __post_init__(self):
        self.dead = set()
        self.initial = {n: self.costs.initial for n in self.nodes}
        self.residual = dict(self.initial)
        self.totals = {n: dict.fromkeys(CAUSES, 0.0) for n in self.nodes}
        self.last_settled = dict.fromkeys(self.nodes, 0.0)

    def alive(self, node: int) -> bool:
        return node in self.exempt or (self.residual[node] > 0.0 and node not in self.dead)

    def can_afford(self, node: int, cause: str, count: float = 1.0) -> bool:
        if node in self.exempt:
            return True
        return self.alive(node) and self.residual[node] >= getattr(self.costs, cause) * count

    def retire(self, node: int) -> None:
        """Mark a node dead once it can no longer afford a transmission."""
        if node not in self.exempt:
            self.dead.add(node)

    def _debit(self, node: int, cause: str, joules: float) -> float:
        if node in self.exempt or joules == 0.0:
            return 0.0
        if not self.alive(node):
            raise DeadNodeError(f"node {node} is depleted")
        taken = min(joules, self.residual[node])
        self.residual[node] -= taken
        if taken < joules:
            self.residual[node] = 0.0
        self.totals[node][cause] += taken
        return taken

    def charge(self, node: int, cause: str, count: float = 1.0) -> float:
        """Debit ``count`` packet-equivalents of tx or rx; returns joules taken.

        Fractional counts charge short frames (ACKs, HELLOs) pro rata.
        """
        if cause not in ("tx", "rx"):
            raise ValueError(f"charge() takes tx or rx, not {cause!r}")
        if count < 0:
            raise ValueError("count must be non-negative")
        return self._debit(node, cause, getattr(self.costs, cause) * count)

    def charge_time(self, node: int, cause: str, duration: float) -> float:
        if cause not in ("idle", "sleep"):
            raise ValueError(f"charge_time() takes idle or sleep, not {cause!r}")
        if duration < 0:
            raise ValueError("duration must be non-negative")
        return self._debit(node, cause, getattr(self.costs, cause) * duration)

    def settle(self, node: int, now: float) -> float:
        """Charge idle time accrued since the node's last settlement."""
        last = self.last_settled[node]
        self.last_settled[node] = now
        if node in self.exempt or not self.alive(node) or now <= last:
            return 0.0
        return self.charge_time(node, "idle", now - last)

    def energy_ratio(self, node: int) -> float:
        if node in self.exempt:
            return 1.0
        if not self.alive(node):
            return 0.0
        init = self.initial[node]
        return self.residual[node] / init if init > 0 else 0.0

    def consumed(self, node: int) -> float:
        return math.fsum(self.totals[node].values())

    def total_consumed(self) -> float:
        return math.fsum(self.consumed(n) for n in self.nodes)
