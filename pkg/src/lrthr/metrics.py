"""Per-run and cross-run statistics, plus the CSV schemas that carry them."""
from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

DROP_REASONS = ("deadline", "no_candidate", "velocity_unreachable", "energy", "retries", "in_flight")

PACKET_COLUMNS = ("id", "source", "created", "delivered_flag", "delay", "hops", "drop_reason")
ENERGY_COLUMNS = ("node_id", "x", "y", "initial", "residual", "tx_j", "rx_j", "idle_j", "sleep_j")
CURVE_COLUMNS = ("param", "metric", "mean", "sd", "n_seeds")
RUN_COLUMNS = ("policy", "param", "seed", "generated", "delivered_on_time", "missed", "dmr",
               "ecpp", "delay_avg", "delay_worst", "energy_total")
CURVE_METRICS = ("dmr", "ecpp", "delay_avg", "delay_worst")


@dataclass
class PacketRecord:
    id: int
    source: int
    created: float
    delivered: bool = False
    delay: float | None = None
    hops: int = 0
    drop_reason: str = ""

    def row(self) -> tuple:
        return (self.id, self.source, repr(self.created), int(self.delivered),
                "" if self.delay is None else repr(self.delay), self.hops, self.drop_reason)


@dataclass
class EnergyRow:
    node_id: int
    x: float
    y: float
    initial: float
    residual: float
    tx_j: float
    rx_j: float
    idle_j: float
    sleep_j: float

    @property
    def consumed(self) -> float:
        return math.fsum((self.tx_j, self.rx_j, self.idle_j, self.sleep_j))

    def row(self) -> tuple:
        return (self.node_id, repr(self.x), repr(self.y), repr(self.initial), repr(self.residual),
                repr(self.tx_j), repr(self.rx_j), repr(self.idle_j), repr(self.sleep_j))


@dataclass
class RunLedger:
    """Raw outcome of one simulation run, before aggregation."""

    packets: list[PacketRecord]
    energy: list[EnergyRow]
    energy_total: float


@dataclass
class RunMetrics:
    generated: int
    delivered_on_time: int
    missed: int
    dmr: float | None
    ecpp: float | None
    delay_avg: float | None
    delay_worst: float | None
    drops_by_reason: dict[str, int] = field(default_factory=dict)
    energy_by_node: list[EnergyRow] = field(default_factory=list)
    energy_total: float = 0.0

    @property
    def dmr_defined(self) -> bool:
        return self.dmr is not None

    @property
    def ecpp_defined(self) -> bool:
        return self.ecpp is not None

    def value(self, metric: str) -> float | None:
        return getattr(self, metric)


def finalize(ledger: RunLedger) -> RunMetrics:
    pk = ledger.packets
    generated = len(pk)
    delays = [p.delay for p in pk if p.delivered]
    on_time = len(delays)
    missed = generated - on_time
    drops = Counter(p.drop_reason for p in pk if not p.delivered)
    return RunMetrics(
        generated=generated,
        delivered_on_time=on_time,
        missed=missed,
        dmr=missed / generated if generated else None,
        ecpp=ledger.energy_total / on_time if on_time else None,
        delay_avg=math.fsum(delays) / on_time if on_time else None,
        delay_worst=max(delays) if delays else None,
        drops_by_reason={r: drops.get(r, 0) for r in DROP_REASONS},
        energy_by_node=list(ledger.energy),
        energy_total=ledger.energy_total,
    )


@dataclass(frozen=True)
class CurveRow:
    param: float
    metric: str
    mean: float
    sd: float
    n_seeds: int

    def row(self) -> tuple:
        return (repr(self.param), self.metric, repr(self.mean), repr(self.sd), self.n_seeds)


def aggregate(runs: Sequence[tuple[float, RunMetrics]],
              metrics: Iterable[str] = CURVE_METRICS) -> list[CurveRow]:
    """Mean and sample standard deviation of each metric per key value.

    ``runs`` holds ``(key, RunMetrics)`` pairs. Undefined values (e.g. ECPP
    with no deliveries) are left out of that metric's statistics.
    """
    if not runs:
        raise ValueError("aggregate() needs at least one run")
    metrics = tuple(metrics)
    by_key: dict[float, list[RunMetrics]] = {}
    for key, m in runs:
        by_key.setdefault(key, []).append(m)
    out = []
    for key in sorted(by_key):
        group = by_key[key]
        for name in metrics:
            # sorted so the floating-point sums do not depend on run order
            vals = sorted(v for v in (m.value(name) for m in group) if v is not None)
            if not vals:
                out.append(CurveRow(key, name, math.nan, math.nan, 0))
                continue
            mean = math.fsum(vals) / len(vals)
            sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
            out.append(CurveRow(key, name, mean, sd, len(vals)))
    return out


def write_csv(path, columns: Sequence[str], rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def write_packets(path, packets: Iterable[PacketRecord]) -> None:
    write_csv(path, PACKET_COLUMNS, (p.row() for p in packets))


def write_energy(path, rows: Iterable[EnergyRow]) -> None:
    write_csv(path, ENERGY_COLUMNS, (r.row() for r in rows))


def write_curve(path, rows: Iterable[CurveRow]) -> None:
    write_csv(path, CURVE_COLUMNS, (r.row() for r in rows))


def read_curve(path) -> list[CurveRow]:
    with open(path, newline="") as fh:
        return [CurveRow(float(r["param"]), r["metric"], float(r["mean"]), float(r["sd"]), int(r["n_seeds"]))
                for r in csv.DictReader(fh)]


def coefficient_of_variation(values: Sequence[float]) -> float:
    mean = math.fsum(values) / len(values)
    if mean == 0:
        return 0.0
    return statistics.pstdev(values) / mean
