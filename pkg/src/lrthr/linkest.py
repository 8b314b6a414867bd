"""Per-link PRR (windowed mean EWMA) and hop-delay (EWMA) estimators."""
from __future__ import annotations

from dataclasses import dataclass, field


class EstimatorError(RuntimeError):
    """Inconsistent estimator input; indicates a simulator bug."""


@dataclass
class PrrEstimator:
    """Receiver-side packet reception ratio estimate.

    Counts received and missed frames and folds the window ratio into
    ``current`` every ``window_size`` frames:
    ``current = alpha * current + (1 - alpha) * r / (r + m)``.
    """

    current: float = 1.0
    alpha: float = 0.6
    window_size: int = 30
    received_in_window: int = 0
    missed_in_window: int = 0

    def __post_init__(self):
        if not 0.0 <= self.current <= 1.0:
            raise ValueError("initial PRR must be in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.window_size < 1:
            raise ValueError("window_size must be positive")

    def record(self, received: bool) -> "PrrEstimator":
        if received:
            self.received_in_window += 1
        else:
            self.missed_in_window += 1
        r, m = self.received_in_window, self.missed_in_window
        if r + m >= self.window_size:
            self.current = self.alpha * self.current + (1.0 - self.alpha) * (r / (r + m))
            self.received_in_window = self.missed_in_window = 0
        return self

    def record_many(self, received: int, missed: int) -> "PrrEstimator":
        # misses are applied before the reception that revealed them
        for _ in range(missed):
            self.record(False)
        for _ in range(received):
            self.record(True)
        return self

    @property
    def value(self) -> float:
        return self.current


@dataclass
class DelayEstimator:
    """EWMA of the head-of-line-to-reception hop delay.

    ``current`` is ``None`` until the first sample when no initial value
    is configured; the first sample then seeds the estimate.
    """

    current: float | None = None
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.current is not None and self.current < 0:
            raise ValueError("initial delay must be non-negative")

    @staticmethod
    def sample_from(t_s: float, t_ack: float, ack_size: float, bandwidth: float) -> float:
        if t_ack < t_s:
            raise EstimatorError(f"ack at {t_ack} precedes head-of-line time {t_s}")
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        return max(0.0, t_ack - ack_size / bandwidth - t_s)

    def record(self, t_s: float, t_ack: float, ack_size: float, bandwidth: float) -> "DelayEstimator":
        return self.record_sample(self.sample_from(t_s, t_ack, ack_size, bandwidth))

    def record_sample(self, sample: float) -> "DelayEstimator":
        if self.current is None:
            self.current = sample
        else:
            self.current = self.beta * self.current + (1.0 - self.beta) * sample
        return self

    @property
    def value(self) -> float | None:
        return self.current


@dataclass
class LinkState:
    """Sender-side view of the directional link ``src -> dst``.

    ``prr.current`` holds the latest value reported back by ``dst``; the
    authoritative window counters live on the receiver.
    """

    src: int
    dst: int
    prr: PrrEstimator
    delay: DelayEstimator
    last_hello: float = float("-inf")


@dataclass
class LinkTable:
    """All outgoing links of one node."""

    node: int
    alpha: float = 0.6
    beta: float = 0.5
    window_size: int = 30
    initial_prr: float = 1.0
    initial_delay: float | None = None
    links: dict[int, LinkState] = field(default_factory=dict)

    def link(self, dst: int) -> LinkState:
        st = self.links.get(dst)
        if st is None:
            st = LinkState(
                self.node,
                dst,
                PrrEstimator(self.initial_prr, self.alpha, self.window_size),
                DelayEstimator(self.initial_delay, self.beta),
            )
            self.links[dst] = st
        return st

    def snapshot(self) -> list[tuple[int, float, float | None]]:
        return [(d, s.prr.current, s.delay.current) for d, s in sorted(self.links.items())]


def snapshot_links(tables: dict[int, LinkTable], node: int) -> list[tuple[int, float, float | None]]:
    """Point-in-time ``(to, prr, delay)`` rows for every outgoing link of ``node``."""
    table = tables.get(node)
    return [] if table is None else table.snapshot()


class SeqGapTracker:
    """Infers missed frames from gaps in a monotone per-link sequence."""

    __slots__ = ("last",)

    def __init__(self):
        self.last: int | None = None

    def observe(self, seq: int) -> int | None:
        """Return the number of frames missed before ``seq``, or ``None``
        for a duplicate or reordered frame."""
        if self.last is None:
            self.last = seq
            return 0
        if seq <= self.last:
            return None
        missed = seq - self.last - 1
        self.last = seq
        return missed
