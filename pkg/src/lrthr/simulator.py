"""Deterministic discrete-event engine.

Time is kept in integer nanoseconds so that lag-time bookkeeping is exact
and traces replay bit for bit. Estimators and reports work in seconds.

MAC abstraction: each node serves its FIFO queue stop-and-wait. A head of
line packet waits ``base_service + queue_increment * queue_length +
U(0, backoff)`` before each attempt, so delay grows with load. Frames are lost independently per directional link with a
hidden ground-truth PRR; a lost data frame or ACK costs one retry.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .energy import EnergyCosts, EnergyLedger
from .forwarding import (
    Decision,
    ForwardingContext,
    ForwardingWeights,
    PacketExpired,
    decide_lrthr,
    decide_speed,
    decide_thvr,
)
from .linkest import LinkTable, PrrEstimator, SeqGapTracker
from .metrics import EnergyRow, PacketRecord, RunLedger, RunMetrics, finalize
from .topology import (
    ConfigurationError,
    NeighborTables,
    Topology,
    Position,
    build_neighbor_tables,
    dist,
    greedy_void_free,
    place_scenario,
)

NS = 1_000_000_000

# event kinds, in trace order
GENERATE, START_TX, RX, ACK, TIMEOUT, HELLO, FEEDBACK, SERVE = range(8)
KIND_NAMES = ("generate", "start_tx", "rx", "ack", "timeout", "hello", "feedback", "serve")
TRACE_COLUMNS = ("seq", "time_ns", "kind", "node", "peer", "packet", "detail", "energy_j")


def ns(seconds: float) -> int:
    return int(round(seconds * NS))


@dataclass
class Packet:
    id: int
    source: int
    destination: int
    size: int
    created_at: int
    deadline: int
    lag_time: int
    setpoint: float
    hops: list[tuple[int, int]]
    t_rx: int
    seq_per_link: int = 0

    def forwarded(self, node: int, now: int, lag_time: int, seq: int) -> "Packet":
        return Packet(self.id, self.source, self.destination, self.size, self.created_at,
                      self.deadline, lag_time, self.setpoint, self.hops + [(node, now)], now, seq)


@dataclass
class NeighborInfo:
    energy: tuple[float, float]
    nbrs: tuple[int, ...]
    adv_delay: dict[int, float]
    last_heard: int


class NodeState:
    __slots__ = ("id", "pos", "d", "queue", "current", "next_hop", "attempts", "t_s",
                 "links", "incoming", "out_seq", "hello_seq", "info", "seen",
                 "dirty", "f1", "pairs", "give_ups")

    def __init__(self, nid, pos, d, links: LinkTable):
        self.id = nid
        self.pos = pos
        self.d = d
        self.queue: deque[Packet] = deque()
        self.current: Packet | None = None
        self.next_hop: int | None = None
        self.attempts = 0
        self.t_s = 0
        self.links = links
        # sender -> [PrrEstimator, data gap tracker, hello gap tracker]
        self.incoming: dict[int, list] = {}
        self.out_seq: dict[int, int] = {}
        self.hello_seq = 0
        self.info: dict[int, NeighborInfo] = {}
        self.seen: set[int] = set()
        self.dirty = True
        self.f1: list[int] = []
        self.pairs: list[tuple[int, int]] = []
        # consecutive give-ups per next hop, reset by any ACK
        self.give_ups: dict[int, int] = {}


@dataclass
class RunResult:
    metrics: RunMetrics
    ledger: RunLedger
    topology: Topology
    sources: list[int]
    trace: list[tuple] = field(default_factory=list)
    decisions: list[tuple] = field(default_factory=list)
    link_log: list[tuple] = field(default_factory=list)
    control_bytes: dict[str, int] = field(default_factory=dict)
    in_flight: int = 0
    end_time: float = 0.0
    true_prr: dict[tuple[int, int], float] = field(default_factory=dict)


def build_topology(cfg: ScenarioConfig, seed_seq: np.random.SeedSequence) -> tuple[Topology, NeighborTables, list[int]]:
    tc = cfg.topology
    tries = tc.max_placement_tries if tc.void_free else 1
    for child in seed_seq.spawn(tries):
        topo, sources = place_scenario(child, tc.count, tc.field, tc.radio_range,
                                       cfg.traffic.sources, tc.source_region, tc.sink)
        tables = build_neighbor_tables(topo)
        if not tc.void_free or greedy_void_free(topo, tables):
            return topo, tables, sources
    raise ConfigurationError(f"no void-free placement found in {tries} tries; raise node density")


class Simulation:
    """One run of one scenario with one seed."""

    def __init__(self, cfg: ScenarioConfig, seed: int, *, trace: bool = False,
                 log_decisions: bool = False, log_links: bool = False,
                 topology: tuple[Topology, NeighborTables, list[int]] | None = None,
                 true_prr: dict[tuple[int, int], float] | None = None):
        self.cfg = cfg
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        s_place, s_truth, s_chan, s_mac, s_route, s_hello, s_traffic = ss.spawn(7)
        if topology is None:
            topology = build_topology(cfg, s_place)
        self.topo, self.tables, self.sources = topology
        # Separate streams per link (frames) and per node (HELLO reception,
        # MAC jitter, route draws): a routing change then perturbs only the
        # traffic it touches, which keeps runs paired across sweep points.
        self._s_chan = s_chan
        self._link_rng: dict[tuple[int, int], np.random.Generator] = {}
        per_node = lambda s: {n: np.random.default_rng(_child(s, n)) for n in self.topo.node_ids}
        self.rng_mac = per_node(s_mac)
        self.rng_route = per_node(s_route)
        self.rng_hello_rx = per_node(s_hello)
        self.rng_hello = np.random.default_rng(s_hello)
        self.rng_traffic = np.random.default_rng(s_traffic)

        ch = cfg.channel
        self.bandwidth = ch.bandwidth
        self.payload = cfg.traffic.payload
        self.t_data = ns(self.payload / ch.bandwidth)
        ack_bytes = ch.ack_size + (ch.piggyback_bytes if ch.feedback == "piggyback" else 0)
        self.ack_bytes = ack_bytes
        self.t_ack = ns(ack_bytes / ch.bandwidth)
        self.fb_bytes = ch.ack_size + ch.piggyback_bytes
        self.t_fb = ns(self.fb_bytes / ch.bandwidth)
        self.guard = ns(ch.ack_guard)
        self.base = ns(ch.base_service)
        self.incr = ns(ch.queue_increment)
        self.backoff = ns(ch.backoff)
        self.nominal_delay = (self.base + self.t_data) / NS

        dest = self.topo.destination
        self.dest = dest
        self.nodes: dict[int, NodeState] = {}
        est = cfg.estimators
        for nid in self.topo.node_ids:
            table = LinkTable(nid, est.alpha, est.beta, est.window, est.initial_prr, est.initial_delay)
            self.nodes[nid] = NodeState(nid, self.topo.pos(nid), self.topo.dist_to_dest(nid), table)
        self.nbrs = {n: sorted(v) for n, v in self.tables.n1.items()}

        if true_prr is None:
            key = [int(w) for w in s_truth.generate_state(4)]
            true_prr = {}
            for a in self.topo.node_ids:
                for b in self.nbrs[a]:
                    u = link_uniform(key, self.topo.pos(a), self.topo.pos(b))
                    true_prr[a, b] = ch.prr_low + (ch.prr_high - ch.prr_low) * u
        self.true_prr = true_prr

        en = cfg.energy
        costs = EnergyCosts(en.tx, en.rx, en.idle, en.sleep, en.initial)
        exempt = frozenset([dest]) if en.sink_powered else frozenset()
        self.energy = EnergyLedger(costs, self.topo.node_ids, exempt)

        p = cfg.protocol
        self.policy = p.policy
        self.weights = ForwardingWeights(*p.weights)

        self.heap: list = []
        self.evseq = 0
        self.now = 0
        self.records: dict[int, PacketRecord] = {}
        self.custody: dict[int, int] = {}
        self.unresolved = 0
        self.trace_on = trace
        self.trace: list[tuple] = []
        self.log_decisions = log_decisions
        self.decisions: list[tuple] = []
        self.log_links = log_links
        self.link_log: list[tuple] = []
        self.control_bytes = {"hello": 0, "ack": 0, "piggyback": 0, "feedback": 0}
        self._ev_energy = 0.0
        self.hello_period = ns(cfg.hello_period)
        self.neighbor_timeout = ns(cfg.neighbor_timeout)

    # -- event plumbing ---------------------------------------------------

    def schedule(self, at: int, kind: int, node: int, *payload) -> None:
        if at < self.now:
            raise RuntimeError("event scheduled in the past")
        self.evseq += 1
        heapq.heappush(self.heap, (at, self.evseq, kind, node, payload))

    def _log(self, kind: int, node: int, peer, pkt, detail="") -> None:
        if self.trace_on:
            self.trace.append((len(self.trace), self.now, KIND_NAMES[kind], node,
                               "" if peer is None else peer, "" if pkt is None else pkt,
                               detail, repr(self._ev_energy)))
        self._ev_energy = 0.0

    def _charge(self, node: int, cause: str, count: float = 1.0) -> None:
        led = self.energy
        if not led.alive(node):
            return
        self._settle(node)
        if not led.alive(node):
            return
        self._ev_energy += led.charge(node, cause, count)
        if not led.alive(node):
            self._kill(node)

    def _settle(self, node: int) -> None:
        led = self.energy
        if led.alive(node):
            self._ev_energy += led.settle(node, self.now / NS)
            if not led.alive(node):
                self._kill(node)
        else:
            led.last_settled[node] = self.now / NS

    def _kill(self, node: int) -> None:
        self.energy.retire(node)
        st = self.nodes[node]
        if st.current is not None:
            self._drop(st.current, "energy", node)
            st.current = None
        while st.queue:
            self._drop(st.queue.popleft(), "energy", node)

    # -- packet bookkeeping -----------------------------------------------

    def _drop(self, p: Packet, reason: str, node: int) -> None:
        # a sender whose ACKs were lost no longer owns the packet
        if self.custody.get(p.id) != node:
            return
        rec = self.records[p.id]
        if rec.delivered or rec.drop_reason:
            return
        rec.drop_reason = reason
        rec.hops = len(p.hops) - 1
        self.unresolved -= 1

    def _deliver(self, p: Packet) -> None:
        rec = self.records[p.id]
        if rec.delivered or rec.drop_reason:
            return
        elapsed = self.now - p.created_at
        if p.deadline - p.lag_time != elapsed:
            raise RuntimeError(f"lag-time accounting broke for packet {p.id}")
        rec.delivered = True
        rec.delay = elapsed / NS
        rec.hops = len(p.hops) - 1
        self.unresolved -= 1

    # -- forwarding ---------------------------------------------------------

    def _refresh_view(self, st: NodeState) -> None:
        nodes = self.nodes
        f1 = [y for y in st.info if nodes[y].d < st.d]
        f1.sort()
        pairs = []
        for y in f1:
            dy = nodes[y].d
            for z in st.info[y].nbrs:
                if z != st.id and nodes[z].d < dy:
                    pairs.append((y, z))
        st.f1 = f1
        st.pairs = pairs
        st.dirty = False

    def context(self, st: NodeState, lag_time_ns: int) -> ForwardingContext:
        if st.dirty:
            self._refresh_view(st)
        nodes = self.nodes
        prior = self.nominal_delay
        f1, pairs = st.f1, st.pairs
        dists = {st.id: st.d}
        link_view = {}
        energy_view = {}
        for y in f1:
            ls = st.links.links.get(y)
            if ls is None:
                ls = st.links.link(y)
            d = ls.delay.current
            link_view[y] = (ls.prr.current, prior if d is None else d)
            energy_view[y] = st.info[y].energy
            dists[y] = nodes[y].d
        second = {}
        for pair in pairs:
            y, z = pair
            dz = st.info[y].adv_delay.get(z)
            if dz is not None:
                second[pair] = dz
            dists[z] = nodes[z].d
        return ForwardingContext(st.id, self.dest, lag_time_ns / NS, frozenset(f1),
                                 frozenset(pairs), dists, link_view, second, energy_view)

    def decide(self, st: NodeState, p: Packet, lag_ns: int) -> Decision:
        ctx = self.context(st, lag_ns)
        pc = self.cfg.protocol
        if self.policy == "lrthr":
            return decide_lrthr(ctx, self.weights, pc.lrthr_strict)
        if self.policy == "thvr":
            near = (len(p.hops) - 1) < pc.thvr_drop_hops
            return decide_thvr(ctx, pc.thvr_c, pc.thvr_drop_control, p.setpoint, near)
        return decide_speed(ctx, p.setpoint, self.rng_route[st.id], pc.speed_k)

    # -- MAC ------------------------------------------------------------------

    def _jitter(self, x: int) -> int:
        return int(self.rng_mac[x].integers(0, self.backoff + 1)) if self.backoff else 0

    def _access_time(self, st: NodeState) -> int:
        return self.now + self.base + self.incr * len(st.queue) + self._jitter(st.id)

    def _frame_ok(self, a: int, b: int) -> bool:
        """Bernoulli delivery of one unicast frame a -> b."""
        rng = self._link_rng.get((a, b))
        if rng is None:
            rng = self._link_rng[a, b] = np.random.default_rng(_child(self._s_chan, a, b))
        return rng.random() < self.true_prr[a, b]

    def _enqueue(self, st: NodeState, p: Packet) -> None:
        st.queue.append(p)
        if st.current is None:
            self.schedule(self.now, SERVE, st.id)

    def _serve(self, st: NodeState) -> None:
        while st.current is None and st.queue:
            p = st.queue.popleft()
            lag = p.lag_time - (self.now - p.t_rx)
            if lag <= 0:
                self._drop(p, "deadline", st.id)
                self._log(SERVE, st.id, None, p.id, "expired")
                continue
            try:
                dec = self.decide(st, p, lag)
            except PacketExpired:
                self._drop(p, "deadline", st.id)
                continue
            if self.log_decisions:
                self.decisions.append((self.now / NS, p.id, st.id,
                                       "" if dec.next_hop is None else dec.next_hop,
                                       dec.reason.value, repr(dec.chosen_metric)))
            if dec.next_hop is None:
                self._drop(p, dec.reason.value, st.id)
                self._log(SERVE, st.id, None, p.id, dec.reason.value)
                continue
            st.current = p
            st.next_hop = dec.next_hop
            st.attempts = 0
            st.t_s = self.now
            self.schedule(self._access_time(st), START_TX, st.id, p)
            self._log(SERVE, st.id, dec.next_hop, p.id, "selected")

    def _start_tx(self, st: NodeState, p: Packet) -> None:
        if st.current is not p:
            return
        x, y = st.id, st.next_hop
        led = self.energy
        self._settle(x)
        if not led.alive(x):
            self._log(START_TX, x, y, p.id, "dead")
            return
        if not led.can_afford(x, "tx"):
            self._kill(x)
            self._log(START_TX, x, y, p.id, "energy_exhausted")
            return
        lt = p.lag_time - (self.now - p.t_rx + self.t_data)
        if lt <= 0:
            st.current = None
            self._drop(p, "deadline", x)
            self._log(START_TX, x, y, p.id, "expired")
            self._serve(st)
            return
        self._charge(x, "tx")
        seq = st.out_seq.get(y, 0) + 1
        st.out_seq[y] = seq
        end = self.now + self.t_data
        ok = self._frame_ok(x, y)
        if ok and led.alive(y):
            self.schedule(end, RX, y, x, p, seq, lt)
        else:
            self.schedule(end + self.t_ack + self.guard, TIMEOUT, x, p)
        self._log(START_TX, x, y, p.id, f"attempt={st.attempts}")

    def _rx(self, y: int, x: int, p: Packet, seq: int, lt: int) -> None:
        led = self.energy
        if not led.alive(y):
            self.schedule(self.now + self.t_ack + self.guard, TIMEOUT, x, p)
            self._log(RX, y, x, p.id, "receiver_dead")
            return
        self._charge(y, "rx")
        if not led.alive(y):
            self.schedule(self.now + self.t_ack + self.guard, TIMEOUT, x, p)
            self._log(RX, y, x, p.id, "receiver_died")
            return
        st = self.nodes[y]
        self._observe(st, x, seq, hello=False)
        dup = p.id in st.seen
        if not dup:
            st.seen.add(p.id)
            self.custody[p.id] = y
            fwd = p.forwarded(y, self.now, lt, seq)
            if y == self.dest:
                self._deliver(fwd)
            else:
                self._enqueue(st, fwd)
        # ACK goes out immediately after reception
        self._charge(y, "tx", self.ack_bytes / self.payload)
        self.control_bytes["ack"] += self.cfg.channel.ack_size
        if self.cfg.channel.feedback == "piggyback":
            self.control_bytes["piggyback"] += self.cfg.channel.piggyback_bytes
        end = self.now + self.t_ack
        ok = self._frame_ok(y, x)
        if ok and led.alive(x) and led.alive(y):
            self.schedule(end, ACK, x, y, p, self._state_report(st, x))
        else:
            self.schedule(end + self.guard, TIMEOUT, x, p)
        if self.cfg.channel.feedback == "explicit" and led.alive(y):
            self._charge(y, "tx", self.fb_bytes / self.payload)
            self.control_bytes["feedback"] += self.fb_bytes
            fb_end = end + self.t_fb
            if self._frame_ok(y, x):
                self.schedule(fb_end, FEEDBACK, x, y, self._state_report(st, x))
        self._log(RX, y, x, p.id, "dup" if dup else ("deliver" if y == self.dest else "enqueue"))

    def _state_report(self, st: NodeState, x: int) -> tuple:
        inc = st.incoming.get(x)
        prr = inc[0].current if inc else None
        back = st.links.links.get(x)
        delay = back.delay.current if back else None
        return (prr, self.energy.residual[st.id], self.energy.initial[st.id], delay)

    def _apply_report(self, st: NodeState, y: int, report: tuple) -> None:
        prr, residual, initial, delay = report
        if prr is not None:
            st.links.link(y).prr.current = prr
        info = st.info.get(y)
        if info is not None:
            info.energy = (residual, initial)
            if delay is not None:
                info.adv_delay[st.id] = delay

    def _ack(self, x: int, y: int, p: Packet, report: tuple) -> None:
        st = self.nodes[x]
        if st.current is not p or not self.energy.alive(x):
            self._log(ACK, x, y, p.id, "stale")
            return
        self._charge(x, "rx", self.ack_bytes / self.payload)
        if not self.energy.alive(x):
            self._log(ACK, x, y, p.id, "dead")
            return
        ls = st.links.link(y)
        ls.delay.record(st.t_s / NS, self.now / NS, self.ack_bytes, self.bandwidth)
        if self.log_links:
            self.link_log.append((self.now / NS, x, y, ls.prr.current, ls.delay.current))
        if self.cfg.channel.feedback == "piggyback":
            self._apply_report(st, y, report)
        st.give_ups.pop(y, None)
        st.current = None
        self._log(ACK, x, y, p.id, "ok")
        self._serve(st)

    def _feedback(self, x: int, y: int, report: tuple) -> None:
        if not self.energy.alive(x):
            return
        self._charge(x, "rx", self.fb_bytes / self.payload)
        if self.energy.alive(x):
            self._apply_report(self.nodes[x], y, report)
        self._log(FEEDBACK, x, y, None)

    def _timeout(self, x: int, p: Packet) -> None:
        st = self.nodes[x]
        if st.current is not p:
            return
        st.attempts += 1
        if st.attempts > self.cfg.channel.max_retries:
            st.current = None
            self._drop(p, "retries", x)
            # link-layer failure feedback: after repeated give-ups, forget y
            # until its next HELLO
            y = st.next_hop
            st.give_ups[y] = st.give_ups.get(y, 0) + 1
            if st.give_ups[y] >= self.cfg.channel.evict_after and st.info.pop(y, None) is not None:
                st.give_ups.pop(y)
                st.dirty = True
            self._log(TIMEOUT, x, st.next_hop, p.id, "give_up")
            self._serve(st)
            return
        self.schedule(self._access_time(st), START_TX, x, p)
        self._log(TIMEOUT, x, st.next_hop, p.id, "retry")

    def _observe(self, st: NodeState, sender: int, seq: int, hello: bool) -> None:
        inc = st.incoming.get(sender)
        if inc is None:
            est = self.cfg.estimators
            inc = [PrrEstimator(est.initial_prr, est.alpha, est.window), SeqGapTracker(), SeqGapTracker()]
            st.incoming[sender] = inc
        missed = inc[2 if hello else 1].observe(seq)
        if missed is None:
            return
        before = inc[0].current
        inc[0].record_many(1, missed)
        if self.log_links and inc[0].current != before:
            self.link_log.append((self.now / NS, sender, st.id, inc[0].current, ""))

    # -- HELLO --------------------------------------------------------------

    def _hello(self, x: int) -> None:
        led = self.energy
        self._settle(x)
        if not led.alive(x):
            return
        st = self.nodes[x]
        cutoff = self.now - self.neighbor_timeout
        stale = [y for y, inf in st.info.items() if inf.last_heard < cutoff]
        for y in stale:
            del st.info[y]
        if stale:
            st.dirty = True
        if not led.can_afford(x, "tx", self.cfg.channel.hello_size / self.payload):
            self._kill(x)
            self._log(HELLO, x, None, None, "energy_exhausted")
            return
        self._charge(x, "tx", self.cfg.channel.hello_size / self.payload)
        self.control_bytes["hello"] += self.cfg.channel.hello_size
        st.hello_seq += 1
        prior = self.nominal_delay
        known = tuple(sorted(st.info))
        adv = {}
        for z in known:
            ls = st.links.links.get(z)
            d = None if ls is None else ls.delay.current
            adv[z] = prior if d is None else d
        energy = (led.residual[x], led.initial[x])
        prr_reports = {s: inc[0].current for s, inc in st.incoming.items()}
        frac = self.cfg.channel.hello_size / self.payload
        heard = 0
        rng = self.rng_hello_rx[x]
        for y in self.nbrs[x]:
            if not led.alive(y):
                continue
            if rng.random() >= self.true_prr[x, y]:
                continue
            self._charge(y, "rx", frac)
            if not led.alive(y):
                continue
            ys = self.nodes[y]
            self._observe(ys, x, st.hello_seq, hello=True)
            ys.info[x] = NeighborInfo(energy, known, adv, self.now)
            rep = prr_reports.get(y)
            if rep is not None:
                ys.links.link(x).prr.current = rep
            ys.dirty = True
            heard += 1
        self._log(HELLO, x, None, None, f"heard={heard}")
        self.schedule(self.now + self.hello_period, HELLO, x)

    # -- traffic --------------------------------------------------------------

    def _generate(self, src: int, pid: int, deadline: int) -> None:
        st = self.nodes[src]
        d_total = st.d
        p = Packet(pid, src, self.dest, self.payload, self.now, deadline, deadline,
                   d_total / (deadline / NS), [(src, self.now)], self.now)
        self.records[pid] = PacketRecord(pid, src, self.now / NS)
        self.unresolved += 1
        st.seen.add(pid)
        self.custody[pid] = src
        if not self.energy.alive(src):
            self._drop(p, "energy", src)
            self._log(GENERATE, src, None, pid, "source_dead")
            return
        self._log(GENERATE, src, None, pid)
        self._enqueue(st, p)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        for x in self.topo.node_ids:
            phase = int(self.rng_hello.integers(0, self.hello_period))
            self.schedule(phase, HELLO, x)
        warmup = 2 * self.hello_period + ns(1.0)
        n_src = len(self.sources)
        total = cfg.traffic.packets if n_src else 0
        interval = ns(1.0 / cfg.traffic.rate)
        phases = [int(self.rng_traffic.integers(0, interval)) for _ in self.sources]
        deadline = ns(cfg.deadline)
        last_gen = warmup
        for k in range(total):
            i = k % n_src
            at = warmup + phases[i] + (k // n_src) * interval
            last_gen = max(last_gen, at)
            self.schedule(at, GENERATE, self.sources[i], k, deadline)
        horizon = last_gen + ns(cfg.drain)
        generated = 0
        heap = self.heap
        while heap:
            at, _, kind, node, payload = heap[0]
            if at > horizon:
                break
            if generated >= total and self.unresolved == 0 and at > last_gen:
                break
            heapq.heappop(heap)
            self.now = at
            if kind == GENERATE:
                generated += 1
                self._generate(node, *payload)
            elif kind == SERVE:
                st = self.nodes[node]
                if self.energy.alive(node):
                    self._serve(st)
            elif kind == START_TX:
                self._start_tx(self.nodes[node], *payload)
            elif kind == RX:
                self._rx(node, *payload)
            elif kind == ACK:
                self._ack(node, *payload)
            elif kind == TIMEOUT:
                self._timeout(node, *payload)
            elif kind == HELLO:
                self._hello(node)
            elif kind == FEEDBACK:
                self._feedback(node, *payload)
        end = self.now
        for x in self.topo.node_ids:
            self._settle(x)
        self._log(SERVE, -1, None, None, "end")
        in_flight = 0
        for rec in self.records.values():
            if not rec.delivered and not rec.drop_reason:
                rec.drop_reason = "in_flight"
                in_flight += 1
        return self._result(end, in_flight)

    def _result(self, end: int, in_flight: int) -> RunResult:
        led = self.energy
        rows = []
        for n in self.topo.node_ids:
            t = led.totals[n]
            pos = self.topo.pos(n)
            rows.append(EnergyRow(n, pos.x, pos.y, led.initial[n], led.residual[n],
                                  t["tx"], t["rx"], t["idle"], t["sleep"]))
        ledger = RunLedger(sorted(self.records.values(), key=lambda r: r.id), rows, led.total_consumed())
        return RunResult(
            metrics=finalize(ledger),
            ledger=ledger,
            topology=self.topo,
            sources=list(self.sources),
            trace=self.trace,
            decisions=self.decisions,
            link_log=self.link_log,
            control_bytes=dict(self.control_bytes),
            in_flight=in_flight,
            end_time=end / NS,
            true_prr=self.true_prr,
        )


def run(scenario: ScenarioConfig, seed: int, **kwargs) -> RunResult:
    """Run one scenario (at ``scenario.deadline``) with one seed."""
    return Simulation(scenario, seed, **kwargs).run()


def _child(ss: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + key)


def link_uniform(key: list[int], a: Position, b: Position) -> float:
    """U(0,1) draw tied to the endpoint coordinates of a directional link.

    A link keeps its ground truth when unrelated nodes are added or removed,
    which keeps sweeps over the source count paired.
    """
    words = np.array([a.x, a.y, b.x, b.y], dtype=np.float64).view(np.uint32)
    state = np.random.SeedSequence(key + [int(w) for w in words]).generate_state(1, np.uint64)
    return (int(state[0]) >> 11) / float(1 << 53)


def transmit_once(true_prr: float, rng) -> bool:
    """Bernoulli delivery of a single frame over a link."""
    return bool(rng.random() < true_prr)


def hop_latency(queue_length: int, base_service: float, queue_increment: float,
                size: float, bandwidth: float) -> float:
    """Deterministic part of one attempt's latency (no backoff, idle medium)."""
    return base_service + queue_increment * queue_length + size / bandwidth


def end_to_end_distance(topo: Topology, src: int) -> float:
    return dist(topo.pos(src), topo.pos(topo.destination))


__all__ = ["Simulation", "run", "RunResult", "Packet", "TRACE_COLUMNS", "KIND_NAMES",
           "transmit_once", "hop_latency", "build_topology", "ns", "NS"]
