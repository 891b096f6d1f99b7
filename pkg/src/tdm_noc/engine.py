"""Deterministic cycle-level simulation kernel.

One call to :meth:`Simulation.step` advances one base cycle (the switch / VC
clock, which is also the adapter's fast flit clock).  Every component decides
from start-of-cycle state and all decisions are applied afterwards, so the
result does not depend on the order components are visited in.
"""

from __future__ import annotations

import csv
import heapq
import io
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .codec import Header, Packet, defragment, deflitize, encode_header
from .fabric import STORE_LATENCY, FabricFault, FlitFifo, VirtualChannel
from .metrics import RunMetrics, collect
from .topology import ClockDomain, ConfigError, NetworkModel, NetworkSpec, Switching, Version, build

EVENT_FIELDS = ("cycle", "component", "event", "packet_id", "flit_kind")


@dataclass
class MessageRecord:
    mid: int
    source: int
    port: int
    kind: int
    int_length: int
    payload: int
    n_bits: int
    inject: int
    packets: list[int] = field(default_factory=list)
    accepted: int | None = None
    first_emit: int | None = None
    last_emit: int | None = None
    delivered: int | None = None
    undelivered_packets: int = 0
    drained_words: list[tuple[int, int]] = field(default_factory=list)

    @property
    def latency(self) -> int | None:
        return None if self.delivered is None else self.delivered - self.inject

    @property
    def serialization(self) -> int:
        if self.first_emit is None:
            return 0
        return self.last_emit - self.first_emit + 1

    @property
    def transit(self) -> int | None:
        if self.delivered is None:
            return None
        if self.last_emit is None:
            return self.delivered - self.inject
        return self.delivered - self.last_emit

    def packet(self) -> Packet:
        return Packet(Header(self.kind, self.port, self.int_length), self.payload, self.n_bits)


@dataclass
class PacketRecord:
    pid: int
    mid: int
    payload_bits: int
    delivered: int | None = None


class Simulation:
    """One network instance plus its traffic and bookkeeping.

    ``payload_bits`` declares the payload length per data-kind id; sinks use
    it to strip padding when reassembling.  Kinds not declared up front are
    registered by their first injection.
    """

    def __init__(self, model: NetworkModel | NetworkSpec, *, payload_bits: Mapping[int, int] | None = None,
                 log_events: bool = False, verify: bool = True, warmup: int = 0, paranoid: bool = False):
        self.model = build(model) if isinstance(model, NetworkSpec) else model
        self.spec = self.model.spec
        self.cycle = 0
        self.warmup = warmup
        self.verify = verify
        self.paranoid = paranoid
        self.payload_bits: dict[int, int] = dict(payload_bits or {})
        self.messages: list[MessageRecord] = []
        self.packets: dict[int, PacketRecord] = {}
        self.events: list[tuple] | None = [] if log_events else None
        self.stalls: Counter[str] = Counter()
        self.alloc_waits: Counter[str] = Counter()
        self.intake_stalls: Counter[str] = Counter()
        self.emitted = self.crossed = self.drained = 0
        self.window_bits = 0
        self.window_flits = 0
        self._pending: list[list[tuple[int, int]]] = [[] for _ in range(self.spec.n_inputs)]
        self._queues: list[deque[int]] = [deque() for _ in range(self.spec.n_inputs)]
        self._assembling: dict[int, list] = {}
        self._seen: set[tuple[int, int]] = set()
        self._undelivered = 0
        self._last_progress = 0

    # -- traffic ------------------------------------------------------------

    def inject(self, time: int, source: int, port: int, payload: int, n_bits: int,
               kind: int = 0, int_length: int = 0) -> int:
        """Queue a data item at ``source``'s adapter at base cycle ``time``."""
        if time < self.cycle:
            raise ValueError(f"injection at cycle {time} is in the past (now {self.cycle})")
        if not 0 <= source < self.spec.n_inputs:
            raise ConfigError(f"unknown source {source}")
        if not 0 <= port < self.spec.n_outputs:
            raise ConfigError(f"unknown destination port {port}")
        encode_header(Header(kind, port, int_length))
        declared = self.payload_bits.setdefault(kind, n_bits)
        if declared != n_bits:
            raise ConfigError(f"data kind {kind} declared as {declared} bits, got {n_bits}")
        na = self.model.adapters[source] if self.model.adapters else None
        if na is not None and na.packets_for(n_bits) > na.depth:
            raise ConfigError(f"{n_bits}-bit payload needs {na.packets_for(n_bits)} "
                              f"fifo_NA slots, depth is {na.depth}")
        rec = MessageRecord(len(self.messages), source, port, kind, int_length,
                            int(payload), n_bits, time)
        rec.packet()  # validates payload width
        self.messages.append(rec)
        heapq.heappush(self._pending[source], (time, rec.mid))
        self._undelivered += 1
        return rec.mid

    def load(self, trace: Iterable) -> None:
        for m in trace:
            self.inject(m.time, m.source, m.port, m.payload, m.n_bits, m.kind,
                        getattr(m, "int_length", 0))

    @property
    def done(self) -> bool:
        return self._undelivered == 0

    # -- kernel ---------------------------------------------------------------

    def _log(self, t, component, event, pid="", kind=""):
        if self.events is not None:
            self.events.append((t, component, event, pid, kind))

    def step(self) -> None:
        t = self.cycle
        try:
            if self.spec.version is Version.P2P:
                self._step_p2p(t)
            else:
                self._step_fabric(t)
            if self.paranoid:
                self.check_invariants()
        except FabricFault as exc:
            raise FabricFault(f"cycle {t}: {exc}; {self._context()}") from exc
        self.cycle = t + 1

    def _step_fabric(self, t: int) -> None:
        m = self.model
        # 1. sinks
        drains = []
        for sink in m.sinks:
            if not sink.ticks(t):
                continue
            vcs = m.output_vcs[sink.index]
            req = [v for v, vc in enumerate(vcs) if vc.head(t) is not None]
            g = sink.arbiter.grant(req)
            if g is not None:
                drains.append(vcs[g])
        # 2. switches; allocation priority between switches rotates per cycle
        claimed: set[tuple[int, int]] = set()
        moves = []
        n_sw = len(m.switches)
        for k in range(n_sw):
            sw = m.switches[(t + k) % n_sw]
            mv = sw.decide(t, claimed)
            for i in sw.credit_blocked:
                self.stalls[sw.inputs[i].name] += 1
            for i in sw.alloc_blocked:
                self.alloc_waits[sw.inputs[i].name] += 1
            if mv is not None:
                moves.append((sw, mv))
        # 3. adapters
        emits = []
        for i, na in enumerate(m.adapters):
            flit = na.peek(t)
            if flit is None:
                continue
            qs = m.ingress[i]
            if flit.opens:
                if isinstance(qs[0], VirtualChannel):
                    target = next((k for k, q in enumerate(qs)
                                   if q.owner is None and q.occupancy == 0), None)
                    if target is None:
                        self.alloc_waits[na.name] += 1
                        continue
                else:
                    target = 0
            else:
                target = na.target
            if not qs[target].can_push():
                self.stalls[na.name] += 1
                continue
            emits.append((i, target))

        # apply
        for vc in drains:
            self._drain(vc, vc.pop(), t)
        for sw, mv in moves:
            flit = sw.commit(mv, t)
            self.crossed += 1
            self._log(t, sw.name, "cross", flit.packet_id, flit.kind.value)
            if t + 1 > self.warmup:
                self.window_flits += 1
            if flit.closes:
                self._delivered(flit.packet_id, t + 1)
        for i, target in emits:
            na = m.adapters[i]
            flit = na.pop_flit(t)
            m.ingress[i][target].push(flit, t + 1 + STORE_LATENCY)
            self.emitted += 1
            if flit.opens:
                na.target = target
            self._log(t, na.name, "emit", flit.packet_id, flit.kind.value)
            rec = self.messages[self.packets[flit.packet_id].mid]
            if rec.first_emit is None:
                rec.first_emit = t
            rec.last_emit = t
        self._inject_into_adapters(t)

    def _inject_into_adapters(self, t: int) -> None:
        for src, na in enumerate(self.model.adapters):
            self._release(src, t)
            q = self._queues[src]
            if not q:
                continue
            rec = self.messages[q[0]]
            if t < na.next_accept:
                continue
            if not na.can_accept(t, rec.n_bits):
                self.intake_stalls[na.name] += 1
                continue
            q.popleft()
            pids = na.accept(rec.packet(), t)
            rec.accepted = t
            rec.packets = pids
            rec.undelivered_packets = len(pids)
            per = self._split_bits(rec.n_bits, len(pids))
            for pid, bits in zip(pids, per):
                self.packets[pid] = PacketRecord(pid, rec.mid, bits)
                self._log(t, na.name, "accept", pid, "")

    def _split_bits(self, n_bits: int, n: int) -> list[int]:
        if n == 1:
            return [n_bits]
        data = self.spec.width - 8
        return [data] * (n - 1) + [n_bits - data * (n - 1)]

    def _release(self, src: int, t: int) -> None:
        pend = self._pending[src]
        while pend and pend[0][0] <= t:
            _, mid = heapq.heappop(pend)
            self._queues[src].append(mid)
            self._log(t, f"src{src}", "inject", "", "")

    def _delivered(self, pid: int, when: int) -> None:
        prec = self.packets[pid]
        if prec.delivered is not None:
            raise FabricFault(f"packet {pid} delivered twice")
        prec.delivered = when
        self._last_progress = when
        if when > self.warmup:
            self.window_bits += prec.payload_bits
        rec = self.messages[prec.mid]
        rec.undelivered_packets -= 1
        if rec.undelivered_packets == 0:
            rec.delivered = when
            self._undelivered -= 1

    def _drain(self, vc: VirtualChannel, flit, t: int) -> None:
        key = (flit.packet_id, flit.seq)
        if key in self._seen:
            raise FabricFault(f"flit {key} drained twice")
        self._seen.add(key)
        self.drained += 1
        self._log(t, vc.name, "drain", flit.packet_id, flit.kind.value)
        if not self.verify:
            return
        parts = self._assembling.setdefault(flit.packet_id, [])
        if len(parts) != flit.seq:
            raise FabricFault(f"packet {flit.packet_id}: flit {flit.seq} drained out of order")
        parts.append(flit)
        if not flit.closes:
            return
        del self._assembling[flit.packet_id]
        rec = self.messages[self.packets[flit.packet_id].mid]
        if self.spec.switching is Switching.FLIT:
            got = deflitize(parts, self.spec.width, self.payload_bits)
            if got != rec.packet():
                raise FabricFault(f"packet {flit.packet_id} reassembled with wrong contents")
        else:
            rec.drained_words.append((flit.packet_id, flit.word))
            if len(rec.drained_words) == len(rec.packets):
                # fragments may leave through either VC of the port
                words = [w for _, w in sorted(rec.drained_words)]
                got = defragment(words, self.spec.width, rec.n_bits)
                if got != rec.packet():
                    raise FabricFault(f"message {rec.mid} reassembled with wrong contents")

    def _step_p2p(self, t: int) -> None:
        links = self.model.links
        for (s, p), q in links.items():
            if q and q[0][1] <= t:
                mid, _ = q.popleft()
                rec = self.messages[mid]
                rec.delivered = t
                self._undelivered -= 1
                self._last_progress = t
                if t > self.warmup:
                    self.window_bits += rec.n_bits
                    self.window_flits += 1
                self._log(t, f"link{s}.{p}", "deliver", mid, "")
        for src in range(self.spec.n_inputs):
            self._release(src, t)
            q = self._queues[src]
            while q:
                rec = self.messages[q.popleft()]
                rec.accepted = t
                links[(src, rec.port)].append((rec.mid, t + 1))

    # -- running --------------------------------------------------------------

    def run(self, horizon: int | None = None, drain: bool = True, stall_limit: int = 100_000) -> RunMetrics:
        """Step until ``horizon`` base cycles, or until all traffic is
        delivered when ``drain`` is set (whichever comes first)."""
        if horizon is None and not drain:
            raise ValueError("need a horizon when not draining")
        if horizon is not None and horizon < 0:
            raise ValueError("horizon must be >= 0")
        while horizon is None or self.cycle < horizon:
            if drain and self.done:
                break
            self.step()
            if drain and not self.done and self.cycle - self._last_progress > stall_limit \
                    and not any(self._pending) and not any(self._queues):
                raise FabricFault(f"no delivery for {stall_limit} cycles at cycle {self.cycle}; "
                                  f"{self._context()}")
        self.check_invariants()
        return collect(self)

    # -- checks ---------------------------------------------------------------

    def check_invariants(self) -> None:
        m = self.model
        if self.spec.version is Version.P2P:
            return
        in_flight = sum(len(q) for qs in m.ingress for q in qs)
        out_held = sum(len(vc) for vc in m.all_output_vcs)
        if self.emitted != self.crossed + in_flight:
            raise FabricFault(f"flit conservation broken at ingress: emitted {self.emitted} != "
                              f"crossed {self.crossed} + buffered {in_flight}")
        if self.crossed != self.drained + out_held:
            raise FabricFault(f"flit conservation broken at egress: crossed {self.crossed} != "
                              f"drained {self.drained} + buffered {out_held}")
        for buf in m.buffers():
            if not 0 <= len(buf) <= buf.depth:
                raise FabricFault(f"{buf.name}: occupancy {len(buf)} outside [0, {buf.depth}]")
            if isinstance(buf, VirtualChannel):
                flits = buf.flits()
                if buf.owner is None and flits:
                    raise FabricFault(f"{buf.name}: unallocated but holds flits")
                if any(f.packet_id != buf.owner for f in flits):
                    raise FabricFault(f"{buf.name}: holds flits of a packet it does not own")
        for sw in m.switches:
            for pid in sw.ccn:
                if self.packets[pid].delivered is not None:
                    raise FabricFault(f"{sw.name}: stale CCN entry for delivered packet {pid}")
        mapped = [pid for sw in m.switches for pid in sw.ccn]
        if len(mapped) != len(set(mapped)):
            raise FabricFault("a packet is mapped in more than one CCN entry")

    def _context(self) -> str:
        m = self.model
        occ = ", ".join(f"{b.name}={len(b)}" for b in m.buffers() if len(b))
        return f"occupancy [{occ}]"

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        w.writerows(self.events or [])
        return buf.getvalue()

    def buffers(self) -> list[FlitFifo]:
        return self.model.buffers()
