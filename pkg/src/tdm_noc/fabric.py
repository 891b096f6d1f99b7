"""Cycle-level building blocks: FIFOs, virtual channels, arbiters, the TDM
switch and the network adapter.

Timing convention shared by every buffer: a flit pushed during cycle ``t`` is
stored during ``t + 1`` and is readable from ``t + 2`` (``ready_at``).  Space is
reserved at push time, so a producer only needs start-of-cycle occupancy to
know whether it may send.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .codec import (
    Flit,
    Header,
    Packet,
    check_flit_width,
    flit_count,
    flitize,
    fragment,
    fragment_count,
)

STORE_LATENCY = 1


class FabricFault(RuntimeError):
    """A model invariant was violated; the simulation cannot continue."""


class BackpressureError(FabricFault):
    """Push into a full buffer. Legal callers check ``can_push`` first."""


class WormholeViolation(FabricFault):
    pass


class BufferUnderflow(FabricFault):
    pass


class VCState(enum.Enum):
    IDLE = "idle"
    BUSY = "busy"
    EMPTY = "empty"
    READY = "ready"


class FlitFifo:
    """Bounded FIFO of flits, each tagged with the cycle it becomes readable."""

    def __init__(self, depth: int, name: str = ""):
        if depth < 1:
            raise ValueError(f"FIFO depth must be >= 1, got {depth}")
        self.depth = depth
        self.name = name
        self._buf: deque[tuple[Flit, int]] = deque()
        self.max_occupancy = 0

    def __len__(self):
        return len(self._buf)

    @property
    def occupancy(self) -> int:
        return len(self._buf)

    def can_push(self) -> bool:
        return len(self._buf) < self.depth

    def push(self, flit: Flit, ready_at: int = 0) -> None:
        if len(self._buf) >= self.depth:
            raise BackpressureError(f"push into full buffer {self.name or '?'} "
                                    f"(depth {self.depth})")
        self._buf.append((flit, ready_at))
        if len(self._buf) > self.max_occupancy:
            self.max_occupancy = len(self._buf)

    def head(self, t: int | None = None) -> Flit | None:
        """Head flit if it is readable at cycle ``t`` (any time if ``t`` is None)."""
        if not self._buf:
            return None
        flit, ready_at = self._buf[0]
        if t is not None and ready_at > t:
            return None
        return flit

    def pop(self) -> Flit:
        if not self._buf:
            raise BufferUnderflow(f"pop from empty buffer {self.name or '?'}")
        return self._buf.popleft()[0]

    def flits(self) -> list[Flit]:
        return [f for f, _ in self._buf]


class VirtualChannel(FlitFifo):
    """A FIFO plus wormhole ownership: one packet at a time, header to tail."""

    def __init__(self, depth: int, name: str = ""):
        super().__init__(depth, name)
        self.owner: int | None = None

    @property
    def state(self) -> VCState:
        return vc_state(self)

    def push(self, flit: Flit, ready_at: int = 0) -> None:
        if self.owner is None:
            if not flit.opens:
                raise WormholeViolation(
                    f"{self.name}: {flit.kind.value} flit of packet {flit.packet_id} "
                    "pushed into an unallocated VC")
        elif flit.packet_id != self.owner:
            raise WormholeViolation(
                f"{self.name}: flit of packet {flit.packet_id} pushed into VC "
                f"owned by packet {self.owner}")
        elif flit.opens:
            raise WormholeViolation(f"{self.name}: second header for packet {self.owner}")
        super().push(flit, ready_at)
        if self.owner is None:
            self.owner = flit.packet_id

    def pop(self) -> Flit:
        flit = super().pop()
        if flit.closes:
            if self._buf:
                raise WormholeViolation(f"{self.name}: flits remain behind tail of "
                                        f"packet {flit.packet_id}")
            self.owner = None
        return flit


def vc_state(vc: VirtualChannel) -> VCState:
    if vc.owner is None:
        return VCState.IDLE
    if vc.occupancy == 0:
        return VCState.EMPTY
    if vc.occupancy >= vc.depth:
        return VCState.BUSY
    return VCState.READY


def vc_push(vc: VirtualChannel, flit: Flit, ready_at: int = 0) -> VirtualChannel:
    vc.push(flit, ready_at)
    return vc


def vc_pop(vc: VirtualChannel) -> tuple[Flit, VirtualChannel]:
    return vc.pop(), vc


# -- arbitration ----------------------------------------------------------------

def rra_grant(requests: Iterable[int], pointer: int, n: int) -> tuple[int | None, int]:
    """Round-robin grant: first requester at or after ``pointer``, cyclically.

    Returns ``(grant, next_pointer)``; the pointer only moves on a grant.
    """
    if not 0 <= pointer < n:
        raise ValueError(f"pointer {pointer} outside [0, {n})")
    req = set(requests)
    if not req:
        return None, pointer
    grant = min(req, key=lambda i: (i - pointer) % n)
    return grant, (grant + 1) % n


class RoundRobinArbiter:
    def __init__(self, n: int, pointer: int = 0):
        self.n = n
        self.pointer = pointer

    def pick(self, requests: Iterable[int]) -> int | None:
        return rra_grant(requests, self.pointer, self.n)[0]

    def accept(self, grant: int) -> None:
        self.pointer = (grant + 1) % self.n

    def grant(self, requests: Iterable[int]) -> int | None:
        g, self.pointer = rra_grant(requests, self.pointer, self.n)
        return g


class ArbitrationUnit:
    """One round-robin pointer per output plus the TDM slot pointer."""

    def __init__(self, n_requesters: int, n_outputs: int):
        self.outputs = [RoundRobinArbiter(n_requesters) for _ in range(n_outputs)]
        self.slot = RoundRobinArbiter(n_outputs)
        self.last_grant: list[int | None] = [None] * n_outputs


# -- switch ---------------------------------------------------------------------

@dataclass(frozen=True)
class Crossing:
    input: int
    output: int
    vc: int
    flit: Flit
    allocates: bool


class Switch:
    """TDM crossbar: one flit crosses per cycle.

    ``inputs`` are the ingress buffers this switch reads; ``outputs[o]`` the
    VCs of output ``o`` (possibly shared with other switches).  ``port_of``
    extracts the destination port from a header flit's word.
    """

    def __init__(self, inputs: Sequence[FlitFifo], outputs: Sequence[Sequence[VirtualChannel]],
                 port_of: Callable[[Flit], int], name: str = "sw"):
        self.name = name
        self.inputs = list(inputs)
        self.outputs = [list(vcs) for vcs in outputs]
        self.port_of = port_of
        self.ccn: dict[int, tuple[int, int]] = {}
        self.au = ArbitrationUnit(len(self.inputs), len(self.outputs))
        self.credit_blocked: list[int] = []
        self.alloc_blocked: list[int] = []

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def ccn_map(self, header: Header | int, claimed: Iterable[tuple[int, int]] = ()) -> tuple[int, int] | None:
        """Lowest-index idle VC of the header's output port, or None (stall)."""
        port = header if isinstance(header, int) else header.port
        if not 0 <= port < self.n_outputs:
            raise FabricFault(f"{self.name}: header port {port} >= {self.n_outputs} outputs")
        claimed = set(claimed)
        for v, vc in enumerate(self.outputs[port]):
            if vc.owner is None and vc.occupancy == 0 and (port, v) not in claimed:
                return port, v
        return None

    def decide(self, t: int, claimed: set[tuple[int, int]] | None = None) -> Crossing | None:
        """Choose this cycle's crossing from start-of-cycle state.

        A header crossing claims its output VC in ``claimed`` so a sibling
        switch sharing the outputs cannot allocate it in the same cycle.
        """
        if claimed is None:
            claimed = set()
        self.credit_blocked = []
        self.alloc_blocked = []
        wants: dict[int, dict[int, tuple[int, bool]]] = {}
        for i, q in enumerate(self.inputs):
            flit = q.head(t)
            if flit is None:
                continue
            if flit.opens:
                target = self.ccn_map(self.port_of(flit), claimed)
                if target is None:
                    self.alloc_blocked.append(i)
                    continue
                allocates = True
            else:
                target = self.ccn.get(flit.packet_id)
                if target is None:
                    raise WormholeViolation(f"{self.name}: {flit.kind.value} flit of packet "
                                            f"{flit.packet_id} has no CCN mapping")
                if not self.outputs[target[0]][target[1]].can_push():
                    self.credit_blocked.append(i)
                    continue
                allocates = False
            wants.setdefault(target[0], {})[i] = (target[1], allocates)
        if not wants:
            return None
        winners = {o: self.au.outputs[o].pick(reqs) for o, reqs in wants.items()}
        o = self.au.slot.pick(winners)
        i = winners[o]
        self.au.slot.accept(o)
        self.au.outputs[o].accept(i)
        self.au.last_grant[o] = i
        v, allocates = wants[o][i]
        if allocates:
            claimed.add((o, v))
        return Crossing(i, o, v, self.inputs[i].head(t), allocates)

    def commit(self, move: Crossing, t: int) -> Flit:
        flit = self.inputs[move.input].pop()
        if flit is not move.flit:
            raise FabricFault(f"{self.name}: ingress head changed between decide and commit")
        self.outputs[move.output][move.vc].push(flit, t + 1 + STORE_LATENCY)
        if move.allocates:
            if flit.packet_id in self.ccn:
                raise FabricFault(f"{self.name}: packet {flit.packet_id} mapped twice")
            self.ccn[flit.packet_id] = (move.output, move.vc)
        if flit.closes:
            self.ccn.pop(flit.packet_id, None)
        return flit


def switch_cycle(switch: Switch, t: int, claimed: set | None = None) -> Crossing | None:
    move = switch.decide(t, claimed)
    if move is not None:
        switch.commit(move, t)
    return move


# -- network adapter ------------------------------------------------------------

class NetworkAdapter:
    """Type / pack / fifo_NA / adaptor_flit pipeline.

    Type lookup and header+tail packing happen on the module-side (slow)
    clock, whose period for a packet is its flit count in fast cycles, so the
    front end accepts a new packet exactly when the previous one has been
    serialized.  A packet accepted at ``t`` sits in fifo_NA from ``t + 1`` and
    adaptor_flit emits one flit per fast cycle from there.

    With ``word_width`` set the adapter packs version-1 atomic words instead
    of flits; a payload wider than one data field becomes several words.
    """

    def __init__(self, flit_width: int = 8, depth: int = 32, word_width: int | None = None,
                 name: str = "na", new_id: Callable[[], int] | None = None):
        if word_width is None:
            check_flit_width(flit_width)
        elif word_width <= 8:
            raise ValueError(f"packet width {word_width} leaves no room for data")
        if depth < 1:
            raise ValueError(f"fifo_NA depth must be >= 1, got {depth}")
        self.flit_width = flit_width
        self.word_width = word_width
        self.depth = depth
        self.name = name
        self.fifo: deque[tuple[list[Flit], int]] = deque()
        self.current: deque[Flit] = deque()
        self.next_accept = 0
        self.target: int | None = None
        self.max_occupancy = 0
        self._new_id = new_id or itertools.count().__next__

    def packets_for(self, n_bits: int) -> int:
        if self.word_width is None:
            return 1
        return fragment_count(n_bits, self.word_width)

    def slow_period(self, n_bits: int) -> int:
        """Fast cycles per slow (module) cycle for a payload of ``n_bits``."""
        if self.word_width is None:
            return flit_count(n_bits, self.flit_width)
        return fragment_count(n_bits, self.word_width)

    def can_accept(self, t: int, n_bits: int = 1) -> bool:
        return t >= self.next_accept and len(self.fifo) + self.packets_for(n_bits) <= self.depth

    def accept(self, packet: Packet, t: int) -> list[int]:
        """Type, pack and enqueue ``packet``. Returns the packet ids assigned."""
        if t < self.next_accept:
            raise FabricFault(f"{self.name}: front end busy until cycle {self.next_accept}")
        if self.word_width is None:
            chunks = [flitize(packet, self.flit_width, self._new_id())]
        else:
            n = fragment_count(packet.n_bits, self.word_width)
            ids = [self._new_id() for _ in range(n)]
            words = fragment(packet, self.word_width, ids[0])
            chunks = [[Flit(w.kind, w.word, pid, 0, True)] for w, pid in zip(words, ids)]
        if len(self.fifo) + len(chunks) > self.depth:
            raise BackpressureError(f"{self.name}: fifo_NA full")
        for c in chunks:
            self.fifo.append((c, t + 1))
        self.max_occupancy = max(self.max_occupancy, len(self.fifo))
        self.next_accept = t + self.slow_period(packet.n_bits)
        return [c[0].packet_id for c in chunks]

    def peek(self, t: int) -> Flit | None:
        if self.current:
            return self.current[0]
        if self.fifo and self.fifo[0][1] <= t:
            return self.fifo[0][0][0]
        return None

    def pop_flit(self, t: int) -> Flit:
        if not self.current:
            if not self.fifo or self.fifo[0][1] > t:
                raise BufferUnderflow(f"{self.name}: nothing to emit at cycle {t}")
            self.current.extend(self.fifo.popleft()[0])
        return self.current.popleft()

    @property
    def idle(self) -> bool:
        return not self.current and not self.fifo


def na_cycle(na: NetworkAdapter, t: int, item: Packet | None = None, ready: bool = True) -> Flit | None:
    """One fast cycle of a stand-alone adapter.

    Emits from start-of-cycle state (when downstream is ``ready``), then
    offers ``item`` to the front end.  Returns the emitted flit, if any.
    Raises BackpressureError if the item cannot be accepted this cycle.
    """
    out = na.pop_flit(t) if ready and na.peek(t) is not None else None
    if item is not None:
        if not na.can_accept(t, item.n_bits):
            raise BackpressureError(f"{na.name}: cannot accept at cycle {t}")
        na.accept(item, t)
    return out
