"""Network instances: version 1 (one main switch), version 2 (two parallel
main switches with input VCs) and the point-to-point baseline."""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field

from .codec import (
    FLIT_WIDTHS,
    HEADER_BITS,
    MAX_PORT,
    V1_WIDTH,
    Flit,
    decode_header,
    decode_word,
)
from .fabric import FlitFifo, NetworkAdapter, RoundRobinArbiter, Switch, VirtualChannel

VCS_PER_OUTPUT = 2
VCS_PER_INPUT = 2  # version 2 only


class ConfigError(ValueError):
    pass


class Version(str, enum.Enum):
    V1 = "v1"
    V2 = "v2"
    P2P = "p2p"


class Switching(str, enum.Enum):
    PACKET = "packet"
    FLIT = "flit"


@dataclass(frozen=True)
class NetworkSpec:
    """Parameters of one network instance.

    ``width`` is the flit width for flit switching and the whole packet width
    for packet switching.  Left as None it defaults to 8 (flit) or 24
    (packet).  Version 1 packet-switches by default; it can be built with
    ``switching="flit"`` as a single-switch equivalent of version 2.
    """

    version: Version = Version.V2
    n_inputs: int = 4
    n_outputs: int = 4
    width: int | None = None
    vc_depth: int = 32
    na_depth: int = 32
    switching: Switching | None = None
    sink_period: int = 1

    def __post_init__(self):
        try:
            version = Version(self.version)
        except ValueError:
            raise ConfigError(f"unknown version {self.version!r}; "
                              f"expected one of {[v.value for v in Version]}") from None
        object.__setattr__(self, "version", version)
        if self.switching is None:
            sw = Switching.PACKET if version is Version.V1 else Switching.FLIT
        else:
            try:
                sw = Switching(self.switching)
            except ValueError:
                raise ConfigError(f"unknown switching {self.switching!r}") from None
        if version is Version.V2 and sw is not Switching.FLIT:
            raise ConfigError("version 2 is flit (wormhole) switched")
        object.__setattr__(self, "switching", sw)
        if self.width is None:
            object.__setattr__(self, "width", V1_WIDTH if sw is Switching.PACKET else 8)
        for name in ("n_inputs", "n_outputs", "vc_depth", "na_depth", "sink_period"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.n_outputs > MAX_PORT + 1:
            raise ConfigError(f"n_outputs={self.n_outputs} exceeds the {MAX_PORT + 1} ports "
                              "addressable by the header port field")
        if version is Version.V2 and self.n_inputs < 2:
            raise ConfigError("version 2 needs at least 2 inputs (one per switch)")
        if sw is Switching.FLIT and self.width not in FLIT_WIDTHS:
            raise ConfigError(f"flit width must be one of {FLIT_WIDTHS}, got {self.width}")
        if sw is Switching.PACKET and not HEADER_BITS < self.width <= 128:
            raise ConfigError(f"packet width must be in ({HEADER_BITS}, 128], got {self.width}")

    @property
    def n_switches(self) -> int:
        return {Version.V1: 1, Version.V2: 2, Version.P2P: 0}[self.version]

    @property
    def label(self) -> str:
        if self.version is Version.V1 and self.switching is Switching.FLIT:
            return "v1-flit"
        return self.version.value


@dataclass
class ClockDomain:
    """Integer clock divider: ticks on base cycles where ``(t - phase) % ratio == 0``."""

    ratio: int = 1
    phase: int = 0

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError("clock ratio must be >= 1")

    def ticks(self, t: int) -> bool:
        return (t - self.phase) % self.ratio == 0


@dataclass
class Sink:
    """Output module reading its port's VCs, one flit per tick of its clock."""

    index: int
    clock: ClockDomain
    arbiter: RoundRobinArbiter

    def ticks(self, t: int) -> bool:
        return self.clock.ticks(t)


@dataclass
class NetworkModel:
    spec: NetworkSpec
    adapters: list[NetworkAdapter] = field(default_factory=list)
    ingress: list[list[FlitFifo]] = field(default_factory=list)
    switches: list[Switch] = field(default_factory=list)
    output_vcs: list[list[VirtualChannel]] = field(default_factory=list)
    sinks: list[Sink] = field(default_factory=list)
    switch_of: list[int] = field(default_factory=list)
    routes: dict[tuple[int, int], tuple[str, ...]] = field(default_factory=dict)
    # point-to-point baseline: (source, port) -> queue of (message id, ready_at)
    links: dict[tuple[int, int], deque] = field(default_factory=dict)

    @property
    def input_vcs(self) -> list[VirtualChannel]:
        return [q for qs in self.ingress for q in qs if isinstance(q, VirtualChannel)]

    @property
    def all_output_vcs(self) -> list[VirtualChannel]:
        return [vc for vcs in self.output_vcs for vc in vcs]

    def buffers(self) -> list[FlitFifo]:
        return [q for qs in self.ingress for q in qs] + self.all_output_vcs


def _port_decoder(spec: NetworkSpec):
    if spec.switching is Switching.FLIT:
        def port_of(flit: Flit) -> int:
            return decode_header(flit.word).port
    else:
        width = spec.width

        def port_of(flit: Flit) -> int:
            return decode_word(flit.word, width)[0].port
    return port_of


def build(spec: NetworkSpec) -> NetworkModel:
    model = NetworkModel(spec)
    if spec.version is Version.P2P:
        model.links = {(s, p): deque() for s in range(spec.n_inputs) for p in range(spec.n_outputs)}
        model.routes = {(s, p): (f"src{s}", f"link{s}.{p}", f"sink{p}")
                        for s in range(spec.n_inputs) for p in range(spec.n_outputs)}
        return model

    ids = itertools.count()
    word_width = spec.width if spec.switching is Switching.PACKET else None
    for i in range(spec.n_inputs):
        model.adapters.append(NetworkAdapter(spec.width if word_width is None else 8,
                                             spec.na_depth, word_width, f"na{i}", ids.__next__))
        if spec.version is Version.V2:
            model.ingress.append([VirtualChannel(spec.vc_depth, f"in{i}.vc{v}")
                                  for v in range(VCS_PER_INPUT)])
        else:
            # version 1 has no input VCs; the adapter feeds a plain port FIFO
            model.ingress.append([FlitFifo(spec.vc_depth, f"in{i}")])
    model.output_vcs = [[VirtualChannel(spec.vc_depth, f"out{o}.vc{v}")
                         for v in range(VCS_PER_OUTPUT)] for o in range(spec.n_outputs)]
    model.sinks = [Sink(o, ClockDomain(spec.sink_period), RoundRobinArbiter(VCS_PER_OUTPUT))
                   for o in range(spec.n_outputs)]
    model.switch_of = [i % spec.n_switches for i in range(spec.n_inputs)]
    port_of = _port_decoder(spec)
    for s in range(spec.n_switches):
        inputs = [q for i in range(spec.n_inputs) if model.switch_of[i] == s
                  for q in model.ingress[i]]
        model.switches.append(Switch(inputs, model.output_vcs, port_of, f"sw{s}"))
    for i in range(spec.n_inputs):
        sw = model.switch_of[i]
        for p in range(spec.n_outputs):
            if spec.version is Version.V2:
                model.routes[(i, p)] = (f"na{i}", f"in{i}.vc*", f"sw{sw}", f"out{p}.vc*")
            else:
                model.routes[(i, p)] = (f"na{i}", f"sw{sw}", f"out{p}.vc*")
    return model


def route(model: NetworkModel, source: int, dest_port: int) -> tuple[str, ...]:
    try:
        return model.routes[(source, dest_port)]
    except KeyError:
        raise ConfigError(f"no route from source {source} to port {dest_port} "
                          f"({model.spec.n_inputs} sources, {model.spec.n_outputs} ports)") from None


def describe(model: NetworkModel) -> str:
    """Edge list, one ``a -> b`` per line, in a stable order."""
    spec = model.spec
    lines = [f"# {spec.label}: {spec.n_inputs} inputs, {spec.n_outputs} outputs, "
             f"{spec.n_switches} switch(es), width {spec.width}, vc_depth {spec.vc_depth}"]
    if spec.version is Version.P2P:
        for s, p in model.links:
            lines.append(f"src{s} -> link{s}.{p}")
            lines.append(f"link{s}.{p} -> sink{p}")
        return "\n".join(lines) + "\n"
    for i, qs in enumerate(model.ingress):
        for q in qs:
            lines.append(f"na{i} -> {q.name}")
            lines.append(f"{q.name} -> sw{model.switch_of[i]}")
    for sw in model.switches:
        for vcs in model.output_vcs:
            for vc in vcs:
                lines.append(f"{sw.name} -> {vc.name}")
    for o, vcs in enumerate(model.output_vcs):
        for vc in vcs:
            lines.append(f"{vc.name} -> sink{o}")
    return "\n".join(lines) + "\n"
