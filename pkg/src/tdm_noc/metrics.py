"""Per-run statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .engine import Simulation


@dataclass
class RunMetrics:
    version: str
    switches: int
    flit_width: int
    vc_depth: int
    cycles: int
    injected: int
    delivered: int
    undrained: int
    min_latency: int | None = None
    mean_latency: float | None = None
    max_latency: int | None = None
    mean_queueing: float | None = None
    mean_serialization: float | None = None
    min_transit: int | None = None
    mean_transit: float | None = None
    max_transit: int | None = None
    throughput_bits_per_cycle: float = 0.0
    flit_throughput: float = 0.0
    max_vc_occupancy: int = 0
    vc_occupancy: dict[str, int] = field(default_factory=dict)
    stall_cycles: int = 0
    stalls: dict[str, int] = field(default_factory=dict)
    alloc_waits: int = 0
    intake_stalls: int = 0

    @property
    def complete(self) -> bool:
        """False when nothing was delivered: latency fields are then absent."""
        return self.delivered > 0

    @property
    def status(self) -> str:
        return "ok" if self.complete else "incomplete"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        return d


def collect(sim: "Simulation") -> RunMetrics:
    spec = sim.spec
    done = [m for m in sim.messages if m.delivered is not None and m.inject >= sim.warmup]
    window = max(sim.cycle - sim.warmup, 0)
    occupancy = {b.name: b.max_occupancy for b in sim.buffers()}
    vc_occ = {name: v for name, v in occupancy.items()}
    m = RunMetrics(
        version=spec.label,
        switches=spec.n_switches,
        flit_width=spec.width,
        vc_depth=spec.vc_depth,
        cycles=sim.cycle,
        injected=len(sim.messages),
        delivered=sum(1 for x in sim.messages if x.delivered is not None),
        undrained=sum(1 for x in sim.messages if x.delivered is None),
        throughput_bits_per_cycle=sim.window_bits / window if window else 0.0,
        flit_throughput=sim.window_flits / window if window else 0.0,
        max_vc_occupancy=max(vc_occ.values(), default=0),
        vc_occupancy=vc_occ,
        stall_cycles=sum(sim.stalls.values()),
        stalls=dict(sorted(sim.stalls.items())),
        alloc_waits=sum(sim.alloc_waits.values()),
        intake_stalls=sum(sim.intake_stalls.values()),
    )
    if done:
        lat = [x.latency for x in done]
        transit = [x.transit for x in done]
        m.min_latency, m.max_latency = min(lat), max(lat)
        m.mean_latency = fmean(lat)
        m.min_transit, m.max_transit = min(transit), max(transit)
        m.mean_transit = fmean(transit)
        m.mean_serialization = fmean(x.serialization for x in done)
        m.mean_queueing = fmean(x.latency - x.serialization - x.transit for x in done)
    return m
