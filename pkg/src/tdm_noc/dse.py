"""Parameter sweeps and the inverse query from performance targets back to
NoC parameters."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

from .metrics import RunMetrics, collect  # noqa: F401  (re-exported)
from .topology import ConfigError, NetworkSpec, Switching, Version
from .workload import WorkloadSpec

SWEEP_FIELDS = ("version", "switches", "flit_width", "vc_depth", "delivered", "mean_latency",
                "max_latency", "throughput_bits_per_cycle", "throughput_MBps", "max_vc_occupancy",
                "stall_cycles", "status")
# left empty by the simulator; filled from external synthesis reports
RESERVED_FIELDS = ("aluts", "registers", "block_memory_bits", "fmax_mhz")
CSV_FIELDS = SWEEP_FIELDS + RESERVED_FIELDS

_INT_FIELDS = {"switches", "flit_width", "vc_depth", "delivered", "max_latency",
               "max_vc_occupancy", "stall_cycles"}
_FLOAT_FIELDS = {"mean_latency", "throughput_bits_per_cycle", "throughput_MBps", "fmax_mhz"}


def to_bandwidth(bits_per_cycle: float | RunMetrics, f_mhz: float) -> float:
    """Payload bits per cycle at ``f_mhz`` MHz, in decimal MB/s."""
    if not f_mhz > 0:
        raise ValueError("frequency must be > 0 MHz")
    if isinstance(bits_per_cycle, RunMetrics):
        bits_per_cycle = bits_per_cycle.throughput_bits_per_cycle
    return bits_per_cycle * f_mhz * 1e6 / 8 / 1e6


def parse_version(label: str) -> dict:
    """``v1``, ``v1-flit``, ``v2`` or ``p2p`` to NetworkSpec keyword arguments."""
    label = str(label).strip().lower()
    if label == "v1-flit":
        return {"version": Version.V1, "switching": Switching.FLIT}
    try:
        return {"version": Version(label), "switching": None}
    except ValueError:
        raise ConfigError(f"unknown version {label!r} (v1, v1-flit, v2, p2p)") from None


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian grid: version (outer) x width x vc_depth (inner).

    ``widths`` apply to flit-switched versions and ``packet_widths`` to
    packet-switched version 1 (whole packet = FIFO width).
    """

    versions: tuple[str, ...] = ("v1", "v2")
    widths: tuple[int, ...] = (8,)
    vc_depths: tuple[int, ...] = (32,)
    packet_widths: tuple[int, ...] = (24,)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    frequency_mhz: float | None = None
    n_inputs: int = 4
    n_outputs: int = 4
    na_depth: int = 32
    horizon: int | None = None
    drain: bool = True
    warmup: int = 0

    def __post_init__(self):
        for name in ("versions", "widths", "vc_depths", "packet_widths"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigError(f"sweep list {name} is empty")
            object.__setattr__(self, name, value)
        if self.frequency_mhz is not None and not self.frequency_mhz > 0:
            raise ConfigError("frequency_mhz must be > 0")
        for spec in self.points():
            NetworkSpec(**spec)  # validates every combination up front

    def points(self) -> list[dict]:
        out = []
        for label in self.versions:
            kw = parse_version(label)
            if kw["version"] is Version.P2P:
                out.append(dict(kw, vc_depth=self.vc_depths[0], n_inputs=self.n_inputs,
                                n_outputs=self.n_outputs))
                continue
            packet = kw["version"] is Version.V1 and kw["switching"] is None
            for w, d in itertools.product(self.packet_widths if packet else self.widths,
                                          self.vc_depths):
                out.append(dict(kw, width=w, vc_depth=d, n_inputs=self.n_inputs,
                                n_outputs=self.n_outputs, na_depth=self.na_depth))
        return out


def run_point(point: dict, workload: WorkloadSpec, horizon: int | None = None,
              drain: bool = True, warmup: int = 0) -> RunMetrics:
    from .estimators import NocSimulator

    est = NocSimulator(horizon=horizon, drain=drain, warmup=warmup).set_params(**point)
    trace = workload.trace(point["n_inputs"], point["n_outputs"])
    return est.fit(trace).metrics_


def _row(point: dict, metrics: RunMetrics | None, error: str | None, f_mhz: float | None) -> dict:
    spec = NetworkSpec(**point)
    row = dict.fromkeys(CSV_FIELDS)
    row.update(version=spec.label, switches=spec.n_switches, flit_width=spec.width,
               vc_depth=spec.vc_depth)
    if metrics is None:
        row["status"] = f"failed: {error}"
        return row
    row.update(delivered=metrics.delivered, mean_latency=metrics.mean_latency,
               max_latency=metrics.max_latency,
               throughput_bits_per_cycle=metrics.throughput_bits_per_cycle,
               max_vc_occupancy=metrics.max_vc_occupancy, stall_cycles=metrics.stall_cycles,
               status=metrics.status)
    if f_mhz is not None:
        row["throughput_MBps"] = to_bandwidth(metrics.throughput_bits_per_cycle, f_mhz)
    return row


def _sweep_task(args):
    point, workload, horizon, drain, warmup, f_mhz = args
    try:
        m = run_point(point, workload, horizon, drain, warmup)
    except Exception as exc:  # one bad point must not sink the sweep
        return _row(point, None, f"{type(exc).__name__}: {exc}", f_mhz)
    return _row(point, m, None, f_mhz)


def sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    """One row per grid point, in grid order regardless of ``workers``."""
    tasks = [(p, spec.workload, spec.horizon, spec.drain, spec.warmup, spec.frequency_mhz)
             for p in spec.points()]
    if workers <= 1:
        return [_sweep_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_task, tasks))


# -- inverse query ---------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """Performance targets; unset fields are unconstrained.

    With ``frequency_mhz`` set, ``min_throughput_mbps`` is checked against the
    row's bits/cycle at that frequency; otherwise against its MB/s column.
    """

    min_throughput_mbps: float | None = None
    frequency_mhz: float | None = None
    min_throughput_bits_per_cycle: float | None = None
    max_mean_latency: float | None = None
    max_latency: int | None = None
    max_vc_depth: int | None = None
    max_switches: int | None = None

    def __post_init__(self):
        targets = [f.name for f in fields(self) if f.name != "frequency_mhz"]
        if all(getattr(self, n) is None for n in targets):
            raise ConfigError("a constraint needs at least one target")

    def admits(self, row: dict) -> bool:
        if row.get("status") != "ok":
            return False
        if self.min_throughput_mbps is not None:
            if self.frequency_mhz is not None:
                mbps = to_bandwidth(row["throughput_bits_per_cycle"], self.frequency_mhz)
            else:
                mbps = row.get("throughput_MBps")
                if mbps is None:
                    raise ConfigError("throughput_MBps missing from the sweep table; "
                                      "give the constraint a frequency_mhz")
            if mbps < self.min_throughput_mbps:
                return False
        checks = (
            ("throughput_bits_per_cycle", self.min_throughput_bits_per_cycle, False),
            ("mean_latency", self.max_mean_latency, True),
            ("max_latency", self.max_latency, True),
            ("vc_depth", self.max_vc_depth, True),
            ("switches", self.max_switches, True),
        )
        for key, bound, upper in checks:
            if bound is None:
                continue
            value = row.get(key)
            if value is None or (value > bound if upper else value < bound):
                return False
        return True


def rank_key(row: dict) -> tuple:
    return (row["switches"], row["vc_depth"], row["flit_width"])


def inverse_query(results: Sequence[dict], c: Constraint) -> list[dict]:
    """Rows meeting every target, cheapest first: fewest switches, then
    smallest depth, then smallest width; ties keep sweep order."""
    if not results:
        raise ValueError("empty sweep table")
    return sorted((r for r in results if c.admits(r)), key=rank_key)


# -- CSV -----------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in CSV_FIELDS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(SWEEP_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigError(f"sweep table lacks columns: {', '.join(sorted(missing))}")
    rows = []
    for r in reader:
        row = {}
        for k, v in r.items():
            if v == "" or v is None:
                row[k] = None
            elif k in _INT_FIELDS:
                row[k] = int(v)
            elif k in _FLOAT_FIELDS:
                row[k] = float(v)
            else:
                row[k] = v
        rows.append(row)
    return rows


def plot_sweep(rows: Sequence[dict], sweep_id: str, directory: str = ".") -> list[str]:
    """Latency and throughput against vc_depth, one line per (version, width).
    Returns the SVG paths written."""
    import os

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = sweep_id
    paths = []
    for metric in ("mean_latency", "throughput_bits_per_cycle"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        groups: dict[tuple, list] = {}
        for r in rows:
            if r.get("status") == "ok" and r.get(metric) is not None:
                groups.setdefault((r["version"], r["flit_width"]), []).append(r)
        for (version, width), rs in groups.items():
            rs = sorted(rs, key=lambda r: r["vc_depth"])
            ax.plot([r["vc_depth"] for r in rs], [r[metric] for r in rs], marker="o",
                    label=f"{version} w={width}")
        ax.set_xlabel("vc_depth")
        ax.set_ylabel(metric)
        if groups:
            ax.legend(fontsize="small")
        fig.tight_layout()
        path = os.path.join(directory, f"{sweep_id}_{metric}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


def isclose_rows(a: dict, b: dict) -> bool:
    """Row equality with float tolerance (for comparing parsed tables)."""
    for k in SWEEP_FIELDS:
        x, y = a.get(k), b.get(k)
        if isinstance(x, float) or isinstance(y, float):
            if x is None or y is None or not math.isclose(x, y, rel_tol=1e-6, abs_tol=1e-6):
                return False
        elif x != y:
            return False
    return True
