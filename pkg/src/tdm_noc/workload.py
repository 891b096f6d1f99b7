"""Multispectral authentication math and the traffic it generates.

The four pipeline tasks and their payload sizes::

    id  task                        bits  port
    0   color projection             72    0
    1   color distance               64    1
    2   multispectral projection     64    2
    3   multispectral distance       24    3
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

TASKS = ("color_projection", "color_distance", "multispectral_projection", "multispectral_distance")
PAYLOAD_BITS = {0: 72, 1: 64, 2: 64, 3: 24}
WINDOWS = (2, 4, 8, 16, 32)
CAMERA_RANGE_NM = (380.0, 780.0)
CAMERA_SAMPLES = (3, 800)
TRACE_FIELDS = ("time", "source", "port", "kind", "hex_payload")


class Spectrum:
    """Samples ``(wavelength_nm, value)`` with strictly increasing wavelengths.

    ``camera=True`` additionally enforces the acquisition range and sample
    count of the multispectral camera.
    """

    def __init__(self, wavelengths, values, camera: bool = False):
        lam = np.asarray(wavelengths, dtype=float)
        val = np.asarray(values, dtype=float)
        if lam.ndim != 1 or lam.shape != val.shape or lam.size == 0:
            raise ValueError("wavelengths and values must be equal-length 1-D sequences")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("spectral values must be finite")
        if camera:
            lo, hi = CAMERA_RANGE_NM
            if lam[0] < lo or lam[-1] > hi:
                raise ValueError(f"camera spectra lie within [{lo}, {hi}] nm")
            if not CAMERA_SAMPLES[0] <= lam.size <= CAMERA_SAMPLES[1]:
                raise ValueError(f"camera spectra have {CAMERA_SAMPLES[0]}..{CAMERA_SAMPLES[1]} samples")
            if np.any(val < 0):
                raise ValueError("camera spectral values are nonnegative")
        self.wavelengths = lam
        self.values = val

    def __len__(self):
        return self.values.size

    @classmethod
    def from_csv(cls, text: str, camera: bool = True) -> "Spectrum":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip().lower() == "lambda":
            rows = rows[1:]
        pairs = [(float(a), float(b)) for a, b in rows if a.strip()]
        lam, val = zip(*pairs) if pairs else ((), ())
        return cls(lam, val, camera=camera)


class ColorTriple(NamedTuple):
    r: float
    g: float
    b: float


def color_project(s: Spectrum, coeffs: Sequence[Spectrum]) -> ColorTriple:
    """Weighted sum of the spectrum against each axis's coefficient curve,
    accumulated in ascending wavelength order."""
    if len(coeffs) != 3:
        raise ValueError(f"need 3 coefficient spectra, got {len(coeffs)}")
    out = []
    for c in coeffs:
        if c.wavelengths.shape != s.wavelengths.shape or np.any(c.wavelengths != s.wavelengths):
            raise ValueError("coefficient spectrum is sampled on a different wavelength grid")
        acc = 0.0
        for sv, cv in zip(s.values.tolist(), c.values.tolist()):
            acc += sv * cv
        out.append(acc)
    return ColorTriple(*out)


def color_distance(a: Iterable[float], b: Iterable[float]) -> float:
    a, b = tuple(a), tuple(b)
    if len(a) != len(b):
        raise ValueError("color triples of different dimension")
    if not all(math.isfinite(x) for x in a + b):
        raise ValueError("color components must be finite")
    return math.dist(a, b)


@dataclass(frozen=True)
class RegionComparison:
    similar: int
    dissimilar: int

    def __post_init__(self):
        if self.similar < 0 or self.dissimilar < 0:
            raise ValueError("region counts are nonnegative")


def similitude_ratio(rc: RegionComparison) -> float:
    if rc.dissimilar == 0:
        raise ZeroDivisionError("similitude ratio undefined: no dissimilar regions")
    return rc.similar / rc.dissimilar


def compare_regions(distances: Iterable[float], threshold: float) -> RegionComparison:
    """Regions with distance <= ``threshold`` count as similar."""
    d = list(distances)
    similar = sum(1 for x in d if x <= threshold)
    return RegionComparison(similar, len(d) - similar)


def average_region(pixels, window: int) -> np.ndarray:
    """Mean over non-overlapping ``window`` x ``window`` blocks.

    Extra trailing axes (e.g. spectral bands) are averaged per band.
    """
    if window not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}, got {window}")
    a = np.asarray(pixels, dtype=float)
    if a.size == 0:
        raise ValueError("empty pixel grid")
    if a.ndim < 2:
        raise ValueError("pixel grid must be at least 2-D")
    h, w = a.shape[:2]
    if h % window or w % window:
        raise ValueError(f"grid {h}x{w} is not divisible by window {window}")
    rest = a.shape[2:]
    blocks = a.reshape(h // window, window, w // window, window, *rest)
    return blocks.mean(axis=(1, 3))


# -- fixed-point payload lanes ----------------------------------------------------

def encode_fixed_lanes(values: Iterable[float], int_length: int, lane_bits: int = 16) -> int:
    """Pack reals as unsigned fixed-point lanes, ``int_length`` integer bits
    each, first value in the most significant lane.  Out-of-range values
    saturate."""
    frac = lane_bits - int_length
    if frac < 0:
        raise ValueError("int_length exceeds lane width")
    top = (1 << lane_bits) - 1
    acc = 0
    for v in values:
        q = min(max(round(v * (1 << frac)), 0), top)
        acc = (acc << lane_bits) | q
    return acc


def decode_fixed_lanes(word: int, n: int, int_length: int, lane_bits: int = 16) -> list[float]:
    frac = lane_bits - int_length
    mask = (1 << lane_bits) - 1
    return [((word >> ((n - 1 - i) * lane_bits)) & mask) / (1 << frac) for i in range(n)]


# -- traces -------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceMessage:
    time: int
    source: int
    port: int
    kind: int
    payload: int
    n_bits: int
    int_length: int = 0


class TrafficTrace(list):
    """Time-ordered list of :class:`TraceMessage`."""

    @property
    def kinds(self) -> dict[int, int]:
        return {m.kind: m.n_bits for m in self}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for m in self:
            w.writerow([m.time, m.source, m.port, m.kind, f"{m.payload:0{-(-m.n_bits // 4)}x}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, payload_bits: Mapping[int, int] = PAYLOAD_BITS) -> "TrafficTrace":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise ValueError(f"trace header must be {','.join(TRACE_FIELDS)}")
        out = cls()
        for lineno, row in enumerate(reader, 2):
            try:
                kind = int(row["kind"])
                n = payload_bits[kind]
                payload = int(row["hex_payload"], 16)
                out.append(TraceMessage(int(row["time"]), int(row["source"]), int(row["port"]),
                                        kind, payload, n))
            except KeyError:
                raise ValueError(f"line {lineno}: no declared payload length for kind {row['kind']}") from None
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if payload >> n:
                raise ValueError(f"line {lineno}: payload wider than {n} bits")
        return out


def generate_auth_trace(regions: int, wavelengths: int = 1, window: int = 8, sources: int = 4,
                        start_time: int = 0, spacing: int = 1, seed: int = 0) -> TrafficTrace:
    """One message per pipeline task per region (and per wavelength).

    Region ``r`` is read from storage module ``r % sources``; task ``k`` goes
    to processing port ``k``.  Message ``j`` (in generation order) is sent at
    ``start_time + j * spacing``.  Payload contents are seeded pseudo-data.
    """
    for name, v in (("regions", regions), ("wavelengths", wavelengths),
                    ("sources", sources), ("spacing", spacing)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if window not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}, got {window}")
    rng = np.random.default_rng(seed)
    trace = TrafficTrace()
    j = 0
    for r in range(regions):
        for _ in range(wavelengths):
            for kind in range(len(TASKS)):
                n = PAYLOAD_BITS[kind]
                trace.append(TraceMessage(start_time + j * spacing, r % sources, kind, kind,
                                          _random_bits(rng, n), n))
                j += 1
    return trace


def synthetic_uniform(rate: float, duration: int, kinds: Sequence[int] = (0, 1, 2, 3), seed: int = 0,
                      sources: int = 4, ports: int = 4,
                      payload_bits: Mapping[int, int] = PAYLOAD_BITS) -> TrafficTrace:
    """Bernoulli(``rate``) injection per source per cycle, uniform destination
    port and data kind."""
    if not rate > 0:
        raise ValueError("rate must be > 0")
    if not kinds:
        raise ValueError("need at least one data kind")
    rng = np.random.default_rng(seed)
    fire = rng.random((duration, sources)) < rate
    trace = TrafficTrace()
    for t, s in zip(*np.nonzero(fire)):
        kind = int(kinds[rng.integers(len(kinds))])
        n = payload_bits[kind]
        trace.append(TraceMessage(int(t), int(s), int(rng.integers(ports)), kind,
                                  _random_bits(rng, n), n))
    return trace


def stream_trace(duration: int, kind: int = 1, interval: int = 1, sources: int = 4, ports: int = 4,
                 seed: int = 0, payload_bits: Mapping[int, int] = PAYLOAD_BITS) -> TrafficTrace:
    """Each source streams ``kind`` packets to its own processing port
    (``source % ports``) every ``interval`` cycles."""
    rng = np.random.default_rng(seed)
    n = payload_bits[kind]
    trace = TrafficTrace()
    for t in range(0, duration, interval):
        for s in range(sources):
            trace.append(TraceMessage(t, s, s % ports, kind, _random_bits(rng, n), n))
    return trace


def _random_bits(rng: np.random.Generator, n: int) -> int:
    nbytes = -(-n // 8)
    return int.from_bytes(rng.bytes(nbytes), "big") >> (nbytes * 8 - n)


# -- workload descriptor ---------------------------------------------------------

SOURCES = ("auth", "synthetic", "stream", "file")


@dataclass(frozen=True)
class WorkloadSpec:
    """Which traffic to generate; picklable so sweep workers can rebuild it.

    ``source`` picks the generator: ``auth`` (authentication pipeline),
    ``synthetic`` (uniform random), ``stream`` (per-source streams) or
    ``file`` (a trace CSV at ``trace_file``).
    """

    source: str = "auth"
    seed: int = 0
    regions: int = 16
    wavelengths: int = 1
    window: int = 8
    spacing: int = 1
    start_time: int = 0
    rate: float = 0.1
    duration: int = 1000
    kinds: tuple[int, ...] = (0, 1, 2, 3)
    stream_kind: int = 1
    interval: int = 1
    trace_file: str | None = None
    similarity_threshold: float = 0.0

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"workload source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "file" and not self.trace_file:
            raise ValueError("workload source 'file' needs trace_file")
        object.__setattr__(self, "kinds", tuple(self.kinds))
        for name in ("regions", "wavelengths", "spacing", "duration", "interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}, got {self.window}")
        if self.start_time < 0:
            raise ValueError("start_time must be >= 0")

    def trace(self, sources: int = 4, ports: int = 4) -> TrafficTrace:
        if self.source == "auth":
            if ports < len(TASKS):
                raise ValueError(f"the authentication pipeline needs {len(TASKS)} ports")
            return generate_auth_trace(self.regions, self.wavelengths, self.window, sources,
                                       self.start_time, self.spacing, self.seed)
        if self.source == "synthetic":
            return synthetic_uniform(self.rate, self.duration, self.kinds, self.seed, sources, ports)
        if self.source == "stream":
            return stream_trace(self.duration, self.stream_kind, self.interval, sources, ports,
                                self.seed)
        with open(self.trace_file, encoding="utf-8") as fh:
            return TrafficTrace.from_csv(fh.read())
